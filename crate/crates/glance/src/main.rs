use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use glance::classifier::ModelArtifact;
use glance::config::{load_run_config, RunConfig};
use glance::metrics::EvalRecord;
use glance::oracle;
use glance::report;

#[derive(Parser)]
#[command(
    name = "glance",
    about = "Global counterfactual actions for tabular classifiers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full cross-validation protocol from a config file.
    Run(RunArgs),
    /// Compare evaluation records across methods (dominance + flags).
    Compare(CompareArgs),
    /// Replay a bundled benchmark fixture and diff against expectations.
    ReplayFixture { name: String },
    /// Validate the engine against the exact and greedy reference solvers
    /// on random explicit instances.
    OracleCheck(OracleArgs),
    /// Train, save, and inspect classifier artifacts.
    #[command(subcommand)]
    Model(ModelCommand),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the run config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// JSON files, each a list of evaluation records.
    records: Vec<PathBuf>,
    /// Write the full comparison report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 13)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    cases: usize,
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Train the configured model on the full dataset and save the artifact.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print a saved model artifact's descriptor and schema digest.
    Info { path: PathBuf },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::ReplayFixture { name } => replay_fixture(&name),
        Command::OracleCheck(args) => oracle_check(args),
        Command::Model(cmd) => model(cmd),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg: RunConfig = load_run_config(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    let (run_report, manifest) = report::execute_run(&cfg)?;
    report::write_outputs(&cfg.output_dir, &run_report, &manifest)?;

    let r = &run_report.record;
    println!(
        "dataset={} model={} s={} folds={}",
        r.dataset,
        r.model,
        r.s,
        run_report.folds.len()
    );
    println!(
        "effectiveness: {:.2} +- {:.2} %   cost: {}   actions: {}",
        r.eff_mean,
        r.eff_std,
        match (r.cost_mean, r.cost_std) {
            (Some(m), Some(s)) => format!("{m:.3} +- {s:.3}"),
            _ => "-".into(),
        },
        r.size_actual
    );
    println!(
        "flags: practical={} robust={}",
        run_report.flags.practical, run_report.flags.robust
    );
    println!("report written to {}", cfg.output_dir.display());
    if let Some(gate) = cfg.min_effectiveness {
        if r.eff_mean < gate {
            bail!(
                "effectiveness gate failed: {:.2}% < required {:.2}%",
                r.eff_mean,
                gate
            );
        }
    }
    Ok(())
}

fn compare(args: CompareArgs) -> anyhow::Result<()> {
    if args.records.is_empty() {
        bail!("no record files given");
    }
    let mut records: Vec<EvalRecord> = Vec::new();
    for path in &args.records {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        let batch: Vec<EvalRecord> = serde_json::from_str(&text)
            .with_context(|| format!("parsing {} as a record list", path.display()))?;
        records.extend(batch);
    }
    let comparison = report::compare(&records)?;
    for (method, tally) in &comparison.tallies {
        println!(
            "{method}: dominates {}/{} dominated {}",
            tally.dominates, tally.comparisons, tally.dominated
        );
    }
    let json = serde_json::to_string_pretty(&comparison)?;
    match args.output {
        Some(path) => std::fs::write(&path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn replay_fixture(name: &str) -> anyhow::Result<()> {
    let outcome = report::replay_fixture(name)?;
    println!(
        "fixture {}: dominates {}/{}, dominated {}, impractical baseline rows {}, \
         eff-robust {}, cost-robust {}",
        outcome.name,
        outcome.computed.glance_dominates,
        outcome.computed.glance_comparisons,
        outcome.computed.glance_dominated,
        outcome.computed.fast_ares_impractical,
        outcome.computed.glance_eff_robust,
        outcome.computed.glance_cost_robust
    );
    if !outcome.diffs.is_empty() {
        for d in &outcome.diffs {
            eprintln!("mismatch: {d}");
        }
        bail!("{} cell(s) differ from stored expectations", outcome.diffs.len());
    }
    println!("all tallies match stored expectations");
    Ok(())
}

fn oracle_check(args: OracleArgs) -> anyhow::Result<()> {
    let bound = 1.0 - (-1.0f64).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failures = 0usize;
    for case in 0..args.cases {
        let n = rng.gen_range(4..=15u64);
        let universe: Vec<u64> = (0..n).collect();
        let family: Vec<BTreeSet<u64>> = (0..rng.gen_range(3..=10))
            .map(|_| {
                universe
                    .iter()
                    .copied()
                    .filter(|_| rng.gen_bool(0.35))
                    .collect()
            })
            .collect();
        let s = rng.gen_range(1..=3);
        let inst = oracle::max_cover_reduction(&universe, &family, s)?;
        let (_, opt, _) = oracle::exhaustive_best(&inst)?;
        let (_, greedy) = oracle::greedy_cover(&inst);
        let ok = greedy <= opt + 1e-12 && greedy >= bound * opt - 1e-12;
        if !ok {
            failures += 1;
            eprintln!("case {case}: greedy {greedy:.4} outside [{:.4}, {opt:.4}]", bound * opt);
        }
    }
    if failures > 0 {
        bail!("{failures}/{} oracle cases failed", args.cases);
    }
    println!(
        "{} cases: greedy within the (1 - 1/e) bound of the exact optimum",
        args.cases
    );
    Ok(())
}

fn model(cmd: ModelCommand) -> anyhow::Result<()> {
    match cmd {
        ModelCommand::Train { config, output } => {
            let cfg = load_run_config(&config)?;
            cfg.validate(true)?;
            let data = cfg.dataset.load()?;
            let trained = cfg.model.fit(&data)?;
            let classifier = trained.classifier();
            let hits = data
                .rows
                .iter()
                .zip(&data.labels)
                .filter(|(x, &y)| {
                    classifier.predict_encoded(&data.schema.encode_unchecked(x)) == y
                })
                .count();
            println!("descriptor: {}", classifier.descriptor());
            println!(
                "training accuracy: {:.4} ({} rows)",
                hits as f64 / data.len() as f64,
                data.len()
            );
            let artifact = ModelArtifact::new(&data.schema, trained);
            artifact.save(&output)?;
            println!("artifact written to {}", output.display());
        }
        ModelCommand::Info { path } => {
            let artifact = ModelArtifact::load(&path)?;
            println!("descriptor: {}", artifact.classifier().descriptor());
            println!("schema digest: {}", artifact.schema_digest);
        }
    }
    Ok(())
}

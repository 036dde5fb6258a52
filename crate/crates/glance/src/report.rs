//! Run orchestration and reporting: the fold protocol (train, affected set,
//! action search, evaluation), dominance comparison across methods, and
//! replay of the bundled benchmark-table fixture.
//!
//! Result bodies are deterministic functions of the config and data;
//! wall-clock and host details live in a separate manifest so determinism
//! can be checked byte-for-byte.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::classifier::{affected_set, SavedModel};
use crate::config::RunConfig;
use crate::engine::{self, ActionDiagnostics};
use crate::metrics::{
    self, CurvePoint, EvalRecord, FoldOutcome, RecordFlags,
};
use crate::tabular::split_kfold;
use crate::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: f64,
    pub affected: usize,
    pub actions: Vec<Action>,
    pub diagnostics: Vec<ActionDiagnostics>,
    pub warnings: Vec<String>,
    pub effectiveness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_cost: Option<f64>,
    pub curve: Vec<CurvePoint>,
}

/// Deterministic result body of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub config_digest: String,
    pub dataset: String,
    pub dataset_fingerprint: String,
    pub dropped_rows: usize,
    pub model: String,
    pub seed: u64,
    pub generator_seed: u64,
    pub folds: Vec<FoldReport>,
    pub record: EvalRecord,
    pub flags: RecordFlags,
    /// Mean covered fraction across folds at each shared threshold.
    pub aggregate_curve: Vec<CurvePoint>,
}

/// Non-deterministic run details, quarantined from the result body.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub created_at: String,
    pub total_seconds: f64,
    pub fold_seconds: Vec<f64>,
    pub host_os: String,
    pub config_digest: String,
}

/// Executes the full cross-validation protocol for a config. Folds run
/// sequentially so the report is reproducible byte-for-byte.
pub fn execute_run(cfg: &RunConfig) -> Result<(RunReport, RunManifest)> {
    cfg.validate(true)?;
    let started = Instant::now();
    let data = cfg.dataset.load()?;
    let folds = split_kfold(&data, cfg.folds, cfg.glance.seed)?;

    let mut fold_reports = Vec::with_capacity(folds.len());
    let mut fold_outcomes = Vec::with_capacity(folds.len());
    let mut fold_seconds = Vec::with_capacity(folds.len());
    let mut fold_costs: Vec<Vec<Option<f64>>> = Vec::with_capacity(folds.len());

    for (i, (train, test)) in folds.iter().enumerate() {
        let fold_started = Instant::now();
        let in_fold = |e: Error| Error::Config(format!("fold {i}: {e}"));
        let trained = cfg.model.fit(train).map_err(in_fold)?;
        let model = trained.classifier();

        let accuracy = |ds: &crate::tabular::Dataset| {
            let hits = ds
                .rows
                .iter()
                .zip(&ds.labels)
                .filter(|(x, &y)| model.predict_encoded(&ds.schema.encode_unchecked(x)) == y)
                .count();
            hits as f64 / ds.len() as f64
        };
        let test_accuracy = accuracy(test);
        let train_accuracy = match &trained {
            SavedModel::Logistic(m) => Some(m.meta.train_accuracy),
            SavedModel::Knn(_) => None,
        };

        let xa = affected_set(model, test);
        if xa.is_empty() {
            return Err(Error::Config(format!(
                "fold {i}: no affected instances in the test split"
            )));
        }
        let solution = engine::glance(&xa, model, train, &cfg.glance).map_err(in_fold)?;

        let costs: Vec<Option<f64>> = xa
            .iter()
            .map(|x| metrics::recourse_cost(&solution.actions, x, model, &train.schema))
            .collect();
        let covered: Vec<f64> = costs.iter().flatten().copied().collect();
        let effectiveness = covered.len() as f64 / xa.len() as f64;
        let average_cost = (!covered.is_empty())
            .then(|| covered.iter().sum::<f64>() / covered.len() as f64);

        fold_outcomes.push(FoldOutcome {
            effectiveness,
            average_cost,
            size: solution.actions.len(),
            runtime_seconds: None,
        });
        fold_costs.push(costs);
        fold_reports.push(FoldReport {
            fold: i,
            train_rows: train.len(),
            test_rows: test.len(),
            train_accuracy,
            test_accuracy,
            affected: xa.len(),
            actions: solution.actions,
            diagnostics: solution.diagnostics,
            warnings: solution.warnings,
            effectiveness,
            average_cost,
            curve: Vec::new(), // filled once the shared grid is known
        });
        fold_seconds.push(fold_started.elapsed().as_secs_f64());
    }

    // shared threshold grid: explicit config grid, or the union of observed
    // recourse costs so the terminal point of each curve is its fold's
    // effectiveness
    let grid: Vec<f64> = match &cfg.curve_grid {
        Some(g) => g.clone(),
        None => {
            let mut g: Vec<f64> = fold_costs
                .iter()
                .flatten()
                .filter_map(|c| *c)
                .collect();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        }
    };
    for (report, costs) in fold_reports.iter_mut().zip(&fold_costs) {
        let n = costs.len() as f64;
        report.curve = grid
            .iter()
            .map(|&t| CurvePoint {
                cost_threshold: t,
                covered_fraction: costs
                    .iter()
                    .filter(|c| c.is_some_and(|c| c <= t))
                    .count() as f64
                    / n,
            })
            .collect();
    }
    let aggregate_curve: Vec<CurvePoint> = grid
        .iter()
        .enumerate()
        .map(|(gi, &t)| CurvePoint {
            cost_threshold: t,
            covered_fraction: fold_reports
                .iter()
                .map(|f| f.curve[gi].covered_fraction)
                .sum::<f64>()
                / fold_reports.len() as f64,
        })
        .collect();

    let record = metrics::aggregate_folds(
        "glance",
        &cfg.dataset.display_name(),
        cfg.model.label(),
        cfg.glance.s,
        &fold_outcomes,
    )?;
    let flags = metrics::flag_record(&record);
    let report = RunReport {
        version: REPORT_VERSION,
        config_digest: cfg.digest(),
        dataset: cfg.dataset.display_name(),
        dataset_fingerprint: data.fingerprint(),
        dropped_rows: data.dropped_rows,
        model: cfg.model.label().into(),
        seed: cfg.glance.seed,
        generator_seed: cfg.glance.generator.seed,
        folds: fold_reports,
        record,
        flags,
        aggregate_curve,
    };
    let manifest = RunManifest {
        created_at: chrono::Utc::now().to_rfc3339(),
        total_seconds: started.elapsed().as_secs_f64(),
        fold_seconds,
        host_os: std::env::consts::OS.into(),
        config_digest: report.config_digest.clone(),
    };
    Ok((report, manifest))
}

/// Writes report.json (deterministic), manifest.json, and curves.csv
/// (`cost_threshold,covered_fraction` rows of the aggregate curve) into the
/// output directory.
pub fn write_outputs(dir: &Path, report: &RunReport, manifest: &RunManifest) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let report_json =
        serde_json::to_string_pretty(report).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(dir.join("report.json"), report_json + "\n")?;
    let manifest_json =
        serde_json::to_string_pretty(manifest).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(dir.join("manifest.json"), manifest_json + "\n")?;
    let mut csv = String::from("cost_threshold,covered_fraction\n");
    for p in &report.aggregate_curve {
        csv.push_str(&format!("{},{}\n", p.cost_threshold, p.covered_fraction));
    }
    std::fs::write(dir.join("curves.csv"), csv)?;
    Ok(())
}

/// Key identifying a record within a comparison group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordKey {
    pub method: String,
    pub dataset: String,
    pub model: String,
}

impl RecordKey {
    fn of(r: &EvalRecord) -> Self {
        RecordKey {
            method: r.method.clone(),
            dataset: r.dataset.clone(),
            model: r.model.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominancePair {
    pub first: RecordKey,
    pub second: RecordKey,
    pub first_dominates: bool,
    pub second_dominates: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MethodTally {
    pub comparisons: usize,
    pub dominates: usize,
    pub dominated: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub matrix: Vec<DominancePair>,
    pub tallies: BTreeMap<String, MethodTally>,
    pub flags: Vec<(RecordKey, RecordFlags)>,
    /// Pairs skipped because a record lacks cost statistics.
    pub skipped_pairs: usize,
}

/// Compares records pairwise within each (dataset, model, s) group: full
/// dominance matrix, per-method tallies, and per-record flags. Records
/// without cost statistics are flagged but excluded from dominance.
pub fn compare(records: &[EvalRecord]) -> Result<ComparisonReport> {
    for r in records {
        r.validate()?;
    }
    let mut groups: BTreeMap<(String, String, usize), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.dataset.clone(), r.model.clone(), r.s))
            .or_default()
            .push(r);
    }
    for (key, group) in &groups {
        let mut methods: Vec<&str> = group.iter().map(|r| r.method.as_str()).collect();
        methods.sort_unstable();
        if methods.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Incomparable(format!(
                "duplicate method within group ({}, {}, s={})",
                key.0, key.1, key.2
            )));
        }
    }

    let mut matrix = Vec::new();
    let mut tallies: BTreeMap<String, MethodTally> = BTreeMap::new();
    let mut skipped_pairs = 0usize;
    for group in groups.values() {
        for i in 0..group.len() {
            for j in (i + 1)..group.len() {
                let (a, b) = (group[i], group[j]);
                match (metrics::pareto_dominates(a, b), metrics::pareto_dominates(b, a)) {
                    (Ok(ab), Ok(ba)) => {
                        matrix.push(DominancePair {
                            first: RecordKey::of(a),
                            second: RecordKey::of(b),
                            first_dominates: ab,
                            second_dominates: ba,
                        });
                        for (m, dom, sub) in [(a, ab, ba), (b, ba, ab)] {
                            let t = tallies.entry(m.method.clone()).or_default();
                            t.comparisons += 1;
                            if dom {
                                t.dominates += 1;
                            }
                            if sub {
                                t.dominated += 1;
                            }
                        }
                    }
                    _ => skipped_pairs += 1,
                }
            }
        }
    }
    let flags = records
        .iter()
        .map(|r| (RecordKey::of(r), metrics::flag_record(r)))
        .collect();
    Ok(ComparisonReport {
        matrix,
        tallies,
        flags,
        skipped_pairs,
    })
}

/// The bundled benchmark table (s=4 rows of the published comparison) with
/// its expected tallies.
pub const TABLE1_S4: &str = include_str!("../fixtures/table1_s4.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureExpectations {
    pub glance_comparisons: usize,
    pub glance_dominates: usize,
    pub glance_dominated: usize,
    pub glance_dominated_by: Vec<RecordKey>,
    pub fast_ares_impractical: usize,
    pub glance_eff_robust: usize,
    pub glance_cost_robust: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub records: Vec<EvalRecord>,
    pub expectations: FixtureExpectations,
}

/// Computed tallies over a fixture's records, mirroring the expectations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureOutcome {
    pub name: String,
    pub computed: FixtureExpectations,
    pub expected: FixtureExpectations,
    pub diffs: Vec<String>,
}

pub fn load_fixture(name: &str) -> Result<Fixture> {
    match name {
        "table1-s4" => {
            serde_json::from_str(TABLE1_S4).map_err(|e| Error::Fixture(e.to_string()))
        }
        "" => Err(Error::Fixture("fixture name is empty".into())),
        other => Err(Error::Fixture(format!("unknown fixture '{other}'"))),
    }
}

/// Reruns the flagging and dominance machinery over a bundled fixture and
/// diffs the tallies against the stored expectations.
pub fn replay_fixture(name: &str) -> Result<FixtureOutcome> {
    let fixture = load_fixture(name)?;
    let report = compare(&fixture.records)?;
    let glance_tally = report.tallies.get("glance").cloned().unwrap_or_default();

    let mut dominated_by: Vec<RecordKey> = report
        .matrix
        .iter()
        .filter_map(|p| {
            if p.first.method == "glance" && p.second_dominates {
                Some(p.second.clone())
            } else if p.second.method == "glance" && p.first_dominates {
                Some(p.first.clone())
            } else {
                None
            }
        })
        .collect();
    dominated_by.sort();

    let count_flags = |method: &str, f: fn(&RecordFlags) -> bool| {
        report
            .flags
            .iter()
            .filter(|(k, flags)| k.method == method && f(flags))
            .count()
    };
    let computed = FixtureExpectations {
        glance_comparisons: glance_tally.comparisons,
        glance_dominates: glance_tally.dominates,
        glance_dominated: glance_tally.dominated,
        glance_dominated_by: dominated_by,
        fast_ares_impractical: count_flags("fast_ares", |f| !f.practical),
        glance_eff_robust: count_flags("glance", |f| f.eff_robust),
        glance_cost_robust: count_flags("glance", |f| f.cost_robust),
    };

    let expected = fixture.expectations;
    let mut diffs = Vec::new();
    let mut diff = |field: &str, got: &dyn std::fmt::Debug, want: &dyn std::fmt::Debug| {
        diffs.push(format!("{field}: computed {got:?}, expected {want:?}"));
    };
    if computed.glance_comparisons != expected.glance_comparisons {
        diff(
            "glance_comparisons",
            &computed.glance_comparisons,
            &expected.glance_comparisons,
        );
    }
    if computed.glance_dominates != expected.glance_dominates {
        diff(
            "glance_dominates",
            &computed.glance_dominates,
            &expected.glance_dominates,
        );
    }
    if computed.glance_dominated != expected.glance_dominated {
        diff(
            "glance_dominated",
            &computed.glance_dominated,
            &expected.glance_dominated,
        );
    }
    if computed.glance_dominated_by != expected.glance_dominated_by {
        diff(
            "glance_dominated_by",
            &computed.glance_dominated_by,
            &expected.glance_dominated_by,
        );
    }
    if computed.fast_ares_impractical != expected.fast_ares_impractical {
        diff(
            "fast_ares_impractical",
            &computed.fast_ares_impractical,
            &expected.fast_ares_impractical,
        );
    }
    if computed.glance_eff_robust != expected.glance_eff_robust {
        diff(
            "glance_eff_robust",
            &computed.glance_eff_robust,
            &expected.glance_eff_robust,
        );
    }
    if computed.glance_cost_robust != expected.glance_cost_robust {
        diff(
            "glance_cost_robust",
            &computed.glance_cost_robust,
            &expected.glance_cost_robust,
        );
    }
    Ok(FixtureOutcome {
        name: fixture.name,
        computed,
        expected,
        diffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, dataset: &str, model: &str, eff: f64, cost: f64) -> EvalRecord {
        EvalRecord {
            method: method.into(),
            dataset: dataset.into(),
            model: model.into(),
            s: 4,
            eff_mean: eff,
            eff_std: 0.0,
            cost_mean: Some(cost),
            cost_std: Some(0.0),
            size_actual: 4,
            cost_folds_excluded: 0,
            runtime_seconds: None,
        }
    }

    #[test]
    fn compare_builds_matrix_and_tallies() {
        let records = vec![
            rec("a", "d", "m", 100.0, 1.0),
            rec("b", "d", "m", 90.0, 2.0),
            rec("c", "other", "m", 50.0, 1.0),
        ];
        let report = compare(&records).unwrap();
        assert_eq!(report.matrix.len(), 1, "only the shared-key pair compares");
        assert_eq!(report.tallies["a"].dominates, 1);
        assert_eq!(report.tallies["b"].dominated, 1);
        assert_eq!(report.flags.len(), 3);
    }

    #[test]
    fn compare_with_single_record_is_empty() {
        let report = compare(&[rec("a", "d", "m", 100.0, 1.0)]).unwrap();
        assert!(report.matrix.is_empty());
    }

    #[test]
    fn identical_records_yield_no_dominance() {
        let records = vec![rec("a", "d", "m", 90.0, 2.0), rec("b", "d", "m", 90.0, 2.0)];
        let report = compare(&records).unwrap();
        assert_eq!(report.tallies["a"].dominates, 0);
        assert_eq!(report.tallies["b"].dominates, 0);
    }

    #[test]
    fn duplicate_method_in_group_is_an_error() {
        let records = vec![rec("a", "d", "m", 90.0, 2.0), rec("a", "d", "m", 80.0, 2.0)];
        assert!(matches!(compare(&records), Err(Error::Incomparable(_))));
    }

    #[test]
    fn costless_records_are_skipped_not_fatal() {
        let mut timeout = rec("t", "d", "m", 90.0, 0.0);
        timeout.cost_mean = None;
        timeout.cost_std = None;
        let records = vec![rec("a", "d", "m", 100.0, 1.0), timeout];
        let report = compare(&records).unwrap();
        assert!(report.matrix.is_empty());
        assert_eq!(report.skipped_pairs, 1);
    }

    #[test]
    fn bundled_fixture_replays_cleanly() {
        let outcome = replay_fixture("table1-s4").unwrap();
        assert_eq!(outcome.diffs, Vec::<String>::new());
        assert_eq!(outcome.computed.glance_comparisons, 72);
        assert_eq!(outcome.computed.glance_dominates, 41);
        assert_eq!(outcome.computed.glance_dominated, 1);
        assert_eq!(outcome.computed.glance_dominated_by.len(), 1);
        let by = &outcome.computed.glance_dominated_by[0];
        assert_eq!(
            (by.method.as_str(), by.dataset.as_str(), by.model.as_str()),
            ("dglobe_ce", "heloc", "dnn")
        );
        assert_eq!(outcome.computed.fast_ares_impractical, 15);
        assert_eq!(outcome.computed.glance_eff_robust, 15);
        assert_eq!(outcome.computed.glance_cost_robust, 14);
    }

    #[test]
    fn unknown_or_empty_fixture_names_error() {
        assert!(matches!(load_fixture(""), Err(Error::Fixture(_))));
        assert!(matches!(load_fixture("nope"), Err(Error::Fixture(_))));
    }
}

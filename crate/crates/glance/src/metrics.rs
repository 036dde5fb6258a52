//! Evaluation machinery: per-instance recourse cost, effectiveness, average
//! recourse cost, Pareto dominance on aggregated records, practicality and
//! robustness flags, effectiveness-cost curves, and fold aggregation.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::classifier::Classifier;
use crate::tabular::{Instance, Schema};
use crate::{Error, Result};

/// Aggregated evaluation of one method on one dataset/model pair.
/// Effectiveness fields are percentages in [0, 100]; cost fields are in
/// normalized cost units and absent when no fold produced a covered instance.
/// `runtime_seconds` is informational and excluded from deterministic output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub method: String,
    pub dataset: String,
    pub model: String,
    pub s: usize,
    pub eff_mean: f64,
    pub eff_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_std: Option<f64>,
    pub size_actual: usize,
    /// Folds with zero coverage, excluded from the cost statistics.
    #[serde(default)]
    pub cost_folds_excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.eff_mean) {
            return Err(Error::Config(format!(
                "eff_mean {} outside [0, 100]",
                self.eff_mean
            )));
        }
        if self.eff_std < 0.0 || self.cost_std.is_some_and(|s| s < 0.0) {
            return Err(Error::Config("standard deviations must be >= 0".into()));
        }
        if self.cost_mean.is_some_and(|c| c < 0.0) {
            return Err(Error::Config("cost_mean must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cost_threshold: f64,
    pub covered_fraction: f64,
}

/// Per-fold outcome before aggregation. `effectiveness` is a fraction in
/// [0, 1]; `average_cost` is absent when the fold covered nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub effectiveness: f64,
    pub average_cost: Option<f64>,
    pub size: usize,
    pub runtime_seconds: Option<f64>,
}

/// Minimum cost over the actions that flip `x` to +1; `None` when no action
/// in the set flips it.
pub fn recourse_cost(
    actions: &[Action],
    x: &Instance,
    model: &dyn Classifier,
    schema: &Schema,
) -> Option<f64> {
    let mut best: Option<f64> = None;
    for a in actions {
        let flipped = a.apply(x, schema);
        if model.predict_encoded(&schema.encode_unchecked(&flipped)) == 1 {
            let c = a.cost(x, schema);
            best = Some(match best {
                Some(b) if b <= c => b,
                _ => c,
            });
        }
    }
    best
}

fn recourse_costs(
    actions: &[Action],
    xa: &[Instance],
    model: &dyn Classifier,
    schema: &Schema,
) -> Result<Vec<Option<f64>>> {
    if xa.is_empty() {
        return Err(Error::EmptyInput("affected set is empty".into()));
    }
    Ok(xa
        .iter()
        .map(|x| recourse_cost(actions, x, model, schema))
        .collect())
}

/// Fraction of the affected instances flipped by at least one action.
pub fn effectiveness(
    actions: &[Action],
    xa: &[Instance],
    model: &dyn Classifier,
    schema: &Schema,
) -> Result<f64> {
    let rcs = recourse_costs(actions, xa, model, schema)?;
    Ok(rcs.iter().filter(|c| c.is_some()).count() as f64 / xa.len() as f64)
}

/// Mean recourse cost over the covered instances only; `None` at zero
/// coverage.
pub fn average_cost(
    actions: &[Action],
    xa: &[Instance],
    model: &dyn Classifier,
    schema: &Schema,
) -> Result<Option<f64>> {
    let rcs = recourse_costs(actions, xa, model, schema)?;
    let covered: Vec<f64> = rcs.into_iter().flatten().collect();
    if covered.is_empty() {
        Ok(None)
    } else {
        Ok(Some(covered.iter().sum::<f64>() / covered.len() as f64))
    }
}

/// Effectiveness and average cost in one pass over the affected set.
pub fn evaluate_actions(
    actions: &[Action],
    xa: &[Instance],
    model: &dyn Classifier,
    schema: &Schema,
) -> Result<(f64, Option<f64>)> {
    let rcs = recourse_costs(actions, xa, model, schema)?;
    let covered: Vec<f64> = rcs.into_iter().flatten().collect();
    let eff = covered.len() as f64 / xa.len() as f64;
    let avg = if covered.is_empty() {
        None
    } else {
        Some(covered.iter().sum::<f64>() / covered.len() as f64)
    };
    Ok((eff, avg))
}

/// Whether `r1` dominates `r2` on the (effectiveness, cost) means: at least
/// as good on both and strictly better on one. Records must describe the
/// same dataset, model, and solution size, and both must carry a cost.
pub fn pareto_dominates(r1: &EvalRecord, r2: &EvalRecord) -> Result<bool> {
    if r1.dataset != r2.dataset || r1.model != r2.model || r1.s != r2.s {
        return Err(Error::Incomparable(format!(
            "({}, {}, s={}) vs ({}, {}, s={})",
            r1.dataset, r1.model, r1.s, r2.dataset, r2.model, r2.s
        )));
    }
    let (c1, c2) = match (r1.cost_mean, r2.cost_mean) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Incomparable(
                "cost mean absent on at least one record".into(),
            ))
        }
    };
    let geq = r1.eff_mean >= r2.eff_mean && c1 <= c2;
    let strict = r1.eff_mean > r2.eff_mean || c1 < c2;
    Ok(geq && strict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFlags {
    pub practical: bool,
    pub eff_robust: bool,
    pub cost_robust: bool,
    pub robust: bool,
}

/// Practical: mean effectiveness at least 80%. Robust: effectiveness std at
/// most 5 points and cost std at most half the mean cost. Bounds inclusive.
/// A record without cost statistics is vacuously cost-robust.
pub fn flag_record(r: &EvalRecord) -> RecordFlags {
    let practical = r.eff_mean >= 80.0;
    let eff_robust = r.eff_std <= 5.0;
    let cost_robust = match (r.cost_std, r.cost_mean) {
        (Some(std), Some(mean)) => std <= mean / 2.0,
        _ => true,
    };
    RecordFlags {
        practical,
        eff_robust,
        cost_robust,
        robust: eff_robust && cost_robust,
    }
}

/// Covered fraction of `xa` at each cost threshold of the ascending `grid`.
pub fn effectiveness_cost_curve(
    actions: &[Action],
    xa: &[Instance],
    model: &dyn Classifier,
    schema: &Schema,
    grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("curve grid must be sorted ascending".into()));
    }
    let rcs = recourse_costs(actions, xa, model, schema)?;
    let n = xa.len() as f64;
    Ok(grid
        .iter()
        .map(|&t| CurvePoint {
            cost_threshold: t,
            covered_fraction: rcs
                .iter()
                .filter(|c| c.is_some_and(|c| c <= t))
                .count() as f64
                / n,
        })
        .collect())
}

/// Default curve grid: the distinct recourse costs observed, so the terminal
/// point equals the effectiveness.
pub fn default_curve_grid(
    actions: &[Action],
    xa: &[Instance],
    model: &dyn Classifier,
    schema: &Schema,
) -> Result<Vec<f64>> {
    let mut costs: Vec<f64> = recourse_costs(actions, xa, model, schema)?
        .into_iter()
        .flatten()
        .collect();
    costs.sort_by(f64::total_cmp);
    costs.dedup();
    Ok(costs)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divisor n).
fn pop_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Aggregates per-fold outcomes into an [`EvalRecord`]: effectiveness in
/// percent with population std across folds; zero-coverage folds excluded
/// from the cost statistics and counted; size reported as the largest fold
/// size.
pub fn aggregate_folds(
    method: &str,
    dataset: &str,
    model: &str,
    s: usize,
    folds: &[FoldOutcome],
) -> Result<EvalRecord> {
    if folds.is_empty() {
        return Err(Error::EmptyInput("no folds to aggregate".into()));
    }
    let effs: Vec<f64> = folds.iter().map(|f| f.effectiveness * 100.0).collect();
    let costs: Vec<f64> = folds.iter().filter_map(|f| f.average_cost).collect();
    let runtimes: Vec<f64> = folds.iter().filter_map(|f| f.runtime_seconds).collect();
    let record = EvalRecord {
        method: method.into(),
        dataset: dataset.into(),
        model: model.into(),
        s,
        eff_mean: mean(&effs),
        eff_std: pop_std(&effs),
        cost_mean: (!costs.is_empty()).then(|| mean(&costs)),
        cost_std: (!costs.is_empty()).then(|| pop_std(&costs)),
        size_actual: folds.iter().map(|f| f.size).max().unwrap_or(0),
        cost_folds_excluded: folds.len() - costs.len(),
        runtime_seconds: (!runtimes.is_empty()).then(|| mean(&runtimes)),
    };
    record.validate()?;
    Ok(record)
}

//! The two-phase engine: cluster the affected instances, generate candidate
//! actions per centroid, agglomeratively merge clusters jointly in feature
//! and action space, and select one action per surviving cluster.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::classifier::Classifier;
use crate::clustering::{self, ClusterState};
use crate::generation::{GeneratorConfig, PreparedGenerator};
use crate::tabular::{Dataset, Instance, Schema};
use crate::{Error, Result};

/// How the final action of each cluster is picked from its candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Highest cluster-local effectiveness, ties by lower cost.
    MaxEffectiveness,
    /// Cheapest among the actions flipping at least one member.
    MinCost,
    /// Cheapest among actions with effectiveness at least the threshold;
    /// falls back to MaxEffectiveness when none qualifies.
    MinCostAboveEff(f64),
    /// Most effective among actions with mean cost at most the budget;
    /// falls back to MaxEffectiveness when none qualifies.
    MaxEffBelowCost(f64),
}

impl SelectionStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionStrategy::MinCostAboveEff(t) if !(0.0..=1.0).contains(&t) => Err(
                Error::Config(format!("effectiveness threshold {t} outside [0, 1]")),
            ),
            SelectionStrategy::MaxEffBelowCost(b) if b < 0.0 => {
                Err(Error::Config(format!("cost budget {b} must be >= 0")))
            }
            _ => Ok(()),
        }
    }
}

/// Population used to score candidates at selection time. The default scores
/// each candidate on its own cluster's members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    #[default]
    Cluster,
    Global,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlanceConfig {
    /// Final number of actions (and of merged clusters).
    pub s: usize,
    /// Initial cluster count.
    pub k: usize,
    pub generator: GeneratorConfig,
    pub selection: SelectionStrategy,
    #[serde(default)]
    pub selection_scope: SelectionScope,
    pub seed: u64,
}

impl GlanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s < 1 || self.s > self.k {
            return Err(Error::Config(format!(
                "need 1 <= s <= k, got s={} k={}",
                self.s, self.k
            )));
        }
        self.selection.validate()?;
        self.generator.validate()
    }
}

/// Where a selected action came from and how it scored on the selection
/// population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDiagnostics {
    pub source_cluster: usize,
    pub cluster_size: usize,
    pub local_effectiveness: f64,
    /// Mean recourse cost over the members the action flips; absent when it
    /// flips none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_cost: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GceSolution {
    pub actions: Vec<Action>,
    pub diagnostics: Vec<ActionDiagnostics>,
    pub warnings: Vec<String>,
}

/// Merges the pair of clusters minimizing centroid distance plus mean-action
/// distance until `s` clusters remain. Ties resolve to the lexicographically
/// smallest (id, id) pair. The empty-candidate-set penalty is recomputed
/// each round from the surviving clusters.
pub fn agglomerate(mut clusters: Vec<ClusterState>, s: usize, schema: &Schema) -> Vec<ClusterState> {
    while clusters.len() > s {
        let penalty = clustering::empty_set_penalty(&clusters, schema);
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let d = clustering::d1(&clusters[i], &clusters[j], schema)
                    + clustering::d2_or_penalty(&clusters[i], &clusters[j], schema, penalty);
                let ids = (
                    clusters[i].id.min(clusters[j].id),
                    clusters[i].id.max(clusters[j].id),
                );
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        let bids = (
                            clusters[bi].id.min(clusters[bj].id),
                            clusters[bi].id.max(clusters[bj].id),
                        );
                        d < bd || (d == bd && ids < bids)
                    }
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let (_, i, j) = best.expect("at least two clusters");
        let merged = clustering::merge(&clusters[i], &clusters[j], schema);
        clusters.swap_remove(j);
        clusters[i] = merged;
    }
    clusters.sort_by_key(|c| c.id);
    clusters
}

/// Candidate scored against a selection population.
#[derive(Debug, Clone)]
struct ScoredCandidate {
    action: Action,
    effectiveness: f64,
    cost: Option<f64>,
    key: String,
}

fn score_candidates(
    candidates: &[Action],
    population: &[Instance],
    model: &dyn Classifier,
    schema: &Schema,
) -> Vec<ScoredCandidate> {
    candidates
        .iter()
        .map(|a| {
            let mut flipped = 0usize;
            let mut total = 0.0;
            for x in population {
                let cf = a.apply(x, schema);
                if model.predict_encoded(&schema.encode_unchecked(&cf)) == 1 {
                    flipped += 1;
                    total += a.cost(x, schema);
                }
            }
            ScoredCandidate {
                action: a.clone(),
                effectiveness: flipped as f64 / population.len().max(1) as f64,
                cost: (flipped > 0).then(|| total / flipped as f64),
                key: a.canonical_key(),
            }
        })
        .collect()
}

fn cost_or_inf(c: Option<f64>) -> f64 {
    c.unwrap_or(f64::INFINITY)
}

fn pick_max_effectiveness(scored: &[ScoredCandidate]) -> Option<&ScoredCandidate> {
    scored.iter().min_by(|a, b| {
        b.effectiveness
            .total_cmp(&a.effectiveness)
            .then(cost_or_inf(a.cost).total_cmp(&cost_or_inf(b.cost)))
            .then_with(|| a.key.cmp(&b.key))
    })
}

fn pick_min_cost<'a>(
    scored: impl Iterator<Item = &'a ScoredCandidate>,
) -> Option<&'a ScoredCandidate> {
    scored
        .filter(|c| c.effectiveness > 0.0)
        .min_by(|a, b| {
            cost_or_inf(a.cost)
                .total_cmp(&cost_or_inf(b.cost))
                .then(b.effectiveness.total_cmp(&a.effectiveness))
                .then_with(|| a.key.cmp(&b.key))
        })
}

fn select_scored(
    scored: &[ScoredCandidate],
    strategy: SelectionStrategy,
) -> Option<&ScoredCandidate> {
    if scored.is_empty() {
        return None;
    }
    match strategy {
        SelectionStrategy::MaxEffectiveness => pick_max_effectiveness(scored),
        SelectionStrategy::MinCost => {
            pick_min_cost(scored.iter()).or_else(|| pick_max_effectiveness(scored))
        }
        SelectionStrategy::MinCostAboveEff(t) => {
            pick_min_cost(scored.iter().filter(|c| c.effectiveness >= t))
                .or_else(|| pick_max_effectiveness(scored))
        }
        SelectionStrategy::MaxEffBelowCost(b) => scored
            .iter()
            .filter(|c| c.cost.is_some_and(|c| c <= b))
            .min_by(|a, b| {
                b.effectiveness
                    .total_cmp(&a.effectiveness)
                    .then(cost_or_inf(a.cost).total_cmp(&cost_or_inf(b.cost)))
                    .then_with(|| a.key.cmp(&b.key))
            })
            .or_else(|| pick_max_effectiveness(scored)),
    }
}

/// Picks one action from a cluster's candidate set, scored on the cluster's
/// own members. `None` when the candidate set is empty.
pub fn select_final(
    cluster: &ClusterState,
    strategy: SelectionStrategy,
    model: &dyn Classifier,
    schema: &Schema,
) -> Option<(Action, ActionDiagnostics)> {
    let scored = score_candidates(&cluster.candidate_actions, &cluster.members, model, schema);
    select_scored(&scored, strategy).map(|c| {
        (
            c.action.clone(),
            ActionDiagnostics {
                source_cluster: cluster.id,
                cluster_size: cluster.members.len(),
                local_effectiveness: c.effectiveness,
                local_cost: c.cost,
            },
        )
    })
}

/// Runs the full procedure over the affected instances `xa`. Candidate
/// generation draws from the training data through the configured generator;
/// each cluster's generation seed is derived from the generator seed and the
/// cluster id, so results do not depend on iteration order.
pub fn glance(
    xa: &[Instance],
    model: &dyn Classifier,
    train: &Dataset,
    cfg: &GlanceConfig,
) -> Result<GceSolution> {
    cfg.validate()?;
    if xa.is_empty() {
        return Err(Error::EmptyInput("affected set is empty".into()));
    }
    let schema = &train.schema;
    for x in xa {
        if model.predict_encoded(&schema.encode_unchecked(x)) != -1 {
            return Err(Error::Config(
                "affected set contains a positively predicted instance".into(),
            ));
        }
    }

    let mut clusters = clustering::kmeans(xa, cfg.k, schema, cfg.seed);
    let prepared = PreparedGenerator::prepare(model, train, cfg.generator.clone())?;
    let mut warnings = Vec::new();
    for cluster in &mut clusters {
        let seed = cfg.generator.seed ^ (cluster.id as u64);
        cluster.candidate_actions = prepared.generate(&cluster.centroid, seed)?;
        if cluster.candidate_actions.is_empty() {
            warnings.push(format!(
                "cluster {}: generator produced no valid candidate",
                cluster.id
            ));
        }
    }

    let merged = agglomerate(clusters, cfg.s, schema);

    let mut actions = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen_keys = std::collections::BTreeSet::new();
    for cluster in &merged {
        let picked = match cfg.selection_scope {
            SelectionScope::Cluster => select_final(cluster, cfg.selection, model, schema),
            SelectionScope::Global => {
                let scored = score_candidates(&cluster.candidate_actions, xa, model, schema);
                select_scored(&scored, cfg.selection).map(|c| {
                    (
                        c.action.clone(),
                        ActionDiagnostics {
                            source_cluster: cluster.id,
                            cluster_size: cluster.members.len(),
                            local_effectiveness: c.effectiveness,
                            local_cost: c.cost,
                        },
                    )
                })
            }
        };
        match picked {
            None => warnings.push(format!(
                "cluster {}: no candidate to select from",
                cluster.id
            )),
            Some((action, diag)) => {
                if seen_keys.insert(action.canonical_key()) {
                    actions.push(action);
                    diagnostics.push(diag);
                } else {
                    warnings.push(format!(
                        "cluster {}: selected action duplicates an earlier cluster's",
                        cluster.id
                    ));
                }
            }
        }
    }
    debug_assert!(actions.len() <= cfg.s);
    Ok(GceSolution {
        actions,
        diagnostics,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Change;
    use crate::classifier::{LogisticModel, TrainingMeta};
    use crate::generation::GeneratorKind;
    use crate::metrics;
    use crate::tabular::{FeatureKind, FeatureSchema, Value};

    fn schema2() -> Schema {
        Schema::new(vec![
            FeatureSchema {
                name: "x1".into(),
                kind: FeatureKind::Numeric {
                    observed_min: 0.0,
                    observed_max: 10.0,
                    bin_width: 1.0,
                },
            },
            FeatureSchema {
                name: "x2".into(),
                kind: FeatureKind::Numeric {
                    observed_min: 0.0,
                    observed_max: 10.0,
                    bin_width: 1.0,
                },
            },
        ])
        .unwrap()
    }

    fn point(a: f64, b: f64) -> Instance {
        Instance::new(vec![Value::Num(a), Value::Num(b)])
    }

    fn delta(feature: &str, d: f64) -> Action {
        let mut a = Action::new();
        a.set(feature.to_string(), Change::NumericDelta(d));
        a
    }

    /// sign(x1 - 5)
    fn x1_model() -> LogisticModel {
        LogisticModel {
            weights: vec![1.0, 0.0],
            bias: -5.0,
            meta: TrainingMeta {
                learning_rate: 0.0,
                iterations: 0,
                seed: 0,
                train_accuracy: 0.0,
            },
        }
    }

    fn base_cfg(s: usize, k: usize) -> GlanceConfig {
        GlanceConfig {
            s,
            k,
            generator: GeneratorConfig {
                kind: GeneratorKind::NearestNeighbors,
                m: 5,
                k_f: 2,
                k_c: 10,
                line_samples: 20,
                seed: 13,
            },
            selection: SelectionStrategy::MaxEffectiveness,
            selection_scope: SelectionScope::Cluster,
            seed: 13,
        }
    }

    fn train_data() -> Dataset {
        let schema = schema2();
        let rows = vec![
            point(1.0, 1.0),
            point(2.0, 8.0),
            point(3.0, 4.0),
            point(7.0, 2.0),
            point(8.0, 9.0),
            point(9.0, 5.0),
        ];
        Dataset::from_parts(schema, rows, vec![-1, -1, -1, 1, 1, 1]).unwrap()
    }

    #[test]
    fn config_bounds_are_enforced() {
        let mut cfg = base_cfg(3, 2);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))), "s > k");
        cfg.s = 0;
        assert!(cfg.validate().is_err());
        cfg.s = 2;
        assert!(cfg.validate().is_ok());
        cfg.selection = SelectionStrategy::MinCostAboveEff(1.5);
        assert!(cfg.validate().is_err());
        cfg.selection = SelectionStrategy::MaxEffBelowCost(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_dominating_candidate_is_selected() {
        let train = train_data();
        let model = x1_model();
        let xa = vec![point(1.0, 1.0), point(2.0, 8.0)];
        let solution = glance(&xa, &model, &train, &base_cfg(1, 2)).unwrap();
        assert_eq!(solution.actions.len(), 1);
        let eff = metrics::effectiveness(&solution.actions, &xa, &model, &train.schema).unwrap();
        assert_eq!(eff, 1.0);
    }

    #[test]
    fn rerun_with_same_seed_is_identical() {
        let train = train_data();
        let model = x1_model();
        let xa = vec![point(1.0, 1.0), point(2.0, 8.0), point(3.0, 4.0)];
        let mut cfg = base_cfg(2, 3);
        cfg.generator.kind = GeneratorKind::RandomSampling;
        let a = glance(&xa, &model, &train, &cfg).unwrap();
        let b = glance(&xa, &model, &train, &cfg).unwrap();
        assert_eq!(a.actions, b.actions);
    }

    #[test]
    fn rejects_positively_predicted_affected_instance() {
        let train = train_data();
        let model = x1_model();
        let xa = vec![point(9.0, 1.0)];
        assert!(matches!(
            glance(&xa, &model, &train, &base_cfg(1, 1)),
            Err(Error::Config(_))
        ));
    }

    fn scored_cluster() -> (ClusterState, Schema) {
        // 49 members at x1=0 plus one at x1=-1.3 under sign(x1 - 5):
        // +6 flips 49/50 at cost 6; +6.5 flips all at cost 6.5
        let schema = schema2();
        let mut members: Vec<Instance> = (0..49).map(|_| point(0.0, 0.0)).collect();
        members.push(point(-1.3, 0.0));
        let centroid = clustering::centroid(&members, &schema);
        (
            ClusterState {
                id: 0,
                members,
                centroid,
                candidate_actions: vec![delta("x1", 6.0), delta("x1", 6.5)],
            },
            schema,
        )
    }

    #[test]
    fn max_effectiveness_prefers_full_coverage_over_cheaper() {
        let (cluster, schema) = scored_cluster();
        let model = x1_model();
        let (action, diag) =
            select_final(&cluster, SelectionStrategy::MaxEffectiveness, &model, &schema).unwrap();
        assert_eq!(action, delta("x1", 6.5));
        assert_eq!(diag.local_effectiveness, 1.0);
        assert_eq!(diag.local_cost, Some(6.5));
    }

    #[test]
    fn min_cost_above_threshold_takes_the_cheaper_qualifier() {
        let (cluster, schema) = scored_cluster();
        let model = x1_model();
        let (action, diag) = select_final(
            &cluster,
            SelectionStrategy::MinCostAboveEff(0.95),
            &model,
            &schema,
        )
        .unwrap();
        assert_eq!(action, delta("x1", 6.0));
        assert_eq!(diag.local_effectiveness, 0.98);
    }

    #[test]
    fn threshold_strategies_fall_back_to_max_effectiveness() {
        let (cluster, schema) = scored_cluster();
        let model = x1_model();
        let strict = select_final(
            &cluster,
            SelectionStrategy::MinCostAboveEff(1.0),
            &model,
            &schema,
        )
        .unwrap();
        assert_eq!(strict.0, delta("x1", 6.5), "only the full-coverage action qualifies");
        let impossible = select_final(
            &cluster,
            SelectionStrategy::MaxEffBelowCost(0.1),
            &model,
            &schema,
        )
        .unwrap();
        assert_eq!(impossible.0, delta("x1", 6.5), "fallback when no action fits the budget");
    }

    #[test]
    fn min_cost_ignores_zero_effectiveness_actions() {
        let (mut cluster, schema) = scored_cluster();
        cluster.candidate_actions.insert(0, delta("x1", 0.5)); // flips nobody, cheapest
        let model = x1_model();
        let (action, _) =
            select_final(&cluster, SelectionStrategy::MinCost, &model, &schema).unwrap();
        assert_eq!(action, delta("x1", 6.0));
    }

    #[test]
    fn empty_candidate_set_selects_nothing() {
        let (mut cluster, schema) = scored_cluster();
        cluster.candidate_actions.clear();
        let model = x1_model();
        assert!(select_final(&cluster, SelectionStrategy::MaxEffectiveness, &model, &schema)
            .is_none());
    }

    #[test]
    fn agglomerate_reaches_exactly_s_clusters_and_unions_candidates() {
        let schema = schema2();
        let mk = |id: usize, x: f64, a: Action| ClusterState {
            id,
            members: vec![point(x, 0.0)],
            centroid: point(x, 0.0),
            candidate_actions: vec![a],
        };
        let clusters = vec![
            mk(0, 0.0, delta("x1", 1.0)),
            mk(1, 0.2, delta("x1", 1.0)),
            mk(2, 9.0, delta("x1", 2.0)),
            mk(3, 9.3, delta("x1", 3.0)),
        ];
        let merged = agglomerate(clusters, 2, &schema);
        assert_eq!(merged.len(), 2);
        // nearby clusters merged together; members preserved
        let total: usize = merged.iter().map(|c| c.members.len()).sum();
        assert_eq!(total, 4);
        let low = merged.iter().find(|c| c.members.len() == 2 && c.id == 0).unwrap();
        assert_eq!(low.candidate_actions.len(), 1, "identical candidates dedup");
        let high = merged.iter().find(|c| c.id == 2).unwrap();
        assert_eq!(high.candidate_actions.len(), 2);
    }

    #[test]
    fn duplicate_selections_are_deduplicated_with_warning() {
        let train = train_data();
        let model = x1_model();
        // two far-apart affected points with the same sole nearest positive
        let xa = vec![point(1.0, 1.0), point(3.0, 4.0)];
        let mut cfg = base_cfg(2, 2);
        cfg.generator.m = 1;
        let solution = glance(&xa, &model, &train, &cfg).unwrap();
        assert!(solution.actions.len() <= 2);
        let keys: std::collections::BTreeSet<String> = solution
            .actions
            .iter()
            .map(Action::canonical_key)
            .collect();
        assert_eq!(keys.len(), solution.actions.len(), "no duplicate actions");
    }

    #[test]
    fn solution_never_beats_exhaustive_over_same_pool() {
        use crate::oracle;
        use std::sync::Arc;
        let train = train_data();
        let model = x1_model();
        let xa = vec![point(1.0, 1.0), point(2.0, 8.0), point(3.0, 4.0)];
        let cfg = base_cfg(2, 3);
        let solution = glance(&xa, &model, &train, &cfg).unwrap();
        let eff =
            metrics::effectiveness(&solution.actions, &xa, &model, &train.schema).unwrap();
        // pool = union of everything any cluster could have generated
        let prepared =
            PreparedGenerator::prepare(&model, &train, cfg.generator.clone()).unwrap();
        let mut pool = Vec::new();
        for x in &xa {
            pool.extend(prepared.generate(x, cfg.generator.seed).unwrap());
        }
        let pool = crate::action::dedup_actions(pool);
        let inst = oracle::ExplicitInstance::new(
            train.schema.clone(),
            xa.clone(),
            pool,
            Arc::new(x1_model()),
            cfg.s,
        )
        .unwrap();
        let (_, opt, _) = oracle::exhaustive_best(&inst).unwrap();
        assert!(eff <= opt + 1e-12);
    }
}

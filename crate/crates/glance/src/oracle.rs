//! Reference solvers for the explicit-pool special case: exact subset
//! enumeration (budget-guarded), greedy maximum coverage, and a reduction
//! from maximum coverage instances to explicit pools with a lookup
//! classifier. Used to validate the main engine on small instances.

use std::collections::BTreeSet;
use std::sync::Arc;

use itertools::Itertools;

use crate::action::{Action, Change};
use crate::classifier::Classifier;
use crate::tabular::{FeatureKind, FeatureSchema, Instance, Schema, Value};
use crate::{Error, Result};

/// Exact enumeration guard: subsets considered, summed over sizes 0..=s.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// A solvable instance where the allowable actions are given explicitly.
pub struct ExplicitInstance {
    pub schema: Schema,
    pub xa: Vec<Instance>,
    pub pool: Vec<Action>,
    pub model: Arc<dyn Classifier>,
    pub s: usize,
}

impl ExplicitInstance {
    pub fn new(
        schema: Schema,
        xa: Vec<Instance>,
        pool: Vec<Action>,
        model: Arc<dyn Classifier>,
        s: usize,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::EmptyInput("explicit pool is empty".into()));
        }
        if xa.is_empty() {
            return Err(Error::EmptyInput("affected set is empty".into()));
        }
        if s < 1 {
            return Err(Error::Config("s must be >= 1".into()));
        }
        Ok(ExplicitInstance {
            schema,
            xa,
            pool,
            model,
            s,
        })
    }

    /// coverage[i][j]: action i flips instance j; cost[i][j]: its cost.
    fn flip_matrix(&self) -> (Vec<Vec<bool>>, Vec<Vec<f64>>) {
        let mut coverage = Vec::with_capacity(self.pool.len());
        let mut costs = Vec::with_capacity(self.pool.len());
        for a in &self.pool {
            let mut cov = Vec::with_capacity(self.xa.len());
            let mut cst = Vec::with_capacity(self.xa.len());
            for x in &self.xa {
                let flipped = a.apply(x, &self.schema);
                cov.push(
                    self.model
                        .predict_encoded(&self.schema.encode_unchecked(&flipped))
                        == 1,
                );
                cst.push(a.cost(x, &self.schema));
            }
            coverage.push(cov);
            costs.push(cst);
        }
        (coverage, costs)
    }

    fn subset_count(&self) -> u128 {
        let n = self.pool.len() as u128;
        let s = self.s.min(self.pool.len()) as u128;
        let mut total: u128 = 0;
        let mut c: u128 = 1; // C(n, 0)
        for i in 0..=s {
            total = total.saturating_add(c);
            c = c.saturating_mul(n - i) / (i + 1);
        }
        total
    }
}

fn subset_metrics(subset: &[usize], coverage: &[Vec<bool>], costs: &[Vec<f64>]) -> (f64, Option<f64>) {
    let n = coverage.first().map_or(0, Vec::len);
    let mut covered = 0usize;
    let mut total = 0.0;
    for j in 0..n {
        let mut best: Option<f64> = None;
        for &i in subset {
            if coverage[i][j] {
                let c = costs[i][j];
                best = Some(match best {
                    Some(b) if b <= c => b,
                    _ => c,
                });
            }
        }
        if let Some(c) = best {
            covered += 1;
            total += c;
        }
    }
    let eff = covered as f64 / n as f64;
    let avg = (covered > 0).then(|| total / covered as f64);
    (eff, avg)
}

/// Enumerates every subset of size at most `s` and returns the first subset
/// (sizes ascending, lexicographic within a size) maximizing effectiveness,
/// ties broken by minimal average cost.
pub fn exhaustive_best(inst: &ExplicitInstance) -> Result<(Vec<Action>, f64, Option<f64>)> {
    let count = inst.subset_count();
    if count > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded(count));
    }
    let (coverage, costs) = inst.flip_matrix();
    let mut best: (Vec<usize>, f64, Option<f64>) = (Vec::new(), 0.0, None);
    for size in 1..=inst.s.min(inst.pool.len()) {
        for subset in (0..inst.pool.len()).combinations(size) {
            let (eff, avg) = subset_metrics(&subset, &coverage, &costs);
            let better = eff > best.1
                || (eff == best.1
                    && match (avg, best.2) {
                        (Some(a), Some(b)) => a < b,
                        (Some(_), None) => eff > 0.0,
                        _ => false,
                    });
            if better {
                best = (subset, eff, avg);
            }
        }
    }
    let actions = best.0.iter().map(|&i| inst.pool[i].clone()).collect();
    Ok((actions, best.1, best.2))
}

/// All subsets non-dominated on (effectiveness up, average cost down),
/// deduplicated by metric pair, first-found representative per pair.
pub fn exhaustive_pareto_front(
    inst: &ExplicitInstance,
) -> Result<Vec<(Vec<Action>, f64, f64)>> {
    let count = inst.subset_count();
    if count > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded(count));
    }
    let (coverage, costs) = inst.flip_matrix();
    let mut candidates: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    for size in 1..=inst.s.min(inst.pool.len()) {
        for subset in (0..inst.pool.len()).combinations(size) {
            let (eff, avg) = subset_metrics(&subset, &coverage, &costs);
            if let Some(avg) = avg {
                if !candidates
                    .iter()
                    .any(|&(_, e, c)| e == eff && c == avg)
                {
                    candidates.push((subset, eff, avg));
                }
            }
        }
    }
    let front: Vec<(Vec<Action>, f64, f64)> = candidates
        .iter()
        .filter(|&&(_, e1, c1)| {
            !candidates
                .iter()
                .any(|&(_, e2, c2)| e2 >= e1 && c2 <= c1 && (e2 > e1 || c2 < c1))
        })
        .map(|(subset, e, c)| {
            (
                subset.iter().map(|&i| inst.pool[i].clone()).collect(),
                *e,
                *c,
            )
        })
        .collect();
    Ok(front)
}

/// Greedy maximum coverage: up to `s` rounds picking the action flipping the
/// most uncovered instances; ties by lower mean cost over the newly covered,
/// then by canonical action order. Stops when no action adds coverage.
pub fn greedy_cover(inst: &ExplicitInstance) -> (Vec<Action>, f64) {
    let (coverage, costs) = inst.flip_matrix();
    let n = inst.xa.len();
    let mut covered = vec![false; n];
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..inst.s {
        let mut best: Option<(usize, usize, f64, String)> = None; // (gain, idx, mean cost, key)
        for i in 0..inst.pool.len() {
            if chosen.contains(&i) {
                continue;
            }
            let newly: Vec<usize> = (0..n)
                .filter(|&j| !covered[j] && coverage[i][j])
                .collect();
            if newly.is_empty() {
                continue;
            }
            let mean_cost =
                newly.iter().map(|&j| costs[i][j]).sum::<f64>() / newly.len() as f64;
            let key = inst.pool[i].canonical_key();
            let better = match &best {
                None => true,
                Some((g, _, c, k)) => {
                    newly.len() > *g
                        || (newly.len() == *g
                            && (mean_cost < *c || (mean_cost == *c && key < *k)))
                }
            };
            if better {
                best = Some((newly.len(), i, mean_cost, key));
            }
        }
        match best {
            None => break,
            Some((_, i, _, _)) => {
                for j in 0..n {
                    if coverage[i][j] {
                        covered[j] = true;
                    }
                }
                chosen.push(i);
            }
        }
    }
    let eff = covered.iter().filter(|&&c| c).count() as f64 / n as f64;
    (chosen.into_iter().map(|i| inst.pool[i].clone()).collect(), eff)
}

/// Classifier over the reduction schema: +1 exactly when the "act" feature
/// names a set containing the instance's element.
pub struct LookupClassifier {
    n_elements: usize,
    /// memberships[i][j]: set i contains element j.
    memberships: Vec<Vec<bool>>,
}

impl Classifier for LookupClassifier {
    fn predict_encoded(&self, z: &[f64]) -> i8 {
        // encoding layout: one-hot element block, then one-hot act block
        // with label 0 = "none"
        let element = z[..self.n_elements]
            .iter()
            .position(|&v| v == 1.0)
            .expect("one-hot element block");
        let act = z[self.n_elements..]
            .iter()
            .position(|&v| v == 1.0)
            .expect("one-hot act block");
        if act == 0 {
            return -1;
        }
        if self.memberships[act - 1][element] {
            1
        } else {
            -1
        }
    }

    fn descriptor(&self) -> String {
        format!(
            "lookup({} elements, {} sets)",
            self.n_elements,
            self.memberships.len()
        )
    }
}

/// Builds the explicit instance equivalent to a maximum coverage problem:
/// one affected instance per universe element, one action per set, and a
/// lookup classifier realizing the membership relation. Effectiveness of any
/// subset of actions equals the covered fraction of the universe.
pub fn max_cover_reduction(
    universe: &[u64],
    family: &[BTreeSet<u64>],
    s: usize,
) -> Result<ExplicitInstance> {
    if family.is_empty() {
        return Err(Error::EmptyInput("set family is empty".into()));
    }
    if universe.is_empty() {
        return Err(Error::EmptyInput("universe is empty".into()));
    }
    {
        let distinct: BTreeSet<u64> = universe.iter().copied().collect();
        if distinct.len() != universe.len() {
            return Err(Error::Config("universe elements must be distinct".into()));
        }
        for (i, set) in family.iter().enumerate() {
            if let Some(e) = set.iter().find(|e| !distinct.contains(e)) {
                return Err(Error::Config(format!(
                    "set {i} references unknown element {e}"
                )));
            }
        }
    }
    let element_labels: Vec<String> = universe.iter().map(|e| format!("e{e}")).collect();
    let mut act_labels = vec!["none".to_string()];
    act_labels.extend((0..family.len()).map(|i| format!("a{i}")));
    let schema = Schema::new(vec![
        FeatureSchema {
            name: "element".into(),
            kind: FeatureKind::Categorical {
                labels: element_labels.clone(),
            },
        },
        FeatureSchema {
            name: "act".into(),
            kind: FeatureKind::Categorical { labels: act_labels },
        },
    ])?;
    let xa: Vec<Instance> = element_labels
        .iter()
        .map(|l| Instance::new(vec![Value::Cat(l.clone()), Value::Cat("none".into())]))
        .collect();
    let pool: Vec<Action> = (0..family.len())
        .map(|i| {
            let mut a = Action::new();
            a.set("act".to_string(), Change::CategoricalSet(format!("a{i}")));
            a
        })
        .collect();
    let memberships: Vec<Vec<bool>> = family
        .iter()
        .map(|set| universe.iter().map(|e| set.contains(e)).collect())
        .collect();
    let model = Arc::new(LookupClassifier {
        n_elements: universe.len(),
        memberships,
    });
    ExplicitInstance::new(schema, xa, pool, model, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sets(raw: &[&[u64]]) -> Vec<BTreeSet<u64>> {
        raw.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn reduction_single_full_set_gives_full_coverage() {
        let inst = max_cover_reduction(&[1, 2, 3], &sets(&[&[1, 2, 3]]), 1).unwrap();
        let (actions, eff, avg) = exhaustive_best(&inst).unwrap();
        assert_eq!(actions.len(), 1);
        assert_eq!(eff, 1.0);
        assert_eq!(avg, Some(1.0), "categorical switch costs 1 per instance");
    }

    #[test]
    fn reduction_disjoint_pair_s1_is_half() {
        let inst = max_cover_reduction(&[1, 2, 3, 4], &sets(&[&[1, 2], &[3, 4]]), 1).unwrap();
        let (_, eff, _) = exhaustive_best(&inst).unwrap();
        assert_eq!(eff, 0.5);
    }

    #[test]
    fn exhaustive_solves_max_3_cover() {
        let family = sets(&[&[1, 2], &[3, 4], &[5, 6], &[1, 3, 5]]);
        let inst = max_cover_reduction(&[1, 2, 3, 4, 5, 6], &family, 3).unwrap();
        let (actions, eff, _) = exhaustive_best(&inst).unwrap();
        assert_eq!(eff, 1.0);
        // the only full cover is {a0, a1, a2}
        let keys: Vec<String> = actions.iter().map(Action::canonical_key).collect();
        assert_eq!(keys.len(), 3);
        assert!(!keys.iter().any(|k| k.contains("a3")));
    }

    #[test]
    fn exhaustive_with_s_at_least_pool_considers_whole_pool() {
        let family = sets(&[&[1], &[2], &[3]]);
        let inst = max_cover_reduction(&[1, 2, 3], &family, 5).unwrap();
        let (actions, eff, _) = exhaustive_best(&inst).unwrap();
        assert_eq!(actions.len(), 3);
        assert_eq!(eff, 1.0);
    }

    #[test]
    fn exhaustive_budget_guard_trips() {
        // C(40, 20) is far beyond the budget
        let universe: Vec<u64> = (0..40).collect();
        let family: Vec<BTreeSet<u64>> = universe.iter().map(|&e| BTreeSet::from([e])).collect();
        let inst = max_cover_reduction(&universe, &family, 20).unwrap();
        assert!(matches!(
            exhaustive_best(&inst),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn greedy_picks_dominating_set_first() {
        let family = sets(&[&[1], &[1, 2, 3, 4], &[2]]);
        let inst = max_cover_reduction(&[1, 2, 3, 4], &family, 2).unwrap();
        let (actions, eff) = greedy_cover(&inst);
        assert_eq!(eff, 1.0);
        assert!(actions[0].canonical_key().contains("a1"));
        assert_eq!(actions.len(), 1, "early stop once everything is covered");
    }

    #[test]
    fn greedy_classic_cover_example() {
        // {AB}, {CD}, {ABC}: greedy takes ABC first, then CD
        let family = sets(&[&[1, 2], &[3, 4], &[1, 2, 3]]);
        let inst = max_cover_reduction(&[1, 2, 3, 4], &family, 2).unwrap();
        let (actions, eff) = greedy_cover(&inst);
        assert_eq!(eff, 1.0);
        assert!(actions[0].canonical_key().contains("a2"));
        assert!(actions[1].canonical_key().contains("a1"));
    }

    #[test]
    fn greedy_returns_empty_when_nothing_flips() {
        let inst = max_cover_reduction(&[1, 2], &sets(&[&[]]), 2).unwrap();
        let (actions, eff) = greedy_cover(&inst);
        assert!(actions.is_empty());
        assert_eq!(eff, 0.0);
    }

    #[test]
    fn reduction_effectiveness_equals_union_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let universe: Vec<u64> = (0..8).collect();
            let family: Vec<BTreeSet<u64>> = (0..5)
                .map(|_| {
                    universe
                        .iter()
                        .copied()
                        .filter(|_| rng.gen_bool(0.4))
                        .collect()
                })
                .collect();
            let inst = max_cover_reduction(&universe, &family, 5).unwrap();
            let (coverage, costs) = inst.flip_matrix();
            // every subset of actions covers exactly the union of its sets
            for size in 1..=3usize {
                for subset in (0..family.len()).combinations(size) {
                    let (eff, _) = subset_metrics(&subset, &coverage, &costs);
                    let union: BTreeSet<u64> = subset
                        .iter()
                        .flat_map(|&i| family[i].iter().copied())
                        .collect();
                    assert_eq!(eff, union.len() as f64 / universe.len() as f64);
                }
            }
        }
    }

    #[test]
    fn greedy_within_submodular_bound_of_optimum() {
        let bound = 1.0 - (-1.0f64).exp();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let n = rng.gen_range(4..10);
            let universe: Vec<u64> = (0..n).collect();
            let family: Vec<BTreeSet<u64>> = (0..rng.gen_range(3..7))
                .map(|_| {
                    universe
                        .iter()
                        .copied()
                        .filter(|_| rng.gen_bool(0.35))
                        .collect()
                })
                .collect();
            let s = rng.gen_range(1..4);
            let inst = max_cover_reduction(&universe, &family, s).unwrap();
            let (_, opt, _) = exhaustive_best(&inst).unwrap();
            let (_, greedy) = greedy_cover(&inst);
            assert!(greedy <= opt + 1e-12);
            assert!(greedy >= bound * opt - 1e-12, "{greedy} vs opt {opt}");
        }
    }

    #[test]
    fn pareto_front_is_mutually_nondominated_and_contains_best() {
        let family = sets(&[&[1, 2], &[3, 4], &[5, 6], &[1, 3, 5]]);
        let inst = max_cover_reduction(&[1, 2, 3, 4, 5, 6], &family, 3).unwrap();
        let front = exhaustive_pareto_front(&inst).unwrap();
        assert!(!front.is_empty());
        for (i, &(_, e1, c1)) in front.iter().enumerate() {
            for (j, &(_, e2, c2)) in front.iter().enumerate() {
                if i != j {
                    assert!(!(e2 >= e1 && c2 <= c1 && (e2 > e1 || c2 < c1)));
                }
            }
        }
        let (_, best_eff, _) = exhaustive_best(&inst).unwrap();
        assert!(front.iter().any(|&(_, e, _)| e == best_eff));
    }
}

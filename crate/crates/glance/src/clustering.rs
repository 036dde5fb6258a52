//! Initial partitioning of the affected population and the two distances
//! driving agglomerative merging: feature-space distance between cluster
//! centroids (`d1`) and action-space distance between mean candidate actions
//! (`d2`). L1 throughout, matching the recourse cost geometry.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action::{dedup_actions, mean_action_vector, Action};
use crate::tabular::{FeatureKind, Instance, Schema, Value};

/// A cluster of affected instances plus its candidate-action set.
#[derive(Debug, Clone)]
pub struct ClusterState {
    pub id: usize,
    pub members: Vec<Instance>,
    pub centroid: Instance,
    pub candidate_actions: Vec<Action>,
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Decodable representative of a member set: numeric mean in raw units,
/// categorical mode with ties broken by schema label order.
pub fn centroid(members: &[Instance], schema: &Schema) -> Instance {
    assert!(!members.is_empty(), "centroid of empty member set");
    let mut values = Vec::with_capacity(schema.arity());
    for (fi, f) in schema.features.iter().enumerate() {
        match &f.kind {
            FeatureKind::Numeric { .. } => {
                let sum: f64 = members
                    .iter()
                    .map(|m| m.values[fi].as_num().expect("schema-conforming member"))
                    .sum();
                values.push(Value::Num(sum / members.len() as f64));
            }
            FeatureKind::Categorical { labels } => {
                let mut counts = vec![0usize; labels.len()];
                for m in members {
                    let c = m.values[fi].as_cat().expect("schema-conforming member");
                    let pos = labels.iter().position(|l| l == c).expect("known label");
                    counts[pos] += 1;
                }
                let best = (0..labels.len())
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                    .unwrap();
                values.push(Value::Cat(labels[best].clone()));
            }
        }
    }
    Instance::new(values)
}

/// Lloyd-style clustering in encoded space with L1 assignment and
/// coordinate-median center updates, so the within-cluster L1 objective is
/// non-increasing. Seeded initialization from k distinct points; empty
/// clusters are re-seeded from the point farthest from its center.
pub fn kmeans(points: &[Instance], k: usize, schema: &Schema, seed: u64) -> Vec<ClusterState> {
    assert!(!points.is_empty(), "kmeans on empty input");
    assert!(k >= 1);
    let k = k.min(points.len());
    let encoded: Vec<Vec<f64>> = points.iter().map(|p| schema.encode_unchecked(p)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut rng);
    let mut centers: Vec<Vec<f64>> = order[..k].iter().map(|&i| encoded[i].clone()).collect();

    let mut assignment = vec![0usize; points.len()];
    const MAX_ITERS: usize = 300;
    for _ in 0..MAX_ITERS {
        // assignment step (ties to the lowest center index)
        let mut changed = false;
        for (pi, z) in encoded.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (ci, c) in centers.iter().enumerate() {
                let d = l1(z, c);
                if d < best_d {
                    best_d = d;
                    best = ci;
                }
            }
            if assignment[pi] != best {
                assignment[pi] = best;
                changed = true;
            }
        }

        // re-seed empty clusters from the farthest point
        let mut sizes = vec![0usize; k];
        for &a in &assignment {
            sizes[a] += 1;
        }
        let mut reseeded = false;
        for ci in 0..k {
            if sizes[ci] == 0 {
                let far = (0..points.len())
                    .filter(|&pi| sizes[assignment[pi]] > 1)
                    .max_by(|&a, &b| {
                        l1(&encoded[a], &centers[assignment[a]])
                            .total_cmp(&l1(&encoded[b], &centers[assignment[b]]))
                    });
                if let Some(pi) = far {
                    centers[ci] = encoded[pi].clone();
                    sizes[assignment[pi]] -= 1;
                    assignment[pi] = ci;
                    sizes[ci] = 1;
                    reseeded = true;
                }
            }
        }

        if !changed && !reseeded {
            break;
        }

        // update step: coordinate-wise median minimizes the L1 objective
        for ci in 0..k {
            let member_idx: Vec<usize> = (0..points.len())
                .filter(|&pi| assignment[pi] == ci)
                .collect();
            if member_idx.is_empty() {
                continue;
            }
            let dim = schema.encoded_dim();
            let mut center = vec![0.0; dim];
            let mut column = Vec::with_capacity(member_idx.len());
            for (d, c) in center.iter_mut().enumerate() {
                column.clear();
                column.extend(member_idx.iter().map(|&pi| encoded[pi][d]));
                column.sort_by(|a, b| a.total_cmp(b));
                *c = column[column.len() / 2];
            }
            centers[ci] = center;
        }
    }

    let mut clusters = Vec::new();
    for ci in 0..k {
        let members: Vec<Instance> = (0..points.len())
            .filter(|&pi| assignment[pi] == ci)
            .map(|pi| points[pi].clone())
            .collect();
        if members.is_empty() {
            continue;
        }
        let c = centroid(&members, schema);
        clusters.push(ClusterState {
            id: clusters.len(),
            members,
            centroid: c,
            candidate_actions: Vec::new(),
        });
    }
    clusters
}

/// Within-cluster L1-to-center objective, exposed for the monotonicity check.
pub fn kmeans_objective(points: &[Vec<f64>], centers: &[Vec<f64>], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(z, &a)| l1(z, &centers[a]))
        .sum()
}

/// Feature-space distance: L1 between encoded centroids.
pub fn d1(c1: &ClusterState, c2: &ClusterState, schema: &Schema) -> f64 {
    l1(
        &schema.encode_unchecked(&c1.centroid),
        &schema.encode_unchecked(&c2.centroid),
    )
}

/// Action-space distance: L1 between the mean candidate-action vectors.
/// `None` when either candidate set is empty.
pub fn d2(c1: &ClusterState, c2: &ClusterState, schema: &Schema) -> Option<f64> {
    if c1.candidate_actions.is_empty() || c2.candidate_actions.is_empty() {
        return None;
    }
    let m1 = mean_action_vector(&c1.candidate_actions, schema).expect("nonempty");
    let m2 = mean_action_vector(&c2.candidate_actions, schema).expect("nonempty");
    Some(l1(&m1, &m2))
}

/// `d2` with the empty-set sentinel substituted, so clusters without
/// candidate actions merge last instead of aborting the loop.
pub fn d2_or_penalty(c1: &ClusterState, c2: &ClusterState, schema: &Schema, penalty: f64) -> f64 {
    d2(c1, c2, schema).unwrap_or(penalty)
}

/// Sentinel for empty candidate sets: twice the maximum observed pairwise
/// d1+d2 among pairs where both sets are nonempty.
pub fn empty_set_penalty(clusters: &[ClusterState], schema: &Schema) -> f64 {
    let mut max = 0.0f64;
    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            if let Some(a2) = d2(&clusters[i], &clusters[j], schema) {
                max = max.max(d1(&clusters[i], &clusters[j], schema) + a2);
            }
        }
    }
    if max > 0.0 {
        2.0 * max
    } else {
        1.0
    }
}

/// Merges two clusters: members concatenated, action sets unioned with
/// dedup, centroid recomputed, id = min of the two.
pub fn merge(c1: &ClusterState, c2: &ClusterState, schema: &Schema) -> ClusterState {
    assert_ne!(c1.id, c2.id, "merging a cluster with itself");
    let mut members = c1.members.clone();
    members.extend(c2.members.iter().cloned());
    let mut actions = c1.candidate_actions.clone();
    actions.extend(c2.candidate_actions.iter().cloned());
    let actions = dedup_actions(actions);
    let c = centroid(&members, schema);
    ClusterState {
        id: c1.id.min(c2.id),
        members,
        centroid: c,
        candidate_actions: actions,
    }
}

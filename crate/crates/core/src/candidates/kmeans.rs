//! Weighted k-means over L2-normalized points: mini-batch updates for
//! production use and a full-batch Lloyd mode used as the reference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embeddings::normalized;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansMode {
    MiniBatch,
    FullBatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub batch_size: usize,
    /// Mini-batch steps, or the maximum number of Lloyd passes.
    pub iters: usize,
    pub mode: KMeansMode,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: 100,
            batch_size: 256,
            iters: 100,
            mode: KMeansMode::MiniBatch,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Weighted sum of squared distances to the assigned centroid, recorded
    /// after every assignment pass (full-batch mode) or once at the end.
    pub objective_history: Vec<f64>,
}

impl KMeansResult {
    pub fn objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&0.0)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn sample_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut r = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn kmeans_plus_plus(points: &[Vec<f64>], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[sample_weighted(rng, weights)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let next = points[sample_weighted(rng, &scores)].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &next));
        }
        centroids.push(next);
    }
    centroids
}

fn assign(points: &[Vec<f64>], weights: &[f64], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut objective = 0.0;
    let assignments = points
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            let (j, d) = nearest(p, centroids);
            objective += w * d;
            j
        })
        .collect();
    (assignments, objective)
}

/// Weighted means; clusters left empty keep their previous centroid.
fn update_means(points: &[Vec<f64>], weights: &[f64], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut mass = vec![0.0; centroids.len()];
    for ((p, w), &j) in points.iter().zip(weights).zip(assignments) {
        mass[j] += w;
        for (s, v) in sums[j].iter_mut().zip(p) {
            *s += w * v;
        }
    }
    for ((c, s), m) in centroids.iter_mut().zip(sums).zip(mass) {
        if m > 0.0 {
            *c = s.into_iter().map(|v| v / m).collect();
        }
    }
}

/// Clusters `points` (normalized internally) with per-point `weights`.
///
/// Initialization is weighted k-means++. Mini-batch mode samples points in
/// proportion to their weight and applies per-centre learning rates; both
/// modes finish with an assignment, a mean update and a final assignment so
/// the returned centroids are the means of their members.
pub fn minibatch_kmeans(points: &[Vec<f64>], weights: &[f64], config: &KMeansConfig, seed: u64) -> Result<KMeansResult> {
    let k = config.k;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if points.len() < k {
        return Err(Error::InvalidArgument(format!(
            "k-means needs at least k = {k} points, got {}",
            points.len()
        )));
    }
    if weights.len() != points.len() {
        return Err(Error::Dimension {
            context: "k-means weights",
            expected: points.len(),
            got: weights.len(),
        });
    }
    let points: Vec<Vec<f64>> = points.iter().map(|p| normalized(p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(&points, weights, k, &mut rng);
    let mut history = Vec::new();

    match config.mode {
        KMeansMode::FullBatch => {
            let (mut assignments, objective) = assign(&points, weights, &centroids);
            history.push(objective);
            for _ in 0..config.iters {
                update_means(&points, weights, &assignments, &mut centroids);
                let (next, objective) = assign(&points, weights, &centroids);
                history.push(objective);
                let stable = next == assignments;
                assignments = next;
                if stable {
                    break;
                }
            }
            return Ok(KMeansResult {
                assignments,
                centroids,
                objective_history: history,
            });
        }
        KMeansMode::MiniBatch => {
            let mut counts = vec![0.0; k];
            for _ in 0..config.iters {
                let batch: Vec<usize> = (0..config.batch_size.max(1))
                    .map(|_| sample_weighted(&mut rng, weights))
                    .collect();
                let targets: Vec<usize> = batch.iter().map(|&i| nearest(&points[i], &centroids).0).collect();
                for (&i, &j) in batch.iter().zip(&targets) {
                    counts[j] += 1.0;
                    let eta = 1.0 / counts[j];
                    for (c, x) in centroids[j].iter_mut().zip(&points[i]) {
                        *c = (1.0 - eta) * *c + eta * x;
                    }
                }
            }
        }
    }

    let (assignments, _) = assign(&points, weights, &centroids);
    update_means(&points, weights, &assignments, &mut centroids);
    let (assignments, objective) = assign(&points, weights, &centroids);
    history.push(objective);
    Ok(KMeansResult {
        assignments,
        centroids,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn blobs() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let centres = [(1.0, 0.0), (-0.5, 0.866), (-0.5, -0.866)];
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (b, (cx, cy)) in centres.iter().enumerate() {
            for _ in 0..20 {
                points.push(vec![cx + rng.random_range(-0.1..0.1), cy + rng.random_range(-0.1..0.1)]);
                labels.push(b);
            }
        }
        (points, labels)
    }

    /// Canonical form of a partition: the set of member-index sets.
    fn partition(assignments: &[usize]) -> BTreeSet<BTreeSet<usize>> {
        let mut groups = std::collections::BTreeMap::<usize, BTreeSet<usize>>::new();
        for (i, &a) in assignments.iter().enumerate() {
            groups.entry(a).or_default().insert(i);
        }
        groups.into_values().collect()
    }

    /// Plain Lloyd iterations on normalized points from fixed seeds.
    fn lloyd_oracle(points: &[Vec<f64>], init: &[usize]) -> Vec<usize> {
        let pts: Vec<Vec<f64>> = points
            .iter()
            .map(|p| {
                let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
                vec![p[0] / n, p[1] / n]
            })
            .collect();
        let mut cents: Vec<Vec<f64>> = init.iter().map(|&i| pts[i].clone()).collect();
        let mut assign = vec![usize::MAX; pts.len()];
        loop {
            let next: Vec<usize> = pts
                .iter()
                .map(|p| {
                    let mut best = 0;
                    for j in 1..cents.len() {
                        let dj = (p[0] - cents[j][0]).powi(2) + (p[1] - cents[j][1]).powi(2);
                        let db = (p[0] - cents[best][0]).powi(2) + (p[1] - cents[best][1]).powi(2);
                        if dj < db {
                            best = j;
                        }
                    }
                    best
                })
                .collect();
            if next == assign {
                return assign;
            }
            assign = next;
            for (j, c) in cents.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = pts.iter().zip(&assign).filter(|(_, a)| **a == j).map(|(p, _)| p).collect();
                if !members.is_empty() {
                    let n = members.len() as f64;
                    *c = vec![members.iter().map(|p| p[0]).sum::<f64>() / n, members.iter().map(|p| p[1]).sum::<f64>() / n];
                }
            }
        }
    }

    #[test]
    fn blobs_match_lloyd_oracle_in_both_modes() {
        let (points, labels) = blobs();
        let weights = vec![1.0; points.len()];
        let oracle = lloyd_oracle(&points, &[0, 20, 40]);
        assert_eq!(partition(&oracle), partition(&labels));
        for mode in [KMeansMode::MiniBatch, KMeansMode::FullBatch] {
            let config = KMeansConfig {
                k: 3,
                batch_size: 16,
                iters: 50,
                mode,
            };
            let result = minibatch_kmeans(&points, &weights, &config, 7).unwrap();
            assert_eq!(partition(&result.assignments), partition(&oracle), "{mode:?}");
        }
    }

    #[test]
    fn full_batch_objective_never_increases_and_ends_at_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<Vec<f64>> = (0..80)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let weights: Vec<f64> = (0..80).map(|i| 1.0 + (i % 3) as f64).collect();
        let config = KMeansConfig {
            k: 6,
            iters: 200,
            mode: KMeansMode::FullBatch,
            ..KMeansConfig::default()
        };
        let r = minibatch_kmeans(&points, &weights, &config, 1).unwrap();
        for w in r.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", r.objective_history);
        }
        let normalized_points: Vec<Vec<f64>> = points.iter().map(|p| normalized(p)).collect();
        let (again, _) = assign(&normalized_points, &weights, &r.centroids);
        assert_eq!(again, r.assignments);
    }

    #[test]
    fn single_cluster_centroid_is_mean_of_normalized_points() {
        let points = vec![vec![2.0, 0.0], vec![0.0, 3.0], vec![1.0, 1.0]];
        let r = minibatch_kmeans(&points, &[1.0; 3], &KMeansConfig { k: 1, ..KMeansConfig::default() }, 0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expected = [(1.0 + 0.0 + s) / 3.0, (0.0 + 1.0 + s) / 3.0];
        assert!((r.centroids[0][0] - expected[0]).abs() < 1e-12);
        assert!((r.centroids[0][1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn identical_points_share_one_cluster() {
        let points = vec![vec![0.5, 0.5]; 6];
        let r = minibatch_kmeans(&points, &[1.0; 6], &KMeansConfig { k: 3, ..KMeansConfig::default() }, 9).unwrap();
        assert!(r.assignments.iter().all(|&a| a == r.assignments[0]));
    }

    #[test]
    fn too_few_points_is_an_error() {
        let points = vec![vec![1.0, 0.0]; 2];
        assert!(minibatch_kmeans(&points, &[1.0; 2], &KMeansConfig { k: 3, ..KMeansConfig::default() }, 0).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (points, _) = blobs();
        let w = vec![1.0; points.len()];
        let c = KMeansConfig { k: 5, batch_size: 8, iters: 30, mode: KMeansMode::MiniBatch };
        assert_eq!(minibatch_kmeans(&points, &w, &c, 5).unwrap(), minibatch_kmeans(&points, &w, &c, 5).unwrap());
    }
}

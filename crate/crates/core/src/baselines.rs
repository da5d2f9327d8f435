//! Distribution-space reduction methods used for comparison.
//!
//! All methods work on per-source standardized scenario vectors and return
//! member scenarios as representatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ReductionResult;
use crate::error::{Error, Result};
use crate::scenario::{ScenarioSet, SourceRole};

pub const DEFAULT_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITERS: usize = 300;

/// Per-source z-score statistics over a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub horizon: usize,
    pub mean: Vec<f64>,
    /// Standard deviation, or 1 for a constant source.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(set: &ScenarioSet) -> Self {
        let t = set.horizon();
        let u = set.sources().len();
        let count = (set.len() * t) as f64;
        let mut mean = vec![0.0; u];
        let mut scale = vec![1.0; u];
        for k in 0..u {
            let all = || set.scenarios().iter().flat_map(move |s| s.series(k).iter().copied());
            let m = all().sum::<f64>() / count;
            let var = all().map(|x| (x - m) * (x - m)).sum::<f64>() / count;
            mean[k] = m;
            if var > 0.0 {
                scale[k] = var.sqrt();
            }
        }
        Standardizer { horizon: t, mean, scale }
    }

    pub fn transform(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let k = i / self.horizon;
                (x - self.mean[k]) / self.scale[k]
            })
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &x)| {
                let k = i / self.horizon;
                x * self.scale[k] + self.mean[k]
            })
            .collect()
    }
}

/// Standardized flattened scenarios.
pub fn flatten(set: &ScenarioSet) -> (Standardizer, Vec<Vec<f64>>) {
    let st = Standardizer::fit(set);
    let points = set.scenarios().iter().map(|s| st.transform(s.values())).collect();
    (st, points)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn check_k(set: &ScenarioSet, k: usize) -> Result<()> {
    if k == 0 || k > set.len() {
        return Err(Error::Config(format!("K = {k} is outside 1..={}", set.len())));
    }
    Ok(())
}

/// A clustering of points with centroids and its weighted SSE.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    pub iterations: usize,
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, x) in centroids.iter().enumerate() {
        let d = sq_dist(p, x);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(points: &[Vec<f64>], w: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.gen_range(0..n)].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().zip(w).map(|(p, wi)| wi * nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &x) in d2.iter().enumerate() {
                if r < x {
                    pick = i;
                    break;
                }
                r -= x;
            }
            pick
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Weighted Lloyd iteration from k-means++ seeding.
pub fn lloyd(points: &[Vec<f64>], w: &[f64], k: usize, seed: u64) -> KMeansFit {
    let n = points.len();
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus(points, w, k, &mut rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut mass = vec![0.0; k];
        for i in 0..n {
            let c = labels[i];
            mass[c] += w[i];
            for (s, x) in sums[c].iter_mut().zip(&points[i]) {
                *s += w[i] * x;
            }
        }
        for c in 0..k {
            if mass[c] > 0.0 {
                centroids[c] = sums[c].iter().map(|s| s / mass[c]).collect();
            } else {
                // Empty cluster: restart it at the worst-served point.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[labels[a]])
                            .total_cmp(&sq_dist(&points[b], &centroids[labels[b]]))
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                labels[far] = c;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == labels || iterations >= KMEANS_MAX_ITERS {
            labels = next;
            break;
        }
        labels = next;
    }
    let sse = (0..n).map(|i| w[i] * sq_dist(&points[i], &centroids[labels[i]])).sum();
    KMeansFit {
        labels,
        centroids,
        sse,
        iterations,
    }
}

/// Best of `restarts` Lloyd runs.
pub fn kmeans(points: &[Vec<f64>], w: &[f64], k: usize, seed: u64, restarts: usize) -> KMeansFit {
    let fits: Vec<KMeansFit> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| lloyd(points, w, k, seed.wrapping_mul(1_000_003).wrapping_add(r)))
        .collect();
    fits.into_iter()
        .reduce(|best, f| if f.sse < best.sse { f } else { best })
        .unwrap()
}

/// Turns cluster labels into a member-represented partition: each cluster
/// is represented by the member closest to `centers[label]`.
fn represent(
    method: &str,
    points: &[Vec<f64>],
    labels: &[usize],
    centers: &[Vec<f64>],
    gamma: &[f64],
) -> Result<ReductionResult> {
    let n = points.len();
    let mut rep_of = vec![usize::MAX; centers.len()];
    for c in 0..centers.len() {
        rep_of[c] = (0..n)
            .filter(|&i| labels[i] == c)
            .min_by(|&a, &b| {
                sq_dist(&points[a], &centers[c])
                    .total_cmp(&sq_dist(&points[b], &centers[c]))
                    .then(a.cmp(&b))
            })
            .unwrap_or(usize::MAX);
    }
    let assignment = labels.iter().map(|&c| rep_of[c]).collect();
    ReductionResult::from_assignment(method, assignment, gamma)
}

/// K-means on standardized vectors, with each centroid replaced by its
/// closest member.
pub fn kmeans_reduce(set: &ScenarioSet, k: usize, seed: u64, restarts: usize) -> Result<ReductionResult> {
    check_k(set, k)?;
    let (_, points) = flatten(set);
    let fit = kmeans(&points, set.probabilities(), k, seed, restarts);
    represent("km-e", &points, &fit.labels, &fit.centroids, set.probabilities())
}

fn distance_matrix(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let x = dist(&points[i], &points[j]);
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    d
}

fn medoid_cost(d: &[Vec<f64>], w: &[f64], medoids: &[usize]) -> f64 {
    (0..d.len())
        .map(|i| w[i] * medoids.iter().map(|&m| d[i][m]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// PAM: greedy build, then best-improvement swaps to a local optimum.
pub fn pam(d: &[Vec<f64>], w: &[f64], k: usize) -> Vec<usize> {
    let n = d.len();
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let next = (0..n)
            .filter(|c| !medoids.contains(c))
            .map(|c| {
                let mut trial = medoids.clone();
                trial.push(c);
                (c, medoid_cost(d, w, &trial))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .unwrap()
            .0;
        medoids.push(next);
    }
    let mut cost = medoid_cost(d, w, &medoids);
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for c in (0..n).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = c;
                let t = medoid_cost(d, w, &trial);
                if t < cost - 1e-12 * cost.abs().max(1.0) && best.map_or(true, |b| t < b.2) {
                    best = Some((slot, c, t));
                }
            }
        }
        match best {
            Some((slot, c, t)) => {
                medoids[slot] = c;
                cost = t;
            }
            None => break,
        }
    }
    medoids.sort_unstable();
    medoids
}

fn assign_to_nearest(d: &[Vec<f64>], reps: &[usize]) -> Vec<usize> {
    (0..d.len())
        .map(|i| {
            if reps.contains(&i) {
                return i;
            }
            *reps
                .iter()
                .min_by(|&&a, &&b| d[i][a].total_cmp(&d[i][b]).then(a.cmp(&b)))
                .unwrap()
        })
        .collect()
}

/// K-medoids (PAM) on standardized Euclidean distances. PAM is
/// deterministic; ties go to the lowest index, so `seed` has no effect.
pub fn kmedoids_reduce(set: &ScenarioSet, k: usize, _seed: u64) -> Result<ReductionResult> {
    check_k(set, k)?;
    let (_, points) = flatten(set);
    let d = distance_matrix(&points);
    let medoids = pam(&d, set.probabilities(), k);
    ReductionResult::from_assignment("kd-e", assign_to_nearest(&d, &medoids), set.probabilities())
}

/// One agglomeration step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Average-linkage agglomeration down to `k` clusters. Returns the merges
/// performed and the cluster label of every point.
pub fn average_linkage(d: &[Vec<f64>], k: usize) -> (Vec<Merge>, Vec<usize>) {
    let n = d.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut link = d.to_vec();
    let mut alive: Vec<bool> = vec![true; n];
    let mut merges = Vec::new();
    for _ in 0..n.saturating_sub(k) {
        let mut best = (0, 0, f64::INFINITY);
        for a in (0..n).filter(|&a| alive[a]) {
            for b in (a + 1..n).filter(|&b| alive[b]) {
                if link[a][b] < best.2 {
                    best = (a, b, link[a][b]);
                }
            }
        }
        let (a, b, h) = best;
        let (na, nb) = (clusters[a].len() as f64, clusters[b].len() as f64);
        for c in (0..n).filter(|&c| alive[c] && c != a && c != b) {
            let x = (na * link[a][c] + nb * link[b][c]) / (na + nb);
            link[a][c] = x;
            link[c][a] = x;
        }
        let moved = std::mem::take(&mut clusters[b]);
        clusters[a].extend(moved);
        alive[b] = false;
        merges.push(Merge { a, b, height: h });
    }
    let mut labels = vec![0; n];
    for (label, c) in clusters.iter().filter(|c| !c.is_empty()).enumerate() {
        for &i in c {
            labels[i] = label;
        }
    }
    (merges, labels)
}

/// Average-linkage hierarchical clustering cut at `k` clusters; each
/// cluster is represented by its member with the least summed distance to
/// the others.
pub fn hierarchical_reduce(set: &ScenarioSet, k: usize) -> Result<ReductionResult> {
    check_k(set, k)?;
    let (_, points) = flatten(set);
    let d = distance_matrix(&points);
    let (_, labels) = average_linkage(&d, k);
    let n = d.len();
    let mut assignment = vec![0; n];
    for c in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        let rep = *members
            .iter()
            .min_by(|&&a, &&b| {
                let sa: f64 = members.iter().map(|&m| d[a][m]).sum();
                let sb: f64 = members.iter().map(|&m| d[b][m]).sum();
                sa.total_cmp(&sb).then(a.cmp(&b))
            })
            .unwrap();
        for &m in &members {
            assignment[m] = rep;
        }
    }
    ReductionResult::from_assignment("hc", assignment, set.probabilities())
}

/// Peak standardized net load: `max_t (Σ_load z − Σ_res z)`.
pub fn severity_scores(set: &ScenarioSet) -> Vec<f64> {
    let (st, points) = flatten(set);
    let t_len = st.horizon;
    let roles = set.roles();
    points
        .iter()
        .map(|p| {
            (0..t_len)
                .map(|t| {
                    roles
                        .iter()
                        .enumerate()
                        .map(|(u, r)| match r {
                            SourceRole::Load => p[u * t_len + t],
                            SourceRole::Wt | SourceRole::Pv => -p[u * t_len + t],
                            SourceRole::Price => 0.0,
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// The `k` most severe scenarios; the rest join their nearest one.
pub fn worst_case_select(set: &ScenarioSet, k: usize) -> Result<ReductionResult> {
    check_k(set, k)?;
    let score = severity_scores(set);
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let reps = &order[..k];
    let (_, points) = flatten(set);
    let d = distance_matrix(&points);
    ReductionResult::from_assignment("ws", assign_to_nearest(&d, reps), set.probabilities())
}

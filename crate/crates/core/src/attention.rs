//! One-dimensional K-Means over gaze durations.
//!
//! Durations are clustered into attention levels with Lloyd's algorithm,
//! seeded by k-means++ and repeated over several seeded restarts; the run
//! with the lowest within-cluster sum of squares (WCSS) wins. With `k = 4`
//! the clusters are named, in ascending centroid order, quick scan, normal
//! scan, short gaze and long gaze.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::GazeEvent;

pub const ATTENTION_LABELS: [&str; 4] = ["quick scan", "normal scan", "short gaze", "long gaze"];
pub const DEFAULT_K: usize = 4;
pub const DEFAULT_RESTARTS: usize = 5;
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("no durations to cluster")]
    EmptyInput,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {distinct} distinct values in the input")]
    KTooLarge { k: usize, distinct: usize },
    #[error("durations must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Converged once no centroid moves by this much or more.
    pub tol: f64,
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

/// Fitted attention levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionModel {
    pub k: usize,
    /// Strictly ascending centroid durations in seconds.
    pub centroids: Vec<f64>,
    /// One name per centroid, same order.
    pub labels: Vec<String>,
}

impl AttentionModel {
    pub fn from_centroids(mut centroids: Vec<f64>) -> Self {
        centroids.sort_by(f64::total_cmp);
        let k = centroids.len();
        AttentionModel {
            k,
            labels: default_labels(k),
            centroids,
        }
    }

    /// The model with the reference centroids 0.047 / 0.338 / 0.953 / 2.488 s.
    pub fn reference() -> Self {
        Self::from_centroids(vec![0.047, 0.338, 0.953, 2.488])
    }

    pub fn label_of(&self, duration_s: f64) -> &str {
        &self.labels[nearest_centroid(duration_s, &self.centroids)]
    }
}

pub fn default_labels(k: usize) -> Vec<String> {
    if k == ATTENTION_LABELS.len() {
        ATTENTION_LABELS.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=k).map(|i| format!("cluster {i}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: AttentionModel,
    /// Cluster index (into the ascending centroids) for every input value.
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
    /// Which restart produced this fit.
    pub restart: usize,
}

/// One Lloyd's run from given starting centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    /// Ascending.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after every assignment step, ending with the final assignment.
    pub wcss_history: Vec<f64>,
}

/// Index of the nearest centroid; on an exact tie the smaller centroid wins.
/// `centroids` must be ascending for the tie rule to mean "smaller value".
pub fn nearest_centroid(x: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = (x - centroids[0]).abs();
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        let d = (x - c).abs();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

fn sq(x: f64) -> f64 {
    x * x
}

pub fn wcss(data: &[f64], centroids: &[f64], assignments: &[usize]) -> f64 {
    data.iter()
        .zip(assignments)
        .map(|(&x, &a)| sq(x - centroids[a]))
        .sum()
}

pub fn distinct_count(data: &[f64]) -> usize {
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

fn validate(data: &[f64], k: usize) -> Result<(), ClusterError> {
    if data.is_empty() {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    let distinct = distinct_count(data);
    if k > distinct {
        return Err(ClusterError::KTooLarge { k, distinct });
    }
    Ok(())
}

/// k-means++ seeding: the first centre uniformly, each further centre with
/// probability proportional to its squared distance from the nearest
/// existing centre.
pub fn kmeans_plus_plus<R: Rng>(data: &[f64], k: usize, rng: &mut R) -> Vec<f64> {
    let mut centres = Vec::with_capacity(k);
    centres.push(data[rng.random_range(0..data.len())]);
    let mut d2: Vec<f64> = data.iter().map(|&x| sq(x - centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` at the very end of the cumulative sum.
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            rng.random_range(0..data.len())
        };
        let c = data[pick];
        centres.push(c);
        for (d, &x) in d2.iter_mut().zip(data) {
            *d = d.min(sq(x - c));
        }
    }
    centres
}

fn assign(data: &[f64], centroids: &[f64], assignments: &mut [usize]) {
    for (a, &x) in assignments.iter_mut().zip(data) {
        *a = nearest_centroid(x, centroids);
    }
}

/// Moves centroids of empty clusters onto the currently worst-fitting points.
fn reseed_empty(data: &[f64], centroids: &mut [f64], assignments: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignments.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let (far, far_d) = data
            .iter()
            .zip(assignments.iter())
            .map(|(&x, &a)| sq(x - centroids[a]))
            .enumerate()
            .fold(
                (0, -1.0),
                |best, (i, d)| if d > best.1 { (i, d) } else { best },
            );
        if far_d <= 0.0 {
            return;
        }
        centroids[empty] = data[far];
        assignments[far] = empty;
    }
}

pub fn lloyd(data: &[f64], initial: &[f64], max_iter: usize, tol: f64) -> LloydRun {
    let k = initial.len();
    let mut centroids = initial.to_vec();
    let mut assignments = vec![0usize; data.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        assign(data, &centroids, &mut assignments);
        reseed_empty(data, &mut centroids, &mut assignments);
        history.push(wcss(data, &centroids, &assignments));

        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&x, &a) in data.iter().zip(&assignments) {
            sums[a] += x;
            counts[a] += 1;
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] > 0 {
                let next = sums[j] / counts[j] as f64;
                shift = shift.max((next - centroids[j]).abs());
                centroids[j] = next;
            }
        }
        if shift < tol {
            break;
        }
    }

    // Relabel in ascending centroid order, then make the final assignment.
    centroids.sort_by(f64::total_cmp);
    assign(data, &centroids, &mut assignments);
    let final_wcss = wcss(data, &centroids, &assignments);
    history.push(final_wcss);
    LloydRun {
        centroids,
        assignments,
        wcss: final_wcss,
        iterations,
        wcss_history: history,
    }
}

/// Best-of-restarts K-Means. Restart `r` uses seed `cfg.seed + r`.
pub fn kmeans_1d(data: &[f64], cfg: &KMeansConfig) -> Result<KMeansFit, ClusterError> {
    validate(data, cfg.k)?;
    let mut best: Option<(usize, LloydRun)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
        let init = kmeans_plus_plus(data, cfg.k, &mut rng);
        let run = lloyd(data, &init, cfg.max_iter, cfg.tol);
        if best.as_ref().is_none_or(|(_, b)| run.wcss < b.wcss) {
            best = Some((restart, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");
    Ok(KMeansFit {
        model: AttentionModel {
            k: cfg.k,
            labels: default_labels(cfg.k),
            centroids: run.centroids,
        },
        assignments: run.assignments,
        wcss: run.wcss,
        iterations: run.iterations,
        restart,
    })
}

/// WCSS (sum of squared distances) for every k in `k_range`, each the best of
/// [`DEFAULT_RESTARTS`] seeded restarts.
pub fn wcss_curve(
    data: &[f64],
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<Vec<(usize, f64)>, ClusterError> {
    k_range
        .map(|k| kmeans_1d(data, &KMeansConfig::new(k, seed)).map(|fit| (k, fit.wcss)))
        .collect()
}

pub fn wcss_csv(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("k,wcss\n");
    for (k, w) in curve {
        let _ = writeln!(out, "{k},{w}");
    }
    out
}

/// Assigns each event the label of its nearest centroid.
pub fn label_attention<'a>(
    events: &'a [GazeEvent],
    model: &'a AttentionModel,
) -> Vec<(&'a GazeEvent, &'a str)> {
    events
        .iter()
        .map(|e| (e, model.label_of(e.duration_s)))
        .collect()
}

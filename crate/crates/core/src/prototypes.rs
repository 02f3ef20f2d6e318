//! K-means prototypes of the seed set.
//!
//! Lloyd's algorithm with k-means++ seeding, run in Euclidean geometry on
//! L2-normalized rows. The centers stand in for the full seed set when
//! scoring proximity.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result, Warning};
use crate::par;

pub const DEFAULT_CLUSTERS: usize = 10;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    /// `k × d` cluster centers.
    pub centers: EmbeddingSet,
    /// Cluster index of every input row.
    pub assignments: Vec<usize>,
    /// Sum of squared distances from the normalized rows to their centers.
    pub inertia: f64,
    /// Inertia after the seeding step and after every Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    /// Assignments stopped changing before `max_iters` ran out.
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

impl PrototypeSet {
    pub fn k(&self) -> usize {
        self.centers.n()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        acc += t * t;
    }
    acc
}

fn normalized_rows(points: &EmbeddingSet) -> Vec<f64> {
    let d = points.dim();
    let mut out = Vec::with_capacity(points.n() * d);
    for r in points.rows() {
        let norm = crate::math::sqrt(crate::metric::dot(r, r));
        if norm > 0.0 {
            out.extend(r.iter().map(|&v| v as f64 / norm));
        } else {
            out.extend(r.iter().map(|&v| v as f64));
        }
    }
    out
}

fn distinct_rows(rows: &[f64], d: usize) -> usize {
    let mut keys: Vec<Vec<u64>> = rows
        .chunks_exact(d)
        .map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Nearest center (ties → lowest center index) and its squared distance.
fn assign(rows: &[f64], centers: &[f64], d: usize) -> Vec<(usize, f64)> {
    let k = centers.len() / d;
    par::map_range(rows.len() / d, |i| {
        let r = &rows[i * d..(i + 1) * d];
        let mut best = (0, f64::INFINITY);
        for c in 0..k {
            let dist = sq_dist(r, &centers[c * d..(c + 1) * d]);
            if dist < best.1 {
                best = (c, dist);
            }
        }
        best
    })
}

fn seed_plus_plus(rows: &[f64], d: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rows.len() / d;
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(&rows[first * d..(first + 1) * d]);
    let mut closest: Vec<f64> = (0..n)
        .map(|i| sq_dist(&rows[i * d..(i + 1) * d], &centers[..d]))
        .collect();
    while centers.len() < k * d {
        let total: f64 = closest.iter().sum();
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in closest.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            if acc > target {
                pick = Some(i);
                break;
            }
        }
        // rounding can leave `target` just past the last positive weight
        let pick = pick.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).unwrap_or(0));
        let c = &rows[pick * d..(pick + 1) * d];
        centers.extend_from_slice(c);
        for (i, w) in closest.iter_mut().enumerate() {
            let dist = sq_dist(&rows[i * d..(i + 1) * d], c);
            if dist < *w {
                *w = dist;
            }
        }
    }
    centers
}

/// Recomputes centers as cluster means. Empty clusters take the row
/// farthest from its own new center.
fn update(rows: &[f64], d: usize, k: usize, labels: &[(usize, f64)]) -> Vec<f64> {
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0usize; k];
    for (i, &(c, _)) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(&rows[i * d..(i + 1) * d]) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = counts[c] as f64;
            sums[c * d..(c + 1) * d].iter_mut().for_each(|s| *s /= inv);
        }
    }
    let mut taken = vec![false; labels.len()];
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &(own, _)) in labels.iter().enumerate() {
            if taken[i] || counts[own] == 0 {
                continue;
            }
            let dist = sq_dist(&rows[i * d..(i + 1) * d], &sums[own * d..(own + 1) * d]);
            if best.is_none_or(|(_, b)| dist > b) {
                best = Some((i, dist));
            }
        }
        if let Some((i, _)) = best {
            taken[i] = true;
            let row = rows[i * d..(i + 1) * d].to_vec();
            sums[c * d..(c + 1) * d].copy_from_slice(&row);
        }
    }
    sums
}

/// Clusters the L2-normalized rows of `points` into `k` prototypes.
///
/// `k` is reduced (with a warning) when the input has fewer distinct rows.
/// Deterministic for a given `seed`.
pub fn kmeans(points: &EmbeddingSet, k: usize, max_iters: usize, seed: u64) -> Result<PrototypeSet> {
    if k == 0 {
        return Err(Error::ConfigInvalid("k-means needs at least one cluster".into()));
    }
    if max_iters == 0 {
        return Err(Error::ConfigInvalid("k-means needs at least one iteration".into()));
    }
    let d = points.dim();
    let rows = normalized_rows(points);
    let mut warnings = Vec::new();
    let distinct = distinct_rows(&rows, d);
    let k_used = k.min(distinct);
    if k_used < k {
        warnings.push(Warning::ClustersReduced {
            requested: k,
            used: k_used,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(&rows, d, k_used, &mut rng);
    let mut labels = assign(&rows, &centers, d);
    let inertia_of = |l: &[(usize, f64)]| l.iter().map(|&(_, s)| s).sum::<f64>();
    let mut history = vec![inertia_of(&labels)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let next_centers = update(&rows, d, k_used, &labels);
        let next_labels = assign(&rows, &next_centers, d);
        let inertia = inertia_of(&next_labels);
        let prev = *history.last().unwrap();
        debug_assert!(
            inertia <= prev * (1.0 + 1e-12) + 1e-12,
            "k-means inertia rose from {prev} to {inertia}"
        );
        history.push(inertia);
        centers = next_centers;
        let unchanged = next_labels.iter().zip(&labels).all(|(a, b)| a.0 == b.0);
        labels = next_labels;
        if unchanged {
            converged = true;
            break;
        }
    }

    let centers_f32: Vec<f32> = centers.iter().map(|&v| v as f32).collect();
    Ok(PrototypeSet {
        centers: EmbeddingSet::new(k_used, d, centers_f32)?,
        assignments: labels.iter().map(|&(c, _)| c).collect(),
        inertia: *history.last().unwrap(),
        inertia_history: history,
        iterations,
        converged,
        warnings,
    })
}

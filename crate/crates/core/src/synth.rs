//! Synthetic long-tail mixtures for exercising the selection pipeline
//! without a trained network.
//!
//! Class mean directions sit in a cone around a base axis; out-of-distribution
//! clusters sit further out in the same cone so that they are farther from
//! every in-distribution class than the classes are from each other. Points
//! are Gaussian around their mean and then L2-normalized.
//!
//! Per-repeat losses are drawn from a [`SyntheticLossModel`] instead of a
//! contrastive network, which makes the link between class size and loss a
//! controllable assumption.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::contrastive::{LossTable, NegativeBank, ViewLossInputs};
use crate::diagnostics::GroupPartition;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::math;

/// Selection budget used with [`MixtureSpec::canonical`].
pub const CANONICAL_BUDGET: usize = 400;

/// Shape of the seed class-size sequence from `head_size` down to `tail_size`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeProfile {
    /// Midpoint quantiles of a Pareto distribution: `head·(2c+1)^(−β)`,
    /// with `β` fixed by the head/tail ratio.
    #[default]
    Pareto,
    /// Geometric decay: `head·(tail/head)^(c/(C−1))`.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodSpec {
    pub clusters: usize,
    /// Points per cluster (all placed in the pool).
    pub size: usize,
    /// Offset of cluster means from the base axis, as a multiple of the
    /// in-distribution offset.
    pub distance_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LossMode {
    /// Expected loss `base + scale/√size` where `size` is the class's seed
    /// count; OoD clusters count as size 1.
    SizeInverse { base: f64, scale: f64 },
    Constant { value: f64 },
    /// Expected loss per class, plus one value for all OoD clusters.
    Custom { class_means: Vec<f64>, ood_mean: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLossModel {
    #[serde(flatten)]
    pub mode: LossMode,
    pub repeats: usize,
    /// Standard deviation of each per-repeat draw around the sample mean.
    pub noise_std: f64,
    /// Standard deviation of the fixed per-sample offset.
    #[serde(default)]
    pub sample_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub num_classes: usize,
    pub head_size: usize,
    pub tail_size: usize,
    #[serde(default)]
    pub size_profile: SizeProfile,
    /// Overrides the profile when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_sizes: Option<Vec<usize>>,
    pub dim: usize,
    /// Offset of each class mean from the base axis (before normalization).
    pub cluster_separation: f64,
    /// Norm of the Gaussian perturbation around a class mean.
    pub intra_class_spread: f64,
    /// In-distribution pool size as a multiple of the seed size.
    pub pool_factor: f64,
    pub ood: OodSpec,
    pub loss: SyntheticLossModel,
    pub rng_seed: u64,
}

impl MixtureSpec {
    /// The reference benchmark: 20 classes from 200 down to 5 seed samples,
    /// 32 dimensions, two OoD clusters of 300 points, pool five times the
    /// seed size.
    pub fn canonical() -> Self {
        Self {
            num_classes: 20,
            head_size: 200,
            tail_size: 5,
            size_profile: SizeProfile::Pareto,
            class_sizes: None,
            dim: 32,
            cluster_separation: 0.3,
            intra_class_spread: 0.35,
            pool_factor: 5.0,
            ood: OodSpec {
                clusters: 2,
                size: 300,
                distance_factor: 3.0,
            },
            loss: SyntheticLossModel {
                mode: LossMode::SizeInverse {
                    base: 1.0,
                    scale: 3.0,
                },
                repeats: 10,
                noise_std: 1.0,
                sample_std: 0.1,
            },
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::SpecInvalid(m.into()));
        if self.num_classes == 0 {
            return bad("at least one class is required");
        }
        match &self.class_sizes {
            Some(sizes) => {
                if sizes.len() != self.num_classes {
                    return bad("class_sizes length differs from num_classes");
                }
                if sizes.contains(&0) {
                    return bad("class sizes must be positive");
                }
                if sizes[0] < *sizes.last().unwrap() {
                    return bad("class sizes must run from head to tail");
                }
            }
            None => {
                if self.tail_size == 0 || self.head_size < self.tail_size {
                    return bad("need head_size >= tail_size >= 1");
                }
            }
        }
        if self.dim < 2 {
            return bad("dimension must be at least 2");
        }
        if !(self.cluster_separation > 0.0 && self.intra_class_spread > 0.0) {
            return bad("separation and spread must be positive");
        }
        if self.pool_factor.is_nan() || self.pool_factor <= 0.0 {
            return bad("pool factor must be positive");
        }
        if self.ood.clusters > 0 && !(self.ood.size > 0 && self.ood.distance_factor > 0.0) {
            return bad("OoD clusters need a positive size and distance factor");
        }
        if self.loss.repeats == 0 {
            return bad("loss repeats must be at least 1");
        }
        if !(self.loss.noise_std >= 0.0 && self.loss.sample_std >= 0.0) {
            return bad("loss noise must be non-negative");
        }
        if let LossMode::Custom { class_means, .. } = &self.loss.mode {
            if class_means.len() != self.num_classes {
                return bad("custom loss needs one mean per class");
            }
        }
        Ok(())
    }

    /// Seed sample count per class, head first.
    pub fn seed_class_sizes(&self) -> Vec<usize> {
        if let Some(s) = &self.class_sizes {
            return s.clone();
        }
        pareto_sizes(self.num_classes, self.head_size, self.tail_size, self.size_profile)
    }
}

pub(crate) fn pareto_sizes(classes: usize, head: usize, tail: usize, profile: SizeProfile) -> Vec<usize> {
    if classes == 1 {
        return vec![head];
    }
    let ratio = head as f64 / tail as f64;
    (0..classes)
        .map(|c| {
            let v = match profile {
                SizeProfile::Pareto => {
                    let beta = math::ln(ratio) / math::ln((2 * classes - 1) as f64);
                    head as f64 * libm::pow((2 * c + 1) as f64, -beta)
                }
                SizeProfile::Exponential => {
                    head as f64 * libm::pow(1.0 / ratio, c as f64 / (classes - 1) as f64)
                }
            };
            (libm::round(v) as usize).max(1)
        })
        .collect()
}

/// A generated scene. Labels `0..num_classes` are in-distribution classes;
/// OoD clusters take the labels after them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub spec: MixtureSpec,
    pub seed: EmbeddingSet,
    pub pool: EmbeddingSet,
    pub losses: LossTable,
    pub class_sizes: Vec<usize>,
    /// True class mean directions (unit norm), in-distribution then OoD.
    pub means: Vec<Vec<f64>>,
}

impl Mixture {
    pub fn partition(&self) -> GroupPartition {
        GroupPartition::from_class_sizes(
            self.class_sizes
                .iter()
                .enumerate()
                .map(|(c, &s)| (c as i64, s)),
        )
    }

    pub fn is_ood(&self, label: i64) -> bool {
        label >= self.spec.num_classes as i64
    }

    pub fn pool_labels(&self) -> &[i64] {
        self.pool.labels().expect("generated pools carry labels")
    }
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = math::sqrt(v.iter().map(|x| x * x).sum());
    v.iter().map(|x| x / norm).collect()
}

/// Random direction orthogonal to the first axis.
fn offset_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut g = gaussian(rng, d);
    g[0] = 0.0;
    unit(&g)
}

fn draw_point(rng: &mut ChaCha8Rng, mean: &[f64], spread: f64) -> Vec<f32> {
    let d = mean.len();
    let scale = spread / math::sqrt(d as f64);
    let g = gaussian(rng, d);
    let p: Vec<f64> = mean.iter().zip(&g).map(|(m, z)| m + scale * z).collect();
    unit(&p).into_iter().map(|v| v as f32).collect()
}

/// Draws seed and pool embeddings plus a pool loss table from `spec`.
pub fn generate_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    spec.validate()?;
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let class_sizes = spec.seed_class_sizes();
    let classes = spec.num_classes;

    let mut means = Vec::with_capacity(classes + spec.ood.clusters);
    for c in 0..classes + spec.ood.clusters {
        let reach = if c < classes {
            spec.cluster_separation
        } else {
            spec.cluster_separation * spec.ood.distance_factor
        };
        let dir = offset_direction(&mut rng, d);
        let mut m: Vec<f64> = dir.iter().map(|v| reach * v).collect();
        m[0] += 1.0;
        means.push(m);
    }

    let mut seed_rows = Vec::new();
    let mut seed_labels = Vec::new();
    for (c, &size) in class_sizes.iter().enumerate() {
        for _ in 0..size {
            seed_rows.extend(draw_point(&mut rng, &means[c], spec.intra_class_spread));
            seed_labels.push(c as i64);
        }
    }

    let seed_total: usize = class_sizes.iter().sum();
    let pool_in = libm::round(spec.pool_factor * seed_total as f64) as usize;
    let mut pool_labels = Vec::with_capacity(pool_in + spec.ood.clusters * spec.ood.size);
    for c in 0..classes {
        let count = pool_in / classes + usize::from(c < pool_in % classes);
        pool_labels.extend(std::iter::repeat_n(c as i64, count));
    }
    for o in 0..spec.ood.clusters {
        pool_labels.extend(std::iter::repeat_n((classes + o) as i64, spec.ood.size));
    }
    if pool_labels.is_empty() {
        return Err(Error::SpecInvalid("the pool would be empty".into()));
    }
    pool_labels.shuffle(&mut rng);
    let mut pool_rows = Vec::with_capacity(pool_labels.len() * d);
    for &l in &pool_labels {
        pool_rows.extend(draw_point(&mut rng, &means[l as usize], spec.intra_class_spread));
    }

    let expected = |label: i64| -> f64 {
        let ood = label as usize >= classes;
        match &spec.loss.mode {
            LossMode::SizeInverse { base, scale } => {
                let size = if ood { 1 } else { class_sizes[label as usize] };
                base + scale / math::sqrt(size as f64)
            }
            LossMode::Constant { value } => *value,
            LossMode::Custom {
                class_means,
                ood_mean,
            } => {
                if ood {
                    *ood_mean
                } else {
                    class_means[label as usize]
                }
            }
        }
    };
    let m = spec.loss.repeats;
    let mut raw = Vec::with_capacity(pool_labels.len() * m);
    for &l in &pool_labels {
        let z: f64 = StandardNormal.sample(&mut rng);
        let mean = expected(l) + spec.loss.sample_std * z;
        for _ in 0..m {
            let z: f64 = StandardNormal.sample(&mut rng);
            raw.push((mean + spec.loss.noise_std * z).max(0.0) as f32);
        }
    }

    let seed = EmbeddingSet::new(seed_labels.len(), d, seed_rows)?.with_labels(seed_labels)?;
    let pool = EmbeddingSet::new(pool_labels.len(), d, pool_rows)?.with_labels(pool_labels)?;
    Ok(Mixture {
        spec: spec.clone(),
        seed,
        pool,
        losses: LossTable::from_raw(raw, m)?,
        class_sizes,
        means: means.iter().map(|m| unit(m)).collect(),
    })
}

/// Simulated augmentation: each repeat draws two views of every point by
/// adding isotropic Gaussian noise of norm ≈ `view_noise` and
/// re-normalizing. Negatives are in-batch first views.
pub fn synthesize_views(
    points: &EmbeddingSet,
    repeats: usize,
    view_noise: f64,
    batch_size: usize,
    temperature: f64,
    seed: u64,
) -> Result<ViewLossInputs> {
    let d = points.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut views = Vec::with_capacity(points.n() * repeats * 2 * d);
    for r in points.rows() {
        let base: Vec<f64> = r.iter().map(|&v| v as f64).collect();
        for _ in 0..repeats * 2 {
            views.extend(draw_point(&mut rng, &base, view_noise));
        }
    }
    let bank = NegativeBank::in_batch(points.n(), repeats, batch_size, rng.random())?;
    ViewLossInputs::new(points.n(), repeats, d, views, bank, temperature)
}

/// φ-vs-M helper: regenerates `spec` with `max(ms)` repeats and returns
/// the table truncated to each requested repeat count.
pub fn repeat_sweep(spec: &MixtureSpec, ms: &[usize]) -> Result<(Mixture, Vec<LossTable>)> {
    let max = ms.iter().copied().max().ok_or(Error::SpecInvalid("empty repeat sweep".to_string()))?;
    let mut spec = spec.clone();
    spec.loss.repeats = max;
    let mix = generate_mixture(&spec)?;
    let tables = ms
        .iter()
        .map(|&m| mix.losses.truncated(m))
        .collect::<Result<Vec<_>>>()?;
    Ok((mix, tables))
}

//! Per-sample SimCLR loss and its expectation over augmentation draws (ECLE).
//!
//! Views and negatives arrive as embedding vectors; producing them
//! (augmentation, forward passes) happens upstream.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::dot;
use crate::{math, par};

/// Default softmax temperature.
pub const DEFAULT_TEMPERATURE: f64 = 0.5;
/// Default number of augmentation repeats averaged into ECLE.
pub const DEFAULT_REPEATS: usize = 10;
/// Default batch size for in-batch negatives.
pub const DEFAULT_BATCH_SIZE: usize = 256;

fn check_finite(v: &[f32]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(_) => Err(Error::NonFiniteValue { row: 0 }),
        None => Ok(()),
    }
}

/// Contrastive loss of the anchor `view1` against the positive `view2` and
/// a bank of negatives, in nats:
///
/// `−log[ e^{u₁·u₂/τ} / (e^{u₁·u₂/τ} + Σ_k e^{u₁·n_k/τ}) ]`
///
/// All vectors are L2-normalized internally. The sum is evaluated as a
/// running log-sum-exp so small temperatures do not overflow; the final
/// `log1p` keeps relative precision when the positive pair dominates.
pub fn simclr_loss<'a, I>(view1: &[f32], view2: &[f32], negatives: I, temperature: f64) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidTemperature(temperature));
    }
    let d = view1.len();
    if view2.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: view2.len(),
        });
    }
    check_finite(view1)?;
    check_finite(view2)?;
    let a_sq = dot(view1, view1);
    let p_sq = dot(view2, view2);
    if a_sq == 0.0 || p_sq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let logit = |v: &[f32], v_sq: f64| dot(view1, v) / math::sqrt(a_sq * v_sq) / temperature;
    let positive = logit(view2, p_sq);

    // running max, plus the other terms' mass rescaled by it
    let mut max = positive;
    let mut rest = 0.0f64;
    for neg in negatives {
        if neg.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: neg.len(),
            });
        }
        check_finite(neg)?;
        let n_sq = dot(neg, neg);
        if n_sq == 0.0 {
            return Err(Error::ZeroVector);
        }
        let z = logit(neg, n_sq);
        if z > max {
            rest = (rest + 1.0) * math::exp(max - z);
            max = z;
        } else {
            rest += math::exp(z - max);
        }
    }
    Ok((max - positive) + math::ln_1p(rest))
}

/// Where the negatives for each (sample, repeat) come from.
#[derive(Debug, Clone, PartialEq)]
pub enum NegativeBank {
    /// One bank of vectors (row-major) shared by every sample and repeat.
    Shared { vectors: Vec<f32> },
    /// A bank of vectors with an explicit index list per (sample, repeat),
    /// laid out as `lists[sample * repeats + repeat]`.
    PerPair {
        vectors: Vec<f32>,
        lists: Vec<Vec<u32>>,
    },
    /// For repeat `m`, samples are shuffled into batches and each sample's
    /// negatives are the first views of the other members of its batch.
    InBatch {
        /// `batches[m]` partitions the sample indices.
        batches: Vec<Vec<Vec<u32>>>,
        /// `batch_of[m * n + i]` is the batch of sample `i` in repeat `m`.
        batch_of: Vec<u32>,
    },
}

impl NegativeBank {
    /// Random in-batch negatives. Batches hold `batch_size` samples except
    /// that a trailing singleton batch is merged into its predecessor.
    pub fn in_batch(samples: usize, repeats: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size < 2 {
            return Err(Error::ConfigInvalid("batch size must be at least 2".into()));
        }
        if samples < 2 {
            return Err(Error::EmptyNegatives {
                sample: 0,
                repeat: 0,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<u32> = (0..samples as u32).collect();
        let mut batches = Vec::with_capacity(repeats);
        let mut batch_of = vec![0u32; samples * repeats];
        for m in 0..repeats {
            order.shuffle(&mut rng);
            let mut chunks: Vec<Vec<u32>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
            if chunks.len() > 1 && chunks.last().is_some_and(|c| c.len() == 1) {
                let tail = chunks.pop().unwrap();
                chunks.last_mut().unwrap().extend(tail);
            }
            for (b, chunk) in chunks.iter().enumerate() {
                for &i in chunk {
                    batch_of[m * samples + i as usize] = b as u32;
                }
            }
            batches.push(chunks);
        }
        Ok(NegativeBank::InBatch { batches, batch_of })
    }
}

/// Augmented-view embeddings for `n` samples × `M` repeats plus negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewLossInputs {
    samples: usize,
    repeats: usize,
    dim: usize,
    temperature: f64,
    /// Row-major `(sample, repeat, view) × dim`.
    views: Vec<f32>,
    negatives: NegativeBank,
}

impl ViewLossInputs {
    pub fn new(
        samples: usize,
        repeats: usize,
        dim: usize,
        views: Vec<f32>,
        negatives: NegativeBank,
        temperature: f64,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::EmptySet);
        }
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if repeats == 0 {
            return Err(Error::ConfigInvalid("repeat count must be at least 1".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidTemperature(temperature));
        }
        let expected = samples * repeats * 2 * dim;
        if views.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: views.len(),
            });
        }
        if let Some(pos) = views.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: pos / dim });
        }
        match &negatives {
            NegativeBank::Shared { vectors } => {
                if vectors.is_empty() {
                    return Err(Error::EmptyNegatives {
                        sample: 0,
                        repeat: 0,
                    });
                }
                check_bank(vectors, dim)?;
            }
            NegativeBank::PerPair { vectors, lists } => {
                check_bank(vectors, dim)?;
                if lists.len() != samples * repeats {
                    return Err(Error::LengthMismatch {
                        what: "negative lists",
                        expected: samples * repeats,
                        found: lists.len(),
                    });
                }
                let bank_rows = vectors.len() / dim;
                for (k, list) in lists.iter().enumerate() {
                    if list.is_empty() {
                        return Err(Error::EmptyNegatives {
                            sample: k / repeats,
                            repeat: k % repeats,
                        });
                    }
                    if let Some(&bad) = list.iter().find(|&&j| j as usize >= bank_rows) {
                        return Err(Error::IndexOutOfRange {
                            index: bad as usize,
                            len: bank_rows,
                        });
                    }
                }
            }
            NegativeBank::InBatch { batches, batch_of } => {
                if batches.len() != repeats || batch_of.len() != samples * repeats {
                    return Err(Error::LengthMismatch {
                        what: "in-batch assignment",
                        expected: samples * repeats,
                        found: batch_of.len(),
                    });
                }
                for (m, bs) in batches.iter().enumerate() {
                    let mut seen = vec![false; samples];
                    for b in bs {
                        for &i in b {
                            let i = i as usize;
                            if i >= samples || seen[i] {
                                return Err(Error::OverlappingIndex { index: i });
                            }
                            seen[i] = true;
                        }
                    }
                    if let Some(missing) = seen.iter().position(|s| !s) {
                        return Err(Error::EmptyNegatives {
                            sample: missing,
                            repeat: m,
                        });
                    }
                    for i in 0..samples {
                        let b = batch_of[m * samples + i] as usize;
                        if bs.get(b).is_none_or(|batch| !batch.contains(&(i as u32)))
                            || bs[b].len() < 2
                        {
                            return Err(Error::EmptyNegatives {
                                sample: i,
                                repeat: m,
                            });
                        }
                    }
                }
            }
        }
        Ok(Self {
            samples,
            repeats,
            dim,
            temperature,
            views,
            negatives,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn negatives(&self) -> &NegativeBank {
        &self.negatives
    }

    /// View `which` (0 or 1) of sample `i` at repeat `m`.
    pub fn view(&self, i: usize, m: usize, which: usize) -> &[f32] {
        let start = ((i * self.repeats + m) * 2 + which) * self.dim;
        &self.views[start..start + self.dim]
    }

    /// Negative vectors used for sample `i` at repeat `m`.
    pub fn negatives_for(&self, i: usize, m: usize) -> Vec<&[f32]> {
        let d = self.dim;
        match &self.negatives {
            NegativeBank::Shared { vectors } => vectors.chunks_exact(d).collect(),
            NegativeBank::PerPair { vectors, lists } => lists[i * self.repeats + m]
                .iter()
                .map(|&j| &vectors[j as usize * d..(j as usize + 1) * d])
                .collect(),
            NegativeBank::InBatch { batches, batch_of } => {
                let b = batch_of[m * self.samples + i] as usize;
                batches[m][b]
                    .iter()
                    .filter(|&&j| j as usize != i)
                    .map(|&j| self.view(j as usize, m, 0))
                    .collect()
            }
        }
    }
}

fn check_bank(vectors: &[f32], dim: usize) -> Result<()> {
    if !vectors.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: (vectors.len() / dim + 1) * dim,
            found: vectors.len(),
        });
    }
    if let Some(pos) = vectors.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue { row: pos / dim });
    }
    Ok(())
}

/// Slack for `f32` storage when checking that losses are non-negative and
/// that ECLE matches the per-repeat mean.
const LOSS_TOLERANCE: f64 = 1e-5;

/// Per-sample ECLE values and, optionally, the per-repeat losses behind
/// them. Stored as `f32` to match the on-disk format.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    ecle: Vec<f32>,
    raw: Option<Vec<f32>>,
    repeats: usize,
}

impl LossTable {
    pub fn new(ecle: Vec<f32>, raw: Option<Vec<f32>>, repeats: usize) -> Result<Self> {
        if repeats == 0 {
            return Err(Error::ConfigInvalid("repeat count must be at least 1".into()));
        }
        if let Some(row) = ecle.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row });
        }
        if let Some(raw) = &raw {
            if raw.len() != ecle.len() * repeats {
                return Err(Error::DimensionMismatch {
                    expected: ecle.len() * repeats,
                    found: raw.len(),
                });
            }
            if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { row: pos / repeats });
            }
            if let Some(pos) = raw.iter().position(|&v| (v as f64) < -LOSS_TOLERANCE) {
                return Err(Error::NegativeLoss { row: pos / repeats });
            }
            for (row, (r, &e)) in raw.chunks_exact(repeats).zip(&ecle).enumerate() {
                let mean = r.iter().map(|&v| v as f64).sum::<f64>() / repeats as f64;
                if (mean - e as f64).abs() > LOSS_TOLERANCE * mean.abs().max(1.0) {
                    return Err(Error::InconsistentLoss { row });
                }
            }
        }
        if let Some(row) = ecle.iter().position(|&v| (v as f64) < -LOSS_TOLERANCE) {
            return Err(Error::NegativeLoss { row });
        }
        Ok(Self { ecle, raw, repeats })
    }

    /// Builds a table whose ECLE is the row mean of `raw` (`n × repeats`).
    pub fn from_raw(raw: Vec<f32>, repeats: usize) -> Result<Self> {
        if repeats == 0 || !raw.len().is_multiple_of(repeats) {
            return Err(Error::ConfigInvalid(alloc::format!(
                "{} raw losses do not split into rows of {repeats}",
                raw.len()
            )));
        }
        let ecle = raw
            .chunks_exact(repeats)
            .map(|r| (r.iter().map(|&v| v as f64).sum::<f64>() / repeats as f64) as f32)
            .collect();
        Self::new(ecle, Some(raw), repeats)
    }

    /// Table built from ECLE values alone (no per-repeat losses).
    pub fn from_ecle(ecle: Vec<f32>, repeats: usize) -> Result<Self> {
        Self::new(ecle, None, repeats)
    }

    pub fn len(&self) -> usize {
        self.ecle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ecle.is_empty()
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn ecle(&self) -> &[f32] {
        &self.ecle
    }

    pub fn ecle_f64(&self) -> Vec<f64> {
        self.ecle.iter().map(|&v| v as f64).collect()
    }

    pub fn raw(&self) -> Option<&[f32]> {
        self.raw.as_deref()
    }

    pub fn raw_row(&self, i: usize) -> Option<&[f32]> {
        self.raw
            .as_ref()
            .map(|r| &r[i * self.repeats..(i + 1) * self.repeats])
    }

    /// Table re-averaged over the first `m` repeats only.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        let raw = self.raw.as_ref().ok_or(Error::ConfigInvalid(
            "per-repeat losses are needed to truncate repeats".into(),
        ))?;
        if m == 0 || m > self.repeats {
            return Err(Error::ConfigInvalid(alloc::format!(
                "cannot keep {m} of {} repeats",
                self.repeats
            )));
        }
        let kept = raw
            .chunks_exact(self.repeats)
            .flat_map(|r| r[..m].iter().copied())
            .collect();
        Self::from_raw(kept, m)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EcleOptions {
    /// Retain the `n × M` per-repeat losses.
    pub keep_raw: bool,
    /// Average the loss with both views taking the anchor role instead of
    /// using `view1` as the only anchor.
    pub symmetric: bool,
}

/// Per-repeat losses of sample `i`, in full precision.
pub fn repeat_losses(inputs: &ViewLossInputs, i: usize, symmetric: bool) -> Result<Vec<f64>> {
    if i >= inputs.samples {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: inputs.samples,
        });
    }
    let tau = inputs.temperature;
    (0..inputs.repeats)
        .map(|m| {
            let negs = inputs.negatives_for(i, m);
            let v1 = inputs.view(i, m, 0);
            let v2 = inputs.view(i, m, 1);
            let loss = simclr_loss(v1, v2, negs.iter().copied(), tau)?;
            if symmetric {
                Ok(0.5 * (loss + simclr_loss(v2, v1, negs.iter().copied(), tau)?))
            } else {
                Ok(loss)
            }
        })
        .collect()
}

/// Mean contrastive loss over the `M` view pairs of every sample.
pub fn ecle(inputs: &ViewLossInputs, options: EcleOptions) -> Result<LossTable> {
    let n = inputs.samples;
    let m_count = inputs.repeats;
    let rows = par::map_range(n, |i| repeat_losses(inputs, i, options.symmetric));
    let mut ecle = Vec::with_capacity(n);
    let mut raw = options.keep_raw.then(|| Vec::with_capacity(n * m_count));
    for row in rows {
        let row = row?;
        ecle.push((row.iter().sum::<f64>() / m_count as f64) as f32);
        if let Some(raw) = raw.as_mut() {
            raw.extend(row.iter().map(|&v| v as f32));
        }
    }
    LossTable::new(ecle, raw, m_count)
}

//! Distances and normalization shared by scoring and selection.
//!
//! All reductions accumulate in `f64` in ascending index order.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::Points;
use crate::error::{Error, Result};
use crate::{math, par};

/// Feature distance used for proximity and coverage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// `1 − cos(a, b)`, in `[0, 2]`.
    #[default]
    Cosine,
    /// `‖a − b‖₂`.
    Euclidean,
}

impl core::str::FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Distance::Cosine),
            "euclidean" => Ok(Distance::Euclidean),
            other => Err(Error::ConfigInvalid(alloc::format!(
                "unknown distance {other:?}"
            ))),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        acc += (*x as f64) * (*y as f64);
    }
    acc
}

#[inline]
fn sq_euclidean(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let t = *x as f64 - *y as f64;
        acc += t * t;
    }
    acc
}

impl Distance {
    /// Distance given precomputed squared norms. For cosine both norms must
    /// be nonzero.
    ///
    /// Identical rows give exactly 0 under cosine: `dot(a, a)` and the
    /// squared norm are computed by the same loop, and `sqrt(x·x) = x`.
    #[inline]
    pub(crate) fn with_norms(self, a: &[f32], b: &[f32], a_sq: f64, b_sq: f64) -> f64 {
        match self {
            Distance::Cosine => {
                let cos = dot(a, b) / math::sqrt(a_sq * b_sq);
                (1.0 - cos).clamp(0.0, 2.0)
            }
            Distance::Euclidean => math::sqrt(sq_euclidean(a, b)),
        }
    }
}

/// Distance between two vectors.
pub fn distance(a: &[f32], b: &[f32], metric: Distance) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (a_sq, b_sq) = (dot(a, a), dot(b, b));
    if metric == Distance::Cosine && (a_sq == 0.0 || b_sq == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(metric.with_norms(a, b, a_sq, b_sq))
}

/// A point collection with its squared row norms cached.
pub(crate) struct Prepared<'a, P: Points + ?Sized> {
    pub points: &'a P,
    pub sq_norms: Vec<f64>,
    pub metric: Distance,
}

impl<'a, P: Points + ?Sized> Prepared<'a, P> {
    pub fn new(points: &'a P, metric: Distance) -> Result<Self> {
        let sq_norms = par::map_range(points.len(), |i| {
            let r = points.row(i);
            dot(r, r)
        });
        if metric == Distance::Cosine && sq_norms.contains(&0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            points,
            sq_norms,
            metric,
        })
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.metric.with_norms(
            self.points.row(i),
            self.points.row(j),
            self.sq_norms[i],
            self.sq_norms[j],
        )
    }

    #[inline]
    pub fn dist_to<Q: Points + ?Sized>(&self, i: usize, other: &Prepared<'_, Q>, j: usize) -> f64 {
        self.metric.with_norms(
            self.points.row(i),
            other.points.row(j),
            self.sq_norms[i],
            other.sq_norms[j],
        )
    }
}

/// For each query row, the distance to its nearest reference row.
pub fn nearest_distances<Q, R>(queries: &Q, references: &R, metric: Distance) -> Result<Vec<f64>>
where
    Q: Points + ?Sized,
    R: Points + ?Sized,
{
    if references.is_empty() {
        return Err(Error::EmptySet);
    }
    if queries.dim() != references.dim() {
        return Err(Error::DimensionMismatch {
            expected: references.dim(),
            found: queries.dim(),
        });
    }
    let q = Prepared::new(queries, metric)?;
    let r = Prepared::new(references, metric)?;
    Ok(par::map_range(queries.len(), |i| {
        let mut best = f64::INFINITY;
        for j in 0..references.len() {
            let d = q.dist_to(i, &r, j);
            if d < best {
                best = d;
            }
        }
        best
    }))
}

/// Output of [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: Vec<f64>,
    /// Set when the input was constant or had fewer than two entries; the
    /// values are then all zero.
    pub degenerate: bool,
}

/// `(v − mean(v)) / std(v)` with the population standard deviation.
pub fn standardize(values: &[f64]) -> Standardized {
    let n = values.len();
    let degenerate = Standardized {
        values: vec![0.0; n],
        degenerate: true,
    };
    if n < 2 || values.iter().all(|&v| v == values[0]) {
        return degenerate;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = math::sqrt(var);
    if !(std > 0.0 && std.is_finite()) {
        return degenerate;
    }
    Standardized {
        values: values.iter().map(|v| (v - mean) / std).collect(),
        degenerate: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingSet;
    use proptest::prelude::*;

    #[test]
    fn cosine_reference_values() {
        let c = Distance::Cosine;
        assert_eq!(distance(&[1.0, 0.0], &[1.0, 0.0], c).unwrap(), 0.0);
        assert_eq!(distance(&[1.0, 0.0], &[0.0, 1.0], c).unwrap(), 1.0);
        assert_eq!(distance(&[1.0, 0.0], &[-1.0, 0.0], c).unwrap(), 2.0);
        assert_eq!(distance(&[0.0, 0.0], &[1.0, 0.0], c), Err(Error::ZeroVector));
        assert!(matches!(
            distance(&[1.0], &[1.0, 0.0], c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn euclidean_reference_values() {
        let e = Distance::Euclidean;
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0], e).unwrap(), 5.0);
        assert_eq!(distance(&[0.0, 0.0], &[0.0, 0.0], e).unwrap(), 0.0);
    }

    #[test]
    fn standardize_small_cases() {
        let s = standardize(&[1.0, 2.0, 3.0]);
        assert!(!s.degenerate);
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((s.values[0] + 1.2247).abs() < 1e-4);
        assert!((s.values[0] + expect).abs() < 1e-12);
        assert_eq!(s.values[1], 0.0);
        assert!((s.values[2] - expect).abs() < 1e-12);

        let again = standardize(&s.values);
        for (a, b) in again.values.iter().zip(&s.values) {
            assert!((a - b).abs() < 1e-12);
        }

        let flat = standardize(&[5.0, 5.0, 5.0]);
        assert!(flat.degenerate);
        assert_eq!(flat.values, vec![0.0; 3]);
        assert!(standardize(&[1.0]).degenerate);
    }

    #[test]
    fn nearest_distance_special_cases() {
        let refs = EmbeddingSet::from_rows(&[[1.0f32, 2.0], [0.5, -1.0]]).unwrap();
        let q = EmbeddingSet::from_rows(&[[0.5f32, -1.0], [3.0, 1.0]]).unwrap();
        let d = nearest_distances(&q, &refs, Distance::Cosine).unwrap();
        assert_eq!(d[0], 0.0);

        let single = EmbeddingSet::from_rows(&[[1.0f32, 2.0]]).unwrap();
        let d = nearest_distances(&q, &single, Distance::Euclidean).unwrap();
        assert_eq!(d[1], distance(q.row(1), single.row(0), Distance::Euclidean).unwrap());
    }

    fn vecs(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
        prop::collection::vec(prop::collection::vec(-1.0f32..1.0, d), n)
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(a in prop::collection::vec(-1.0f32..1.0, 6),
                                     b in prop::collection::vec(-1.0f32..1.0, 6),
                                     exponent in -20i32..20) {
            prop_assume!(dot(&a, &a) > 1e-6 && dot(&b, &b) > 1e-6);
            // power-of-two scales are exact in f32
            let scale = 2f32.powi(exponent);
            let scaled: Vec<f32> = a.iter().map(|v| v * scale).collect();
            let base = distance(&a, &b, Distance::Cosine).unwrap();
            let moved = distance(&scaled, &b, Distance::Cosine).unwrap();
            prop_assert!((base - moved).abs() <= 1e-9);
            prop_assert!((0.0..=2.0).contains(&base));
            let sym = distance(&b, &a, Distance::Cosine).unwrap();
            prop_assert_eq!(base, sym);
        }

        #[test]
        fn standardize_moments(v in prop::collection::vec(-1e3f64..1e3, 2..64)) {
            let s = standardize(&v);
            prop_assume!(!s.degenerate);
            let n = v.len() as f64;
            let mean = s.values.iter().sum::<f64>() / n;
            let var = s.values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            prop_assert!(mean.abs() <= 1e-9);
            prop_assert!((var.sqrt() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn standardize_absorbs_affine_maps(v in prop::collection::vec(-10f64..10.0, 2..64),
                                           scale in 0.1f64..10.0, shift in -100f64..100.0) {
            let s = standardize(&v);
            prop_assume!(!s.degenerate);
            let moved: Vec<f64> = v.iter().map(|x| scale * x + shift).collect();
            let t = standardize(&moved);
            for (a, b) in s.values.iter().zip(&t.values) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn nearest_matches_double_loop(q in vecs(7, 4), r in vecs(5, 4)) {
            prop_assume!(q.iter().chain(&r).all(|x| dot(x, x) > 1e-6));
            let qs = EmbeddingSet::from_rows(&q).unwrap();
            let rs = EmbeddingSet::from_rows(&r).unwrap();
            for metric in [Distance::Cosine, Distance::Euclidean] {
                let got = nearest_distances(&qs, &rs, metric).unwrap();
                for (i, a) in q.iter().enumerate() {
                    let mut best = f64::INFINITY;
                    for b in &r {
                        best = best.min(distance(a, b, metric).unwrap());
                    }
                    prop_assert_eq!(got[i], best);
                }
            }
        }
    }
}

//! Immutable embedding matrices.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Which side of the selection problem a set of embeddings belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    /// The initial (imbalanced) training set.
    Seed,
    /// The external unlabeled candidates.
    Pool,
}

impl core::fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            DatasetRole::Seed => "seed",
            DatasetRole::Pool => "pool",
        })
    }
}

/// Row access shared by every distance-based routine.
pub trait Points: Sync {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn row(&self, i: usize) -> &[f32];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An `n × d` matrix of `f32` features, row-major, with optional ids and
/// evaluation-only labels.
///
/// Every scalar is finite, `n ≥ 1` and `d ≥ 1`. Rows are stored exactly as
/// given; normalization is up to the consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    n: usize,
    d: usize,
    data: Vec<f32>,
    ids: Option<Vec<String>>,
    labels: Option<Vec<i64>>,
}

impl EmbeddingSet {
    pub fn new(n: usize, d: usize, data: Vec<f32>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySet);
        }
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        let expected = n.checked_mul(d).ok_or(Error::DimensionMismatch {
            expected: usize::MAX,
            found: data.len(),
        })?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { row: pos / d });
        }
        Ok(Self {
            n,
            d,
            data,
            ids: None,
            labels: None,
        })
    }

    /// Builds a set from equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptySet)?;
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), d, data)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "ids",
                expected: self.n,
                found: ids.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for (row, id) in ids.iter().enumerate() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId {
                    id: id.clone(),
                    row,
                });
            }
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Copy of the given rows (ids and labels follow along).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.n,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        let mut out = Self::new(indices.len(), self.d, data)?;
        if let Some(ids) = &self.ids {
            out.ids = Some(indices.iter().map(|&i| ids[i].clone()).collect());
        }
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i]).collect());
        }
        Ok(out)
    }

    /// Copy with every row scaled to unit L2 norm. Zero rows stay zero.
    pub fn normalized(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for r in self.rows() {
            let norm = math::sqrt(r.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>());
            if norm > 0.0 {
                data.extend(r.iter().map(|&v| (v as f64 / norm) as f32));
            } else {
                data.extend_from_slice(r);
            }
        }
        Self {
            n: self.n,
            d: self.d,
            data,
            ids: self.ids.clone(),
            labels: self.labels.clone(),
        }
    }
}

impl Points for EmbeddingSet {
    fn len(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn row(&self, i: usize) -> &[f32] {
        EmbeddingSet::row(self, i)
    }
}

/// Two sets viewed as one: rows of `first` followed by rows of `second`.
/// Used for `S_all = seed ∪ pool` without copying.
#[derive(Debug, Clone, Copy)]
pub struct Stacked<'a> {
    pub first: &'a EmbeddingSet,
    pub second: &'a EmbeddingSet,
}

impl<'a> Stacked<'a> {
    pub fn new(first: &'a EmbeddingSet, second: &'a EmbeddingSet) -> Result<Self> {
        if first.dim() != second.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: second.dim(),
            });
        }
        Ok(Self { first, second })
    }

    /// Index into the stacked view of row `i` of `second`.
    pub fn second_offset(&self) -> usize {
        self.first.n()
    }
}

impl Points for Stacked<'_> {
    fn len(&self) -> usize {
        self.first.n() + self.second.n()
    }

    fn dim(&self) -> usize {
        self.first.dim()
    }

    fn row(&self, i: usize) -> &[f32] {
        let n0 = self.first.n();
        if i < n0 {
            self.first.row(i)
        } else {
            self.second.row(i - n0)
        }
    }
}

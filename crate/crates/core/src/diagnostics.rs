//! Group balance, tailness and spread diagnostics for selections.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::contrastive::LossTable;
use crate::embedding::{EmbeddingSet, Points};
use crate::error::{Error, Result};
use crate::math;
use crate::metric::{Distance, Prepared};
use crate::selection::{ObjectiveTerms, Scoring, SelectionConfig, Strategy, Terms};
use crate::synth::Mixture;

/// Class-size group of a seed class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// More than 100 seed samples.
    Many,
    /// 20 to 100 seed samples.
    Medium,
    /// Fewer than 20 seed samples.
    Few,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Many, Group::Medium, Group::Few];

    pub fn of_size(size: usize) -> Group {
        if size > 100 {
            Group::Many
        } else if size < 20 {
            Group::Few
        } else {
            Group::Medium
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::Many => "many",
            Group::Medium => "medium",
            Group::Few => "few",
        }
    }
}

/// Maps class labels to groups. Labels without an entry (for instance OoD
/// distractors) belong to no group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub classes: BTreeMap<i64, Group>,
}

impl GroupPartition {
    pub fn from_class_sizes<I: IntoIterator<Item = (i64, usize)>>(sizes: I) -> Self {
        Self {
            classes: sizes
                .into_iter()
                .map(|(label, size)| (label, Group::of_size(size)))
                .collect(),
        }
    }

    /// Partition from the label column of a seed set.
    pub fn from_seed_labels(labels: &[i64]) -> Self {
        let mut counts = BTreeMap::new();
        for &l in labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        Self::from_class_sizes(counts)
    }

    pub fn group_of(&self, label: i64) -> Option<Group> {
        self.classes.get(&label).copied()
    }
}

/// `φ_g = (share of group g among the top-loss samples) / (share of g in
/// the data)`, over the samples whose label has a group.
///
/// The top set holds `⌈top_fraction · n⌉` samples ranked by ECLE (ties to
/// the lowest index). Groups with no samples are left out.
pub fn phi_metric(
    losses: &LossTable,
    labels: &[i64],
    partition: &GroupPartition,
    top_fraction: f64,
) -> Result<BTreeMap<Group, f64>> {
    if labels.len() != losses.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: losses.len(),
            found: labels.len(),
        });
    }
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::ConfigInvalid(alloc::format!(
            "top fraction must lie in (0, 1), got {top_fraction}"
        )));
    }
    let ecle = losses.ecle();
    let mut members: Vec<(usize, Group)> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| partition.group_of(l).map(|g| (i, g)))
        .collect();
    let n = members.len();
    let mut out = BTreeMap::new();
    if n == 0 {
        return Ok(out);
    }
    members.sort_by(|a, b| ecle[b.0].total_cmp(&ecle[a.0]).then(a.0.cmp(&b.0)));
    let top = math::ceil_count(top_fraction * n as f64).clamp(1, n);
    for g in Group::ALL {
        let total = members.iter().filter(|m| m.1 == g).count();
        if total == 0 {
            continue;
        }
        let in_top = members[..top].iter().filter(|m| m.1 == g).count();
        out.insert(g, (in_top as f64 / top as f64) / (total as f64 / n as f64));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDiagnostics {
    pub selected: usize,
    /// Fraction of the selection in each group (OoD counts toward none).
    pub group_shares: BTreeMap<Group, f64>,
    pub pool_group_shares: BTreeMap<Group, f64>,
    /// Fraction of the selection whose label has no group.
    pub ood_fraction: f64,
    pub pool_ood_fraction: f64,
    /// Mean cosine distance over all pairs of selected rows.
    pub mean_pairwise_cosine: f64,
    /// Largest distance from a pool row to its nearest selected row; `None`
    /// for an empty selection.
    pub covering_radius: Option<f64>,
}

fn shares(indices: &[usize], labels: &[i64], partition: &GroupPartition) -> (BTreeMap<Group, f64>, f64) {
    let mut counts: BTreeMap<Group, usize> = Group::ALL.iter().map(|&g| (g, 0)).collect();
    let mut ood = 0usize;
    for &i in indices {
        match partition.group_of(labels[i]) {
            Some(g) => *counts.get_mut(&g).unwrap() += 1,
            None => ood += 1,
        }
    }
    let n = indices.len().max(1) as f64;
    (
        counts.into_iter().map(|(g, c)| (g, c as f64 / n)).collect(),
        ood as f64 / n,
    )
}

/// Group balance and spread of `selection` within `pool`.
pub fn selection_diagnostics(
    selection: &[usize],
    pool_labels: &[i64],
    pool: &EmbeddingSet,
    partition: &GroupPartition,
) -> Result<SelectionDiagnostics> {
    if pool_labels.len() != pool.n() {
        return Err(Error::LengthMismatch {
            what: "pool labels",
            expected: pool.n(),
            found: pool_labels.len(),
        });
    }
    crate::selection::check_selection(pool.n(), selection)?;
    // sorted so that the same set gives bit-identical sums in any pick order
    let mut sorted = selection.to_vec();
    sorted.sort_unstable();
    let selection = &sorted[..];
    let everything: Vec<usize> = (0..pool.n()).collect();
    let (group_shares, ood_fraction) = shares(selection, pool_labels, partition);
    let (pool_group_shares, pool_ood_fraction) = shares(&everything, pool_labels, partition);

    let cosine = Prepared::new(pool, Distance::Cosine)?;
    let k = selection.len();
    let mean_pairwise_cosine = if k < 2 {
        0.0
    } else {
        let per_row = crate::par::map_range(k, |a| {
            let mut s = 0.0;
            for b in a + 1..k {
                s += cosine.dist(selection[a], selection[b]);
            }
            s
        });
        per_row.iter().sum::<f64>() / (k * (k - 1) / 2) as f64
    };
    let covering_radius = (k > 0).then(|| {
        crate::par::map_range(pool.n(), |i| {
            selection
                .iter()
                .map(|&j| cosine.dist(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .into_iter()
        .fold(0.0, f64::max)
    });
    Ok(SelectionDiagnostics {
        selected: k,
        group_shares,
        pool_group_shares,
        ood_fraction,
        pool_ood_fraction,
        mean_pairwise_cosine,
        covering_radius,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub selected: Vec<usize>,
    pub diagnostics: SelectionDiagnostics,
    pub objective: ObjectiveTerms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config: SelectionConfig,
    pub rows: Vec<StrategyRow>,
    /// φ per group over the pool's in-distribution samples (top 10%).
    pub phi: BTreeMap<Group, f64>,
}

impl Comparison {
    pub fn row(&self, strategy: Strategy) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }
}

/// Strategies compared by [`compare_strategies`], in table order. The
/// diversity-only ablation is the `kcenter` row.
pub const COMPARED_STRATEGIES: [Strategy; 6] = [
    Strategy::Random,
    Strategy::KCENTER,
    Strategy::Terms(Terms {
        tailness: true,
        proximity: false,
        diversity: false,
    }),
    Strategy::Terms(Terms {
        tailness: false,
        proximity: true,
        diversity: false,
    }),
    Strategy::Terms(Terms {
        tailness: true,
        proximity: true,
        diversity: false,
    }),
    Strategy::MAK,
];

/// Runs the baselines, the ablations and MAK on one scene.
pub fn compare_strategies(scene: &Mixture, cfg: &SelectionConfig) -> Result<Comparison> {
    let seed = scene.seed.clone().without_labels();
    let pool = scene.pool.clone().without_labels();
    let labels = scene.pool_labels();
    let partition = scene.partition();
    let scoring = Scoring::prepare(&seed, &pool, &scene.losses, cfg)?;
    let mut rows = Vec::with_capacity(COMPARED_STRATEGIES.len());
    for strategy in COMPARED_STRATEGIES {
        let res = scoring.select(strategy)?;
        let diagnostics = selection_diagnostics(&res.selected, labels, &pool, &partition)?;
        rows.push(StrategyRow {
            strategy,
            selected: res.selected,
            diagnostics,
            objective: res.objective,
        });
    }
    Ok(Comparison {
        config: cfg.clone(),
        rows,
        phi: phi_metric(&scene.losses, labels, &partition, 0.10)?,
    })
}

/// Projection of the rows onto their top two principal axes (power
/// iteration with deflation on the covariance matrix).
pub fn pca_2d<P: Points + ?Sized>(points: &P) -> Vec<[f64; 2]> {
    let n = points.len();
    let d = points.dim();
    if n == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0f64; d];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(points.row(i)) {
            *m += *v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0f64; d * d];
    for i in 0..n {
        let r: Vec<f64> = points.row(i).iter().zip(&mean).map(|(v, m)| *v as f64 - m).collect();
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += r[a] * r[b];
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n as f64);

    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(2);
    for _ in 0..2.min(d) {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + i as f64 / d as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let mut w = vec![0.0; d];
            for a in 0..d {
                for b in 0..d {
                    w[a] += cov[a * d + b] * v[b];
                }
            }
            let norm = math::sqrt(w.iter().map(|x| x * x).sum());
            if norm == 0.0 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = w;
            lambda = norm;
            if delta < 1e-12 {
                break;
            }
        }
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] -= lambda * v[a] * v[b];
            }
        }
        axes.push(v);
    }
    (0..n)
        .map(|i| {
            let r = points.row(i);
            let mut out = [0.0; 2];
            for (k, axis) in axes.iter().enumerate() {
                out[k] = r
                    .iter()
                    .zip(&mean)
                    .zip(axis)
                    .map(|((v, m), a)| (*v as f64 - m) * a)
                    .sum();
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_thresholds() {
        assert_eq!(Group::of_size(101), Group::Many);
        assert_eq!(Group::of_size(100), Group::Medium);
        assert_eq!(Group::of_size(20), Group::Medium);
        assert_eq!(Group::of_size(19), Group::Few);
    }

    #[test]
    fn phi_extremes() {
        // 10 samples; label 2 (Few) is 10% and holds the single top sample
        let labels = [0, 0, 0, 0, 0, 1, 1, 1, 1, 2];
        let mut ecle = vec![0.1f32; 10];
        ecle[9] = 5.0;
        let losses = LossTable::from_ecle(ecle, 1).unwrap();
        let part = GroupPartition::from_class_sizes([(0, 500), (1, 50), (2, 5)]);
        let phi = phi_metric(&losses, &labels, &part, 0.10).unwrap();
        assert_eq!(phi[&Group::Few], 10.0);
        assert_eq!(phi[&Group::Many], 0.0);

        // proportional top set
        let labels = [0, 1, 0, 1];
        let losses = LossTable::from_ecle(vec![4.0, 3.0, 1.0, 0.5], 1).unwrap();
        let part = GroupPartition::from_class_sizes([(0, 500), (1, 5)]);
        let phi = phi_metric(&losses, &labels, &part, 0.5).unwrap();
        assert_eq!(phi[&Group::Many], 1.0);
        assert_eq!(phi[&Group::Few], 1.0);
        assert!(!phi.contains_key(&Group::Medium));
    }

    #[test]
    fn antipodal_pair_spread() {
        let pool = EmbeddingSet::from_rows(&[[1.0f32, 0.0], [-1.0, 0.0], [0.0, 1.0]]).unwrap();
        let part = GroupPartition::from_class_sizes([(0, 5)]);
        let d = selection_diagnostics(&[0, 1], &[0, 0, 7], &pool, &part).unwrap();
        assert_eq!(d.mean_pairwise_cosine, 2.0);
        assert_eq!(d.covering_radius, Some(1.0));
        assert_eq!(d.pool_ood_fraction, 1.0 / 3.0);
        assert_eq!(d.ood_fraction, 0.0);
    }

    #[test]
    fn whole_pool_matches_pool_shares() {
        let pool = EmbeddingSet::from_rows(&[[1.0f32, 0.0], [0.5, 0.5], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let part = GroupPartition::from_class_sizes([(0, 500), (1, 50), (2, 5)]);
        let d = selection_diagnostics(&[3, 2, 1, 0], &[0, 1, 2, 9], &pool, &part).unwrap();
        assert_eq!(d.group_shares, d.pool_group_shares);
        assert_eq!(d.ood_fraction, d.pool_ood_fraction);
    }

    #[test]
    fn pca_finds_the_long_axis() {
        let rows: Vec<[f32; 2]> = (0..20).map(|i| [i as f32, 0.1 * ((i % 3) as f32)]).collect();
        let set = EmbeddingSet::from_rows(&rows).unwrap();
        let proj = pca_2d(&set);
        let spread0 = proj.iter().map(|p| p[0] * p[0]).sum::<f64>();
        let spread1 = proj.iter().map(|p| p[1] * p[1]).sum::<f64>();
        assert!(spread0 > 100.0 * spread1);
    }
}

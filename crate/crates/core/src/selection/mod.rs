//! The selection engine.
//!
//! [`Scoring`] holds everything derived once per (seed, pool, losses,
//! config): the raw and standardized tailness and proximity signals, the
//! combined score `q`, and every row's distance to the seed set. Each
//! [`Strategy`] is then a cheap pass over that state.
//!
//! MAK itself runs in three steps:
//!
//! 1. `q_i = α·N(ecle_i) − (1−α)·N(proximity_i)` with `N` the population
//!    z-score over the pool;
//! 2. the top `C = ⌈candidate_factor·K⌉` pool samples by `q` form the
//!    candidate set;
//! 3. K-center greedy, starting from every seed row, picks `K` of them.

mod kcenter;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use kcenter::{covering_radius, kcenter_exact, kcenter_greedy, ExactCover, EXACT_SUBSET_LIMIT};

use crate::contrastive::LossTable;
use crate::embedding::{EmbeddingSet, Points, Stacked};
use crate::error::{Error, Result, Warning};
use crate::math;
use crate::metric::{nearest_distances, standardize, Distance, Prepared, Standardized};
use crate::prototypes::{kmeans, PrototypeSet, DEFAULT_CLUSTERS, DEFAULT_MAX_ITERS};

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_CANDIDATE_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Number of pool samples to select.
    pub budget: usize,
    /// Weight of tailness against proximity in `q`, in `(0, 1)`.
    pub alpha: f64,
    /// Candidate set size as a multiple of the budget; must exceed 1.
    pub candidate_factor: f64,
    /// Number of seed prototypes for the proximity term.
    pub kmeans_k: usize,
    pub kmeans_max_iters: usize,
    pub distance: Distance,
    pub rng_seed: u64,
    /// Measure proximity against k-means prototypes instead of every seed row.
    pub use_prototypes: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            budget: 0,
            alpha: DEFAULT_ALPHA,
            candidate_factor: DEFAULT_CANDIDATE_FACTOR,
            kmeans_k: DEFAULT_CLUSTERS,
            kmeans_max_iters: DEFAULT_MAX_ITERS,
            distance: Distance::Cosine,
            rng_seed: 0,
            use_prototypes: true,
        }
    }
}

impl SelectionConfig {
    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.candidate_factor > 1.0 && self.candidate_factor.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "candidate factor must exceed 1, got {}",
                self.candidate_factor
            )));
        }
        if self.kmeans_k == 0 || self.kmeans_max_iters == 0 {
            return Err(Error::ConfigInvalid(
                "k-means needs at least one cluster and one iteration".into(),
            ));
        }
        if self.budget > pool_size {
            return Err(Error::BudgetExceedsPool {
                budget: self.budget,
                pool: pool_size,
            });
        }
        Ok(())
    }

    /// Candidate set size, clamped to the pool; the flag is set when clamped.
    pub fn candidate_count(&self, pool_size: usize) -> (usize, bool) {
        let c = math::ceil_count(self.candidate_factor * self.budget as f64);
        if c > pool_size {
            (pool_size, true)
        } else {
            (c, false)
        }
    }
}

/// Which of the three selection principles a strategy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Terms {
    pub tailness: bool,
    pub proximity: bool,
    pub diversity: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        tailness: true,
        proximity: true,
        diversity: true,
    };
}

impl core::fmt::Display for Terms {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let mut parts = Vec::new();
        if self.tailness {
            parts.push("tailness");
        }
        if self.proximity {
            parts.push("proximity");
        }
        if self.diversity {
            parts.push("diversity");
        }
        f.write_str(&parts.join("+"))
    }
}

impl core::str::FromStr for Terms {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut t = Terms {
            tailness: false,
            proximity: false,
            diversity: false,
        };
        for part in s.split('+') {
            let slot = match part.trim() {
                "tailness" => &mut t.tailness,
                "proximity" => &mut t.proximity,
                "diversity" => &mut t.diversity,
                other => {
                    return Err(Error::ConfigInvalid(format!("unknown term {other:?}")));
                }
            };
            if *slot {
                return Err(Error::ConfigInvalid(format!("term {part:?} repeated")));
            }
            *slot = true;
        }
        Ok(t)
    }
}

/// A selection rule over a prepared [`Scoring`].
///
/// Term combinations behave as follows: tailness and proximity together
/// rank by `q`, alone by the standardized ECLE or by closeness to the seed.
/// With diversity, the top-`C` of that ranking (or the whole pool when no
/// ranking term is present) feeds K-center greedy; without it the top `K`
/// are taken directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Random,
    Terms(Terms),
}

impl Strategy {
    pub const MAK: Strategy = Strategy::Terms(Terms::ALL);
    pub const KCENTER: Strategy = Strategy::Terms(Terms {
        tailness: false,
        proximity: false,
        diversity: true,
    });
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match *self {
            Strategy::Random => f.write_str("random"),
            s if s == Strategy::MAK => f.write_str("mak"),
            s if s == Strategy::KCENTER => f.write_str("kcenter"),
            Strategy::Terms(t) => write!(f, "ablation:{t}"),
        }
    }
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "mak" => Ok(Strategy::MAK),
            "kcenter" => Ok(Strategy::KCENTER),
            _ => match s.strip_prefix("ablation:") {
                Some(terms) => Ok(Strategy::Terms(terms.parse()?)),
                None => Err(Error::ConfigInvalid(format!("unknown strategy {s:?}"))),
            },
        }
    }
}

impl Serialize for Strategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Strategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The three terms of the MAK objective at a given selection:
/// `Σ ECLE − D − H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    /// Sum of ECLE over the selection.
    pub tailness: f64,
    /// Mean distance from each selected sample to its nearest seed row (or
    /// prototype). Reported as 0 for an empty selection.
    pub proximity: f64,
    pub proximity_defined: bool,
    /// Covering radius of `selection ∪ seed` over `seed ∪ pool`.
    pub coverage_radius: f64,
}

impl ObjectiveTerms {
    pub fn value(&self) -> f64 {
        self.tailness - self.proximity - self.coverage_radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub strategy: Strategy,
    /// Pool indices in pick order.
    pub selected: Vec<usize>,
    /// Gated candidate set, best first; empty when no gating happened.
    pub candidates: Vec<usize>,
    pub score_q: Vec<f64>,
    pub tailness_component: Vec<f64>,
    pub proximity_component: Vec<f64>,
    pub raw_tailness: Vec<f64>,
    pub raw_proximity: Vec<f64>,
    pub objective: ObjectiveTerms,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<Warning>,
}

/// Per-pool signals and seed coverage shared by every strategy.
#[derive(Debug, Clone)]
pub struct Scoring<'a> {
    seed: &'a EmbeddingSet,
    pool: &'a EmbeddingSet,
    cfg: SelectionConfig,
    raw_tailness: Vec<f64>,
    raw_proximity: Vec<f64>,
    tailness: Standardized,
    proximity: Standardized,
    q: Vec<f64>,
    prototypes: Option<PrototypeSet>,
    /// Distance from every row of `seed ∪ pool` to its nearest seed row.
    seed_cover: Vec<f64>,
    warnings: Vec<Warning>,
}

/// Per-sample proximity: distance from each pool row to its nearest
/// reference row (seed rows or prototypes).
pub fn proximity_scores(
    pool: &EmbeddingSet,
    references: &EmbeddingSet,
    metric: Distance,
) -> Result<Vec<f64>> {
    nearest_distances(pool, references, metric)
}

impl<'a> Scoring<'a> {
    /// Computes proximity (against prototypes when configured) and combines
    /// it with the ECLE column of `losses`.
    pub fn prepare(
        seed: &'a EmbeddingSet,
        pool: &'a EmbeddingSet,
        losses: &LossTable,
        cfg: &SelectionConfig,
    ) -> Result<Self> {
        if losses.len() != pool.n() {
            return Err(Error::LengthMismatch {
                what: "loss table",
                expected: pool.n(),
                found: losses.len(),
            });
        }
        cfg.validate(pool.n())?;
        Stacked::new(seed, pool)?;
        let (prototypes, raw_proximity) = if cfg.use_prototypes {
            let protos = kmeans(seed, cfg.kmeans_k, cfg.kmeans_max_iters, cfg.rng_seed)?;
            let prox = proximity_scores(pool, &protos.centers, cfg.distance)?;
            (Some(protos), prox)
        } else {
            (None, proximity_scores(pool, seed, cfg.distance)?)
        };
        let mut s = Self::from_signals(seed, pool, losses.ecle_f64(), raw_proximity, cfg)?;
        if let Some(p) = &prototypes {
            s.warnings.splice(0..0, p.warnings.iter().cloned());
        }
        s.prototypes = prototypes;
        Ok(s)
    }

    /// Builds the scoring state from raw per-pool tailness and proximity
    /// values supplied by the caller.
    pub fn from_signals(
        seed: &'a EmbeddingSet,
        pool: &'a EmbeddingSet,
        raw_tailness: Vec<f64>,
        raw_proximity: Vec<f64>,
        cfg: &SelectionConfig,
    ) -> Result<Self> {
        cfg.validate(pool.n())?;
        for (what, v) in [("tailness", &raw_tailness), ("proximity", &raw_proximity)] {
            if v.len() != pool.n() {
                return Err(Error::LengthMismatch {
                    what,
                    expected: pool.n(),
                    found: v.len(),
                });
            }
            if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteValue { row });
            }
        }
        let all = Stacked::new(seed, pool)?;
        let mut warnings = Vec::new();
        let tailness = standardize(&raw_tailness);
        let proximity = standardize(&raw_proximity);
        for (name, s) in [("tailness", &tailness), ("proximity", &proximity)] {
            if s.degenerate {
                warnings.push(Warning::DegenerateDistribution {
                    signal: name.to_string(),
                });
            }
        }
        let a = cfg.alpha;
        let q = tailness
            .values
            .iter()
            .zip(&proximity.values)
            .map(|(t, p)| a * t - (1.0 - a) * p)
            .collect();

        let prepared = Prepared::new(&all, cfg.distance)?;
        let rows: Vec<usize> = (0..all.len()).collect();
        let seed_rows: Vec<usize> = (0..seed.n()).collect();
        let seed_cover = kcenter::min_to_centers(&prepared, &rows, &seed_rows);

        Ok(Self {
            seed,
            pool,
            cfg: cfg.clone(),
            raw_tailness,
            raw_proximity,
            tailness,
            proximity,
            q,
            prototypes: None,
            seed_cover,
            warnings,
        })
    }

    pub fn config(&self) -> &SelectionConfig {
        &self.cfg
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn raw_proximity(&self) -> &[f64] {
        &self.raw_proximity
    }

    pub fn raw_tailness(&self) -> &[f64] {
        &self.raw_tailness
    }

    pub fn prototypes(&self) -> Option<&PrototypeSet> {
        self.prototypes.as_ref()
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Covering radius of the seed set alone over `seed ∪ pool`.
    pub fn seed_radius(&self) -> f64 {
        self.seed_cover.iter().copied().fold(0.0, f64::max)
    }

    /// Pool indices ordered by descending score; ties by lowest index.
    fn ranking(&self, score: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..score.len()).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        order
    }

    fn score_for(&self, terms: Terms) -> Option<Vec<f64>> {
        match (terms.tailness, terms.proximity) {
            (true, true) => Some(self.q.clone()),
            (true, false) => Some(self.tailness.values.clone()),
            (false, true) => Some(self.proximity.values.iter().map(|p| -p).collect()),
            (false, false) => None,
        }
    }

    /// Objective terms for a set of pool indices.
    pub fn objective(&self, selection: &[usize]) -> Result<ObjectiveTerms> {
        kcenter::check_indices(self.pool.n(), &[selection])?;
        let all = Stacked::new(self.seed, self.pool)?;
        let prepared = Prepared::new(&all, self.cfg.distance)?;
        let offset = all.second_offset();
        let rows: Vec<usize> = (0..all.len()).collect();
        let mut cover = self.seed_cover.clone();
        for &j in selection {
            kcenter::absorb_center(&prepared, &rows, &mut cover, offset + j);
        }
        let tailness = selection.iter().map(|&j| self.raw_tailness[j]).sum();
        let (proximity, proximity_defined) = if selection.is_empty() {
            (0.0, false)
        } else {
            let sum: f64 = selection.iter().map(|&j| self.raw_proximity[j]).sum();
            (sum / selection.len() as f64, true)
        };
        Ok(ObjectiveTerms {
            tailness,
            proximity,
            proximity_defined,
            coverage_radius: cover.into_iter().fold(0.0, f64::max),
        })
    }

    /// Runs one strategy with the configured budget.
    pub fn select(&self, strategy: Strategy) -> Result<SelectionResult> {
        let k = self.cfg.budget;
        let n = self.pool.n();
        let mut warnings = self.warnings.clone();
        let mut diagnostics = BTreeMap::new();
        let mut candidates = Vec::new();
        let selected = match strategy {
            Strategy::Random => random_select(n, k, self.cfg.rng_seed)?,
            Strategy::Terms(terms) => {
                let ranking = self.score_for(terms).map(|s| self.ranking(&s));
                match (terms.diversity, ranking) {
                    (false, None) => {
                        return Err(Error::ConfigInvalid("a strategy needs at least one term".into()))
                    }
                    (false, Some(order)) => order[..k].to_vec(),
                    (true, ranking) => {
                        let pool_candidates = match ranking {
                            Some(order) => {
                                let (c, clamped) = self.cfg.candidate_count(n);
                                if clamped {
                                    warnings.push(Warning::CandidatesClamped {
                                        requested: math::ceil_count(
                                            self.cfg.candidate_factor * k as f64,
                                        ),
                                        used: c,
                                    });
                                }
                                candidates = order[..c].to_vec();
                                candidates.clone()
                            }
                            None => (0..n).collect(),
                        };
                        diagnostics.insert("candidate_count".into(), pool_candidates.len() as f64);
                        self.greedy(&pool_candidates, k)?
                    }
                }
            }
        };
        let objective = self.objective(&selected)?;
        diagnostics.insert("objective_value".into(), objective.value());
        diagnostics.insert("seed_radius".into(), self.seed_radius());
        diagnostics.insert("selected".into(), selected.len() as f64);
        if let Some(p) = &self.prototypes {
            diagnostics.insert("kmeans_k".into(), p.k() as f64);
            diagnostics.insert("kmeans_iterations".into(), p.iterations as f64);
            diagnostics.insert("kmeans_inertia".into(), p.inertia);
        }
        Ok(SelectionResult {
            strategy,
            selected,
            candidates,
            score_q: self.q.clone(),
            tailness_component: self.tailness.values.clone(),
            proximity_component: self.proximity.values.clone(),
            raw_tailness: self.raw_tailness.clone(),
            raw_proximity: self.raw_proximity.clone(),
            objective,
            diagnostics,
            warnings,
        })
    }

    /// K-center greedy over pool candidates, seeded with every seed row.
    fn greedy(&self, pool_candidates: &[usize], budget: usize) -> Result<Vec<usize>> {
        if budget == 0 {
            return Ok(Vec::new());
        }
        if budget > pool_candidates.len() {
            return Err(Error::BudgetExceedsCandidates {
                budget,
                candidates: pool_candidates.len(),
            });
        }
        let all = Stacked::new(self.seed, self.pool)?;
        let prepared = Prepared::new(&all, self.cfg.distance)?;
        let offset = all.second_offset();
        let mut stacked: Vec<usize> = pool_candidates.iter().map(|&j| j + offset).collect();
        stacked.sort_unstable();
        let mins = stacked.iter().map(|&r| self.seed_cover[r]).collect();
        Ok(kcenter::greedy_from_mins(&prepared, &stacked, mins, budget)
            .into_iter()
            .map(|r| r - offset)
            .collect())
    }
}

/// Checks that `selection` holds distinct indices below `len`.
pub(crate) fn check_selection(len: usize, selection: &[usize]) -> Result<()> {
    kcenter::check_indices(len, &[selection])
}

/// Runs the full MAK pipeline.
pub fn mak_select(
    seed: &EmbeddingSet,
    pool: &EmbeddingSet,
    losses: &LossTable,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    Scoring::prepare(seed, pool, losses, cfg)?.select(Strategy::MAK)
}

/// `(Σ ECLE, D, H)` for a given selection of pool indices.
pub fn evaluate_objective(
    seed: &EmbeddingSet,
    pool: &EmbeddingSet,
    selection: &[usize],
    losses: &LossTable,
    cfg: &SelectionConfig,
) -> Result<ObjectiveTerms> {
    let cfg = SelectionConfig {
        budget: 0,
        ..cfg.clone()
    };
    Scoring::prepare(seed, pool, losses, &cfg)?.objective(selection)
}

/// Uniform sample of `budget` pool indices without replacement.
pub fn random_select(pool_size: usize, budget: usize, rng_seed: u64) -> Result<Vec<usize>> {
    if budget > pool_size {
        return Err(Error::BudgetExceedsPool {
            budget,
            pool: pool_size,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    Ok(rand::seq::index::sample(&mut rng, pool_size, budget).into_vec())
}

/// K-center greedy over the whole pool, starting from the seed set.
pub fn plain_kcenter_select(
    seed: &EmbeddingSet,
    pool: &EmbeddingSet,
    budget: usize,
    metric: Distance,
) -> Result<Vec<usize>> {
    if budget > pool.n() {
        return Err(Error::BudgetExceedsPool {
            budget,
            pool: pool.n(),
        });
    }
    let all = Stacked::new(seed, pool)?;
    let offset = all.second_offset();
    let initial: Vec<usize> = (0..offset).collect();
    let candidates: Vec<usize> = (offset..all.len()).collect();
    Ok(kcenter_greedy(&all, &initial, &candidates, budget, metric)?
        .into_iter()
        .map(|r| r - offset)
        .collect())
}

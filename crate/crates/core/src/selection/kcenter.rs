//! Farthest-first K-center greedy, its exhaustive oracle, and the covering
//! radius `H(centers, all) = max_i min_{j ∈ centers} Δ(x_i, x_j)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::Points;
use crate::error::{Error, Result};
use crate::metric::{Distance, Prepared};
use crate::par;

/// Upper bound on the number of subsets [`kcenter_exact`] will enumerate.
pub const EXACT_SUBSET_LIMIT: u128 = 1_000_000;

pub(crate) fn check_indices(len: usize, sets: &[&[usize]]) -> Result<()> {
    let mut seen = vec![false; len];
    for set in sets {
        for &i in *set {
            if i >= len {
                return Err(Error::IndexOutOfRange { index: i, len });
            }
            if seen[i] {
                return Err(Error::OverlappingIndex { index: i });
            }
            seen[i] = true;
        }
    }
    Ok(())
}

/// Lowers every entry of `mins` to its distance from `center`.
pub(crate) fn absorb_center<P: Points + ?Sized>(
    all: &Prepared<'_, P>,
    clients: &[usize],
    mins: &mut [f64],
    center: usize,
) {
    par::for_each_mut(mins, |k, m| {
        let d = all.dist(clients[k], center);
        if d < *m {
            *m = d;
        }
    });
}

pub(crate) fn min_to_centers<P: Points + ?Sized>(
    all: &Prepared<'_, P>,
    clients: &[usize],
    centers: &[usize],
) -> Vec<f64> {
    par::map_range(clients.len(), |k| {
        let mut best = f64::INFINITY;
        for &c in centers {
            let d = all.dist(clients[k], c);
            if d < best {
                best = d;
            }
        }
        best
    })
}

/// Greedy loop given each candidate's current distance to the center set.
/// Ties go to the candidate listed first.
pub(crate) fn greedy_from_mins<P: Points + ?Sized>(
    all: &Prepared<'_, P>,
    candidates: &[usize],
    mut mins: Vec<f64>,
    budget: usize,
) -> Vec<usize> {
    let mut taken = vec![false; candidates.len()];
    let mut picks = Vec::with_capacity(budget);
    for _ in 0..budget {
        let mut best: Option<usize> = None;
        for k in 0..candidates.len() {
            if taken[k] {
                continue;
            }
            if best.is_none_or(|b| mins[k] > mins[b]) {
                best = Some(k);
            }
        }
        let Some(k) = best else { break };
        taken[k] = true;
        let u = candidates[k];
        picks.push(u);
        absorb_center(all, candidates, &mut mins, u);
    }
    picks
}

/// Picks `budget` candidates one at a time, each time the candidate
/// farthest from the current centers (initially `initial_centers`). Returns
/// the picks in order. Ties go to the lowest index.
pub fn kcenter_greedy<P: Points + ?Sized>(
    all: &P,
    initial_centers: &[usize],
    candidates: &[usize],
    budget: usize,
    metric: Distance,
) -> Result<Vec<usize>> {
    if budget == 0 {
        return Ok(Vec::new());
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    if budget > candidates.len() {
        return Err(Error::BudgetExceedsCandidates {
            budget,
            candidates: candidates.len(),
        });
    }
    check_indices(all.len(), &[initial_centers, candidates])?;
    let prepared = Prepared::new(all, metric)?;
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let mins = min_to_centers(&prepared, &sorted, initial_centers);
    Ok(greedy_from_mins(&prepared, &sorted, mins, budget))
}

/// `H(centers, all)`: the largest distance from any row to its nearest
/// center. Infinite when `centers` is empty.
pub fn covering_radius<P: Points + ?Sized>(all: &P, centers: &[usize], metric: Distance) -> Result<f64> {
    check_indices(all.len(), &[centers])?;
    let prepared = Prepared::new(all, metric)?;
    let clients: Vec<usize> = (0..all.len()).collect();
    Ok(min_to_centers(&prepared, &clients, centers)
        .into_iter()
        .fold(0.0, f64::max))
}

/// Optimal K-center completion found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactCover {
    /// Chosen candidates, ascending.
    pub selection: Vec<usize>,
    /// `H(selection ∪ initial, all)`.
    pub radius: f64,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > EXACT_SUBSET_LIMIT * 1000 {
            return acc;
        }
    }
    acc
}

/// Exhaustive minimizer of `H(selection ∪ initial, all)` over all
/// `budget`-sized subsets of `candidates`. The lexicographically first
/// optimal subset wins ties.
pub fn kcenter_exact<P: Points + ?Sized>(
    all: &P,
    initial_centers: &[usize],
    candidates: &[usize],
    budget: usize,
    metric: Distance,
) -> Result<ExactCover> {
    if budget > candidates.len() {
        return Err(Error::BudgetExceedsCandidates {
            budget,
            candidates: candidates.len(),
        });
    }
    check_indices(all.len(), &[initial_centers, candidates])?;
    let subsets = binomial(candidates.len(), budget);
    if subsets > EXACT_SUBSET_LIMIT {
        return Err(Error::InstanceTooLarge {
            subsets,
            limit: EXACT_SUBSET_LIMIT,
        });
    }
    let prepared = Prepared::new(all, metric)?;
    let n = all.len();
    let rows: Vec<usize> = (0..n).collect();
    let base = min_to_centers(&prepared, &rows, initial_centers);
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    let table: Vec<Vec<f64>> = cands
        .iter()
        .map(|&c| (0..n).map(|r| prepared.dist(r, c)).collect())
        .collect();

    let mut combo: Vec<usize> = (0..budget).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mut radius = 0.0f64;
        for r in 0..n {
            let mut m = base[r];
            for &k in &combo {
                m = m.min(table[k][r]);
            }
            radius = radius.max(m);
        }
        if best.as_ref().is_none_or(|(_, b)| radius < *b) {
            best = Some((combo.clone(), radius));
        }
        // next combination in lexicographic order
        let mut i = budget;
        loop {
            if i == 0 {
                let (sel, radius) = best.unwrap();
                return Ok(ExactCover {
                    selection: sel.into_iter().map(|k| cands[k]).collect(),
                    radius,
                });
            }
            i -= 1;
            if combo[i] < cands.len() - budget + i {
                combo[i] += 1;
                for j in i + 1..budget {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

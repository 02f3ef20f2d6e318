use mak_core::selection::covering_radius;
use mak_core::{kcenter_exact, kcenter_greedy, Distance, EmbeddingSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingSet {
    let data: Vec<f32> = (0..n * d).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    EmbeddingSet::new(n, d, data).unwrap()
}

fn approximation_ratio_holds(metric: Distance, factor: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..200 {
        let n_init = rng.random_range(1..4);
        let n_cand = rng.random_range(3..=12);
        // every non-initial row is a candidate, as the guarantee requires
        let n = n_init + n_cand;
        let d = rng.random_range(2..5);
        let pts = random_points(&mut rng, n, d);
        let init: Vec<usize> = (0..n_init).collect();
        let cands: Vec<usize> = (n_init..n_init + n_cand).collect();
        let budget = rng.random_range(1..=3);
        let picks = kcenter_greedy(&pts, &init, &cands, budget, metric).unwrap();
        let mut centers = init.clone();
        centers.extend(&picks);
        let greedy = covering_radius(&pts, &centers, metric).unwrap();
        let exact = kcenter_exact(&pts, &init, &cands, budget, metric).unwrap();
        assert!(
            greedy <= factor * exact.radius + 1e-12,
            "trial {trial}: {greedy} vs {}",
            exact.radius
        );
        assert!(exact.radius <= greedy + 1e-12);
    }
}

#[test]
fn greedy_is_within_twice_the_optimum() {
    approximation_ratio_holds(Distance::Euclidean, 2.0, 42);
}

// Cosine distance is half the squared chord between the normalized rows, so
// the chord-space factor of two becomes four.
#[test]
fn cosine_greedy_is_within_four_times_the_optimum() {
    approximation_ratio_holds(Distance::Cosine, 4.0, 43);
}

#[test]
fn covering_radius_never_rises_per_pick() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let pts = random_points(&mut rng, 60, 3);
        let init = [0usize, 1];
        let cands: Vec<usize> = (2..60).collect();
        let picks = kcenter_greedy(&pts, &init, &cands, 20, Distance::Cosine).unwrap();
        let mut centers = init.to_vec();
        let mut prev = covering_radius(&pts, &centers, Distance::Cosine).unwrap();
        for p in picks {
            centers.push(p);
            let h = covering_radius(&pts, &centers, Distance::Cosine).unwrap();
            assert!(h <= prev);
            prev = h;
        }
    }
}

#[test]
fn each_pick_is_the_farthest_remaining_candidate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts = random_points(&mut rng, 40, 4);
    let init = [5usize];
    let cands: Vec<usize> = (0..40).filter(|&i| i != 5).collect();
    let picks = kcenter_greedy(&pts, &init, &cands, 10, Distance::Euclidean).unwrap();
    let mut centers = init.to_vec();
    for &p in &picks {
        let far = |i: usize| {
            centers
                .iter()
                .map(|&c| mak_core::distance(pts.row(i), pts.row(c), Distance::Euclidean).unwrap())
                .fold(f64::INFINITY, f64::min)
        };
        let best = cands
            .iter()
            .filter(|c| !centers.contains(c))
            .map(|&c| (far(c), c))
            .fold((f64::NEG_INFINITY, usize::MAX), |a, b| if b.0 > a.0 { b } else { a });
        assert_eq!(p, best.1);
        centers.push(p);
    }
}

#[test]
fn full_budget_returns_every_candidate() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts = random_points(&mut rng, 9, 2);
    let cands = [8usize, 2, 5, 3];
    let mut picks = kcenter_greedy(&pts, &[0], &cands, 4, Distance::Cosine).unwrap();
    picks.sort_unstable();
    assert_eq!(picks, vec![2, 3, 5, 8]);
    let exact = kcenter_exact(&pts, &[0], &cands, 4, Distance::Cosine).unwrap();
    assert_eq!(exact.selection, vec![2, 3, 5, 8]);
}

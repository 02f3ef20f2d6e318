use mak_core::{kmeans, EmbeddingSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn blobs(seed: u64) -> (EmbeddingSet, Vec<usize>, [[f64; 2]; 3]) {
    let means = [[1.0, 0.0], [-0.5, 0.866], [-0.5, -0.866]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.08).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (b, m) in means.iter().enumerate() {
        for _ in 0..30 {
            rows.push([
                (m[0] + noise.sample(&mut rng)) as f32,
                (m[1] + noise.sample(&mut rng)) as f32,
            ]);
            labels.push(b);
        }
    }
    (EmbeddingSet::from_rows(&rows).unwrap(), labels, means)
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[test]
fn recovers_three_blobs() {
    for seed in 0..5 {
        let (pts, labels, means) = blobs(seed);
        let p = kmeans(&pts, 3, 100, seed).unwrap();
        assert!(p.converged);
        // best center-to-blob matching by exhaustive search
        let agree = |perm: &[usize; 3]| {
            labels
                .iter()
                .zip(&p.assignments)
                .filter(|(&l, &a)| perm[a] == l)
                .count()
        };
        let perm = PERMUTATIONS.iter().max_by_key(|perm| agree(perm)).unwrap();
        assert!(agree(perm) as f64 >= 0.95 * 90.0);
        for c in 0..3 {
            let m = means[perm[c]];
            let center = p.centers.row(c);
            let dist = ((center[0] as f64 - m[0]).powi(2) + (center[1] as f64 - m[1]).powi(2)).sqrt();
            assert!(dist < 0.15, "center {c}: {dist}");
        }
    }
}

fn normalized(pts: &EmbeddingSet) -> Vec<Vec<f64>> {
    pts.rows()
        .map(|r| {
            let n = r.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            r.iter().map(|&v| v as f64 / n).collect()
        })
        .collect()
}

fn sq(a: &[f64], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, &y)| (x - y as f64).powi(2)).sum()
}

#[test]
fn inertia_history_never_rises_and_matches_assignments() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    for k in [1, 2, 5, 10] {
        let data: Vec<f32> = (0..200 * 6).map(|_| normal.sample(&mut rng) as f32).collect();
        let pts = EmbeddingSet::new(200, 6, data).unwrap();
        let p = kmeans(&pts, k, 100, k as u64).unwrap();
        for w in p.inertia_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
        }
        let rows = normalized(&pts);
        let recomputed: f64 = rows
            .iter()
            .zip(&p.assignments)
            .map(|(r, &a)| sq(r, p.centers.row(a)))
            .sum();
        assert!((recomputed - p.inertia).abs() <= 1e-6 * p.inertia.max(1e-12));
        assert!(p.assignments.iter().all(|&a| a < p.k()));
    }
}

#[test]
fn result_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let data: Vec<f32> = (0..150 * 4).map(|_| normal.sample(&mut rng) as f32).collect();
    let pts = EmbeddingSet::new(150, 4, data).unwrap();
    let p = kmeans(&pts, 6, 500, 3).unwrap();
    assert!(p.converged);
    for (r, &a) in normalized(&pts).iter().zip(&p.assignments) {
        let best = (0..p.k())
            .min_by(|&x, &y| sq(r, p.centers.row(x)).total_cmp(&sq(r, p.centers.row(y))))
            .unwrap();
        let tol = 1e-6;
        assert!(sq(r, p.centers.row(a)) <= sq(r, p.centers.row(best)) + tol);
    }
}

#[test]
fn same_seed_same_centers() {
    let (pts, _, _) = blobs(4);
    let a = kmeans(&pts, 4, 50, 17).unwrap();
    let b = kmeans(&pts, 4, 50, 17).unwrap();
    assert_eq!(a, b);
    let bits = |p: &mak_core::PrototypeSet| p.centers.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

use mak_core::diagnostics::COMPARED_STRATEGIES;
use mak_core::synth::repeat_sweep;
use mak_core::{
    compare_strategies, generate_mixture, kmeans, nearest_distances, phi_metric, selection_diagnostics,
    Distance, EmbeddingSet, Group, GroupPartition, LossMode, LossTable, MixtureSpec, SelectionConfig,
    SizeProfile, Strategy, CANONICAL_BUDGET,
};

fn small_spec() -> MixtureSpec {
    let mut spec = MixtureSpec::canonical();
    spec.num_classes = 6;
    spec.head_size = 120;
    spec.tail_size = 6;
    spec.pool_factor = 0.5;
    spec.ood.size = 20;
    spec
}

#[test]
fn pareto_sizes_follow_the_requested_quantiles() {
    let mut spec = MixtureSpec::canonical();
    spec.num_classes = 10;
    let sizes = spec.seed_class_sizes();
    assert_eq!(sizes.len(), 10);
    assert!(sizes.windows(2).all(|w| w[0] > w[1]), "{sizes:?}");
    assert_eq!(sizes[0] as f64 / sizes[9] as f64, 40.0);
    let beta = 40f64.ln() / 19f64.ln();
    for (c, &s) in sizes.iter().enumerate() {
        assert_eq!(s, (200.0 * ((2 * c + 1) as f64).powf(-beta)).round() as usize);
    }
    spec.size_profile = SizeProfile::Exponential;
    let exp = spec.seed_class_sizes();
    assert_eq!((exp[0], exp[9]), (200, 5));
}

#[test]
fn ood_points_sit_beyond_the_in_distribution_tail() {
    let mix = generate_mixture(&MixtureSpec::canonical()).unwrap();
    let protos = kmeans(&mix.seed, 10, 100, 0).unwrap();
    let d = nearest_distances(&mix.pool, &protos.centers, Distance::Cosine).unwrap();
    let labels = mix.pool_labels();
    let mut inside: Vec<f64> = d.iter().zip(labels).filter(|(_, &l)| !mix.is_ood(l)).map(|(&v, _)| v).collect();
    inside.sort_by(f64::total_cmp);
    let p99 = inside[((inside.len() as f64) * 0.99).ceil() as usize - 1];
    let ood_min = d
        .iter()
        .zip(labels)
        .filter(|(_, &l)| mix.is_ood(l))
        .map(|(&v, _)| v)
        .fold(f64::INFINITY, f64::min);
    assert!(ood_min > p99, "{ood_min} vs {p99}");
}

#[test]
fn single_class_scene_is_tight() {
    let mut spec = MixtureSpec::canonical();
    spec.num_classes = 1;
    spec.head_size = 50;
    spec.tail_size = 50;
    spec.ood.clusters = 0;
    let mix = generate_mixture(&spec).unwrap();
    assert!(mix.seed.labels().unwrap().iter().all(|&l| l == 0));
    assert!(mix.pool_labels().iter().all(|&l| l == 0));
    let rows: Vec<&[f32]> = mix.seed.rows().chain(mix.pool.rows()).collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            total += mak_core::distance(rows[a], rows[b], Distance::Cosine).unwrap();
            pairs += 1;
        }
    }
    assert!(total / (pairs as f64) < 0.5 * spec.intra_class_spread);
}

#[test]
fn few_classes_carry_larger_expected_loss() {
    let mix = generate_mixture(&MixtureSpec::canonical()).unwrap();
    let part = mix.partition();
    let mut sums = [(0.0, 0usize); 3];
    for (&l, &e) in mix.pool_labels().iter().zip(mix.losses.ecle()) {
        if let Some(g) = part.group_of(l) {
            let k = Group::ALL.iter().position(|&x| x == g).unwrap();
            sums[k].0 += e as f64;
            sums[k].1 += 1;
        }
    }
    let mean = |k: usize| sums[k].0 / sums[k].1 as f64;
    assert!(mean(2) > mean(1) && mean(1) > mean(0));
}

#[test]
fn phi_extremes_and_share_identity() {
    // group of 10% that fills the whole top set
    let mut labels = vec![0i64; 90];
    labels.extend(vec![1i64; 10]);
    let ecle: Vec<f32> = labels.iter().map(|&l| if l == 1 { 5.0 } else { 1.0 }).collect();
    let part = GroupPartition::from_class_sizes([(0, 500), (1, 3)]);
    let phi = phi_metric(&LossTable::from_ecle(ecle, 1).unwrap(), &labels, &part, 0.1).unwrap();
    assert!((phi[&Group::Few] - 10.0).abs() < 1e-12);
    assert_eq!(phi[&Group::Many], 0.0);
    assert!(!phi.contains_key(&Group::Medium));

    // proportional top set
    let labels: Vec<i64> = (0..100).map(|i| i % 2).collect();
    let ecle: Vec<f32> = (0..100).map(|i| (100 - i) as f32).collect();
    let part = GroupPartition::from_class_sizes([(0, 500), (1, 3)]);
    let phi = phi_metric(&LossTable::from_ecle(ecle, 1).unwrap(), &labels, &part, 0.1).unwrap();
    assert_eq!(phi[&Group::Many], 1.0);
    assert_eq!(phi[&Group::Few], 1.0);

    for seed in 0..3 {
        let mix = generate_mixture(&MixtureSpec { rng_seed: seed, ..MixtureSpec::canonical() }).unwrap();
        let part = mix.partition();
        let labels = mix.pool_labels();
        let phi = phi_metric(&mix.losses, labels, &part, 0.1).unwrap();
        let grouped: Vec<Group> = labels.iter().filter_map(|&l| part.group_of(l)).collect();
        let n = grouped.len() as f64;
        let identity: f64 = phi
            .iter()
            .map(|(g, v)| v * grouped.iter().filter(|x| *x == g).count() as f64 / n)
            .sum();
        assert!((identity - 1.0).abs() <= 2.0 / n);
        assert!(phi[&Group::Few] > phi[&Group::Many]);
    }
}

#[test]
fn phi_of_few_grows_with_repeats() {
    let (mix, tables) = repeat_sweep(&MixtureSpec::canonical(), &[1, 2, 5, 10, 20]).unwrap();
    let part = mix.partition();
    let few: Vec<f64> = tables
        .iter()
        .map(|t| phi_metric(t, mix.pool_labels(), &part, 0.1).unwrap()[&Group::Few])
        .collect();
    let inversions = few.windows(2).filter(|w| w[1] < w[0]).count();
    assert!(inversions <= 1, "{few:?}");
}

// With constant losses the gate sees only proximity, which pulls towards
// classes with more seed mass; it must never prefer the tail.
#[test]
fn constant_loss_has_no_tail_preference() {
    for seed in 0..3 {
        let mut spec = MixtureSpec::canonical();
        spec.rng_seed = seed;
        spec.ood.clusters = 0;
        spec.loss.mode = LossMode::Constant { value: 2.0 };
        let mix = generate_mixture(&spec).unwrap();
        let cfg = SelectionConfig { rng_seed: seed, ..SelectionConfig::with_budget(CANONICAL_BUDGET) };
        let cmp = compare_strategies(&mix, &cfg).unwrap();
        let share = |s: Strategy| cmp.row(s).unwrap().diagnostics.group_shares[&Group::Few];
        let p = cmp.row(Strategy::Random).unwrap().diagnostics.pool_group_shares[&Group::Few];
        let sigma = (p * (1.0 - p) / CANONICAL_BUDGET as f64).sqrt();
        assert!(share(Strategy::MAK) <= share(Strategy::Random) + 3.0 * sigma);
        assert!((share(Strategy::Random) - p).abs() <= 3.0 * sigma);
    }
}

#[test]
fn diagnostics_identities() {
    let pts = EmbeddingSet::from_rows(&[[1.0f32, 0.0], [-1.0, 0.0], [0.0, 1.0]]).unwrap();
    let part = GroupPartition::from_class_sizes([(0, 500), (1, 3)]);
    let d = selection_diagnostics(&[0, 1], &[0, 1, 9], &pts, &part).unwrap();
    assert_eq!(d.mean_pairwise_cosine, 2.0);
    let all = selection_diagnostics(&[2, 0, 1], &[0, 1, 9], &pts, &part).unwrap();
    assert_eq!(all.group_shares, all.pool_group_shares);
    assert_eq!(all.ood_fraction, all.pool_ood_fraction);
    assert_eq!(all.covering_radius, Some(0.0));
}

#[test]
fn exhausting_the_pool_equalizes_strategies() {
    let mix = generate_mixture(&small_spec()).unwrap();
    let cfg = SelectionConfig::with_budget(mix.pool.n());
    let cmp = compare_strategies(&mix, &cfg).unwrap();
    assert_eq!(cmp.rows.len(), COMPARED_STRATEGIES.len());
    for row in &cmp.rows {
        assert_eq!(row.diagnostics, cmp.rows[0].diagnostics, "{}", row.strategy);
    }
}

#[test]
fn comparison_is_reproducible_and_ood_free_without_ood() {
    let mut spec = small_spec();
    let cfg = SelectionConfig::with_budget(40);
    let a = compare_strategies(&generate_mixture(&spec).unwrap(), &cfg).unwrap();
    let b = compare_strategies(&generate_mixture(&spec).unwrap(), &cfg).unwrap();
    assert_eq!(a, b);
    let mak = a.row(Strategy::MAK).unwrap().diagnostics.ood_fraction;
    let tail = a.row("ablation:tailness".parse().unwrap()).unwrap().diagnostics.ood_fraction;
    assert!(mak < tail);

    spec.ood.clusters = 0;
    let c = compare_strategies(&generate_mixture(&spec).unwrap(), &cfg).unwrap();
    assert!(c.rows.iter().all(|r| r.diagnostics.ood_fraction == 0.0));
}

use std::fs;
use std::path::Path;

use mak::emb::{self, load_embeddings, save_embeddings};
use mak::loss::{self, load_loss_table, save_loss_table};
use mak::Error;
use mak_core::{DatasetRole, EmbeddingSet, LossTable, MixtureSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(n: usize, d: usize, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.random_range(-10.0f32..10.0)).collect();
    EmbeddingSet::new(n, d, data).unwrap()
}

fn bits(set: &EmbeddingSet) -> Vec<u32> {
    set.data().iter().map(|v| v.to_bits()).collect()
}

fn header(n: u64, d: u64) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(emb::MAGIC);
    b.extend_from_slice(&emb::VERSION.to_le_bytes());
    b.extend_from_slice(&emb::DTYPE_F32.to_le_bytes());
    b.extend_from_slice(&n.to_le_bytes());
    b.extend_from_slice(&d.to_le_bytes());
    b
}

#[test]
fn large_file_round_trips_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.emb");
    let set = random_set(10_000, 128, 1);
    save_embeddings(&set, &path).unwrap();
    assert_eq!(fs::metadata(&path).unwrap().len(), (emb::HEADER_LEN + 10_000 * 128 * 4) as u64);
    let back = load_embeddings(&path, DatasetRole::Pool).unwrap();
    assert_eq!((back.n(), back.dim()), (10_000, 128));
    assert_eq!(bits(&back), bits(&set));
}

#[test]
fn singleton_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.emb");
    let set = EmbeddingSet::new(1, 1, vec![-0.0]).unwrap();
    save_embeddings(&set, &path).unwrap();
    let back = load_embeddings(&path, DatasetRole::Seed).unwrap();
    assert_eq!(bits(&back), bits(&set));
}

#[test]
fn header_layout_is_little_endian() {
    let set = EmbeddingSet::from_rows(&[[1.0f32, 2.0]]).unwrap();
    let bytes = emb::encode(&set);
    assert_eq!(&bytes[..emb::HEADER_LEN], &header(1, 2)[..]);
    assert_eq!(&bytes[emb::HEADER_LEN..emb::HEADER_LEN + 4], &1.0f32.to_le_bytes());
}

#[test]
fn short_payload_is_a_dimension_mismatch() {
    let mut bytes = header(3, 2);
    for v in [1.0f32, 2.0, 3.0, 4.0, 5.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    match emb::decode(&bytes, Path::new("x.emb")) {
        Err(Error::DimensionMismatch { expected, found, .. }) => assert_eq!((expected, found), (6, 5)),
        other => panic!("expected a dimension mismatch, got {other:?}"),
    }
}

#[test]
fn nan_reports_its_row() {
    let mut bytes = header(3, 2);
    for v in [1.0f32, 2.0, 3.0, f32::NAN, 5.0, 6.0] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    match emb::decode(&bytes, Path::new("x.emb")) {
        Err(Error::NonFiniteValue { row, .. }) => assert_eq!(row, 1),
        other => panic!("expected a non-finite value, got {other:?}"),
    }
}

#[test]
fn bad_headers_are_rejected() {
    let p = Path::new("x.emb");
    let mut wrong_magic = header(1, 1);
    wrong_magic[0] = b'X';
    wrong_magic.extend_from_slice(&0f32.to_le_bytes());
    assert!(matches!(emb::decode(&wrong_magic, p), Err(Error::MalformedHeader { .. })));
    assert!(matches!(emb::decode(&header(1, 1)[..10], p), Err(Error::MalformedHeader { .. })));
    let mut wrong_version = header(1, 1);
    wrong_version[4] = 9;
    wrong_version.extend_from_slice(&0f32.to_le_bytes());
    assert!(matches!(emb::decode(&wrong_version, p), Err(Error::MalformedHeader { .. })));
    let mut wrong_dtype = header(1, 1);
    wrong_dtype[8] = 1;
    wrong_dtype.extend_from_slice(&0f32.to_le_bytes());
    assert!(matches!(emb::decode(&wrong_dtype, p), Err(Error::MalformedHeader { .. })));
    assert!(matches!(emb::decode(&header(0, 4), p), Err(Error::MalformedHeader { .. })));
}

#[test]
fn sidecars_travel_with_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.emb");
    let set = random_set(3, 2, 4)
        .with_labels(vec![2, 0, -1])
        .unwrap()
        .with_ids(vec!["a".into(), "b".into(), "c".into()])
        .unwrap();
    save_embeddings(&set, &path).unwrap();
    assert!(emb::labels_path(&path).exists());
    assert!(emb::ids_path(&path).exists());
    let back = load_embeddings(&path, DatasetRole::Pool).unwrap();
    assert_eq!(back, set);

    fs::write(emb::labels_path(&path), "[1, 2]").unwrap();
    let err = load_embeddings(&path, DatasetRole::Pool).unwrap_err();
    assert!(err.to_string().contains("labels.json"), "{err}");
}

#[test]
fn csv_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    fs::write(&path, "1, 2.5\n-3,4\n\n").unwrap();
    let set = load_embeddings(&path, DatasetRole::Seed).unwrap();
    assert_eq!(set.data(), &[1.0, 2.5, -3.0, 4.0]);

    fs::write(&path, "1,2\n3\n").unwrap();
    assert!(matches!(load_embeddings(&path, DatasetRole::Seed), Err(Error::Parse { .. })));
    fs::write(&path, "1,2\nnan,3\n").unwrap();
    assert!(matches!(
        load_embeddings(&path, DatasetRole::Seed),
        Err(Error::NonFiniteValue { row: 1, .. })
    ));
    fs::write(&path, "0\n".repeat(emb::CSV_MAX_ROWS + 1)).unwrap();
    assert!(matches!(load_embeddings(&path, DatasetRole::Seed), Err(Error::Parse { .. })));
}

#[test]
fn missing_file_names_the_path() {
    let err = load_embeddings(Path::new("/nonexistent/seed.emb"), DatasetRole::Seed).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/seed.emb"));
    assert_eq!(err.exit_code(), 2);
}

fn random_table(n: usize, m: usize, seed: u64) -> LossTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = (0..n * m).map(|_| rng.random_range(0.0f32..5.0)).collect();
    LossTable::from_raw(raw, m).unwrap()
}

#[test]
fn loss_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("l.loss");
    let table = random_table(100, 5, 2);
    save_loss_table(&table, &path).unwrap();
    let back = load_loss_table(&path).unwrap();
    assert_eq!(back, table);
    assert_eq!(back.raw().unwrap().len(), 500);

    let no_raw = LossTable::from_ecle(table.ecle().to_vec(), 5).unwrap();
    save_loss_table(&no_raw, &path).unwrap();
    assert_eq!(load_loss_table(&path).unwrap(), no_raw);
}

#[test]
fn loss_header_errors() {
    let p = Path::new("l.loss");
    let table = random_table(4, 2, 3);
    let good = loss::encode(&table);

    let mut zero_m = good.clone();
    zero_m[16..20].copy_from_slice(&0u32.to_le_bytes());
    assert!(matches!(loss::decode(&zero_m, p), Err(Error::MalformedHeader { .. })));

    let mut flags = good.clone();
    flags[20..24].copy_from_slice(&8u32.to_le_bytes());
    assert!(matches!(loss::decode(&flags, p), Err(Error::MalformedHeader { .. })));

    let short = &good[..good.len() - 4];
    assert!(matches!(loss::decode(short, p), Err(Error::DimensionMismatch { .. })));

    let mut negative = LossTable::from_ecle(vec![1.0, 2.0], 1).unwrap();
    let mut bytes = loss::encode(&negative);
    bytes[loss::HEADER_LEN..loss::HEADER_LEN + 4].copy_from_slice(&(-1.0f32).to_le_bytes());
    assert!(matches!(loss::decode(&bytes, p), Err(Error::Invalid { .. })));
    negative = LossTable::from_ecle(vec![1.0, 3.0], 1).unwrap();
    bytes = loss::encode(&negative);
    bytes[loss::HEADER_LEN + 4..loss::HEADER_LEN + 8].copy_from_slice(&f32::NAN.to_le_bytes());
    assert!(matches!(loss::decode(&bytes, p), Err(Error::NonFiniteValue { row: 1, .. })));
}

#[test]
fn shipped_canonical_config_matches_the_built_in_scene() {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/canonical.json")).unwrap();
    let spec: MixtureSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(spec, MixtureSpec::canonical());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_finite_set_round_trips(n in 1usize..20, d in 1usize..12, seed in any::<u64>()) {
        let set = random_set(n, d, seed);
        let back = emb::decode(&emb::encode(&set), Path::new("p.emb")).unwrap();
        prop_assert_eq!(bits(&back), bits(&set));
        prop_assert_eq!((back.n(), back.dim()), (n, d));
    }

    #[test]
    fn any_table_round_trips(n in 1usize..30, m in 1usize..6, seed in any::<u64>()) {
        let table = random_table(n, m, seed);
        let back = loss::decode(&loss::encode(&table), Path::new("p.loss")).unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn truncation_never_panics(cut in 0usize..60) {
        let bytes = emb::encode(&random_set(2, 4, 7));
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(emb::decode(&bytes[..cut], Path::new("t.emb")).is_err());
    }
}

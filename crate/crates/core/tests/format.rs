use std::path::PathBuf;

use batchbald::io::{decode_tensor, encode_tensor, read_tensor, write_tensor, FormatError};
use batchbald::tensor::{validate_tensor, PosteriorTensor};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn onehot(y: usize) -> Vec<f64> {
    if y == 0 {
        vec![1.0, 0.0]
    } else {
        vec![0.0, 1.0]
    }
}

fn expected_fixtures() -> Vec<(&'static str, PosteriorTensor)> {
    let a: Vec<Vec<f64>> = (0..4).map(|j| onehot(j & 1)).collect();
    let b: Vec<Vec<f64>> = (0..4).map(|j| onehot((j >> 1) & 1)).collect();
    vec![
        (
            "duplicate_pool.ptf1",
            PosteriorTensor::from_points(&[a.clone(), a, b]).unwrap(),
        ),
        (
            "single.ptf1",
            PosteriorTensor::new(1, 1, 2, vec![0.25, 0.75]).unwrap(),
        ),
        (
            "mixed.ptf1",
            PosteriorTensor::from_points(&[
                vec![
                    vec![0.5, 0.25, 0.25],
                    vec![0.125, 0.375, 0.5],
                    vec![1.0, 0.0, 0.0],
                ],
                vec![
                    vec![0.0625, 0.9375, 0.0],
                    vec![0.75, 0.125, 0.125],
                    vec![0.25, 0.25, 0.5],
                ],
            ])
            .unwrap(),
        ),
    ]
}

#[test]
fn golden_files_decode_to_known_tensors() {
    for (name, expected) in expected_fixtures() {
        let t = read_tensor(fixture(name)).unwrap();
        assert_eq!(t, expected, "{name}");
        assert!(validate_tensor(&t).is_valid(), "{name}");
    }
}

#[test]
fn golden_files_are_byte_identical_after_encoding() {
    for (name, expected) in expected_fixtures() {
        let on_disk = std::fs::read(fixture(name)).unwrap();
        assert_eq!(encode_tensor(&expected).unwrap(), on_disk, "{name}");
    }
}

#[test]
fn write_then_read_through_the_filesystem() {
    let dir = tempfile::tempdir().unwrap();
    for (name, expected) in expected_fixtures() {
        let path = dir.path().join(name);
        write_tensor(&expected, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(fixture(name)).unwrap());
    }
}

#[test]
fn every_strict_prefix_of_a_fixture_is_rejected() {
    let bytes = std::fs::read(fixture("mixed.ptf1")).unwrap();
    for len in 0..bytes.len() {
        let err = decode_tensor(&bytes[..len]).unwrap_err();
        match err {
            FormatError::TruncatedHeader { .. } => assert!(len < 16),
            FormatError::TruncatedPayload { expected, actual, .. } => {
                assert!(len >= 16);
                assert_eq!(expected, 2 * 3 * 3 * 8);
                assert_eq!(actual, len - 16);
            }
            other => panic!("prefix of length {len}: unexpected {other:?}"),
        }
    }
}

fn tensor_strategy() -> impl Strategy<Value = PosteriorTensor> {
    (1usize..6, 1usize..6, 2usize..5).prop_flat_map(|(n, k, c)| {
        prop::collection::vec(any::<f64>(), n * k * c)
            .prop_map(move |probs| PosteriorTensor::new(n, k, c, probs).unwrap())
    })
}

proptest! {
    // Arbitrary payloads (NaN and infinities included) survive bit for bit.
    #[test]
    fn round_trip_preserves_every_bit(t in tensor_strategy()) {
        let bytes = encode_tensor(&t).unwrap();
        prop_assert_eq!(bytes.len(), 16 + 8 * t.as_slice().len());
        let back = decode_tensor(&bytes).unwrap();
        prop_assert_eq!((back.n_pool(), back.k(), back.c()), (t.n_pool(), t.k(), t.c()));
        let a: Vec<u64> = t.as_slice().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.as_slice().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn decoding_arbitrary_bytes_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..96)) {
        let _ = decode_tensor(&bytes);
    }

    #[test]
    fn validation_is_total(t in tensor_strategy()) {
        let report = validate_tensor(&t);
        prop_assert_eq!(report.checks.len(), 3);
        let finite_ok = t.as_slice().iter().all(|v| (0.0..=1.0).contains(v));
        if !finite_ok {
            prop_assert!(!report.is_valid());
        }
    }
}

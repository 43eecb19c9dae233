use std::collections::HashSet;

use ehr_interpret::dataset::{read_dataset, standardize, stratified_split, write_dataset, FeatureMatrix, FeatureMeta};
use proptest::prelude::*;

fn matrix() -> impl Strategy<Value = FeatureMatrix> {
    (2usize..40, 1usize..6).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop_oneof![4 => -1e3f64..1e3, 1 => Just(2.5)], n * d)
            .prop_map(move |v| FeatureMatrix::new(n, d, v).unwrap())
    })
}

proptest! {
    #[test]
    fn standardized_columns_have_unit_moments(x in matrix()) {
        let (z, stats) = standardize(&x, None).unwrap();
        let n = z.n_rows() as f64;
        for j in 0..z.n_cols() {
            let col = z.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if stats.constant_flags[j] {
                prop_assert!(col.iter().all(|&v| v == 0.0));
            } else {
                prop_assert!(mean.abs() <= 1e-10, "mean {mean}");
                prop_assert!((var - 1.0).abs() <= 1e-10, "var {var}");
            }
        }
    }

    #[test]
    fn standardize_is_idempotent(x in matrix()) {
        let (z, _) = standardize(&x, None).unwrap();
        let (zz, _) = standardize(&z, None).unwrap();
        for (a, b) in z.values().iter().zip(zz.values()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn held_out_path_reuses_training_stats(x in matrix()) {
        let (_, stats) = standardize(&x, None).unwrap();
        let (a, again) = standardize(&x, Some(&stats)).unwrap();
        let (b, _) = standardize(&x, None).unwrap();
        prop_assert_eq!(&stats, &again);
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn csv_round_trip_is_lossless(x in matrix(), holes in prop::collection::vec(any::<bool>(), 200)) {
        let mut x = x;
        for (k, &h) in holes.iter().enumerate().take(x.n_rows() * x.n_cols()) {
            if h {
                x.set(k / x.n_cols(), k % x.n_cols(), None);
            }
        }
        let y: Vec<u8> = (0..x.n_rows()).map(|i| (i % 2) as u8).collect();
        let meta: Vec<FeatureMeta> = (0..x.n_cols()).map(|j| FeatureMeta::continuous(format!("f{j}"))).collect();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &x, &y, &meta).unwrap();
        let back = read_dataset(buf.as_slice(), Some(&meta)).unwrap();
        prop_assert_eq!(&back.y, &y);
        for (a, b) in back.x.values().iter().zip(x.values()) {
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
}

#[test]
fn split_partitions_for_1000_seeds() {
    let y: Vec<u8> = (0..137).map(|i| u8::from(i % 5 < 2)).collect();
    for seed in 0..1000 {
        let (train, test) = stratified_split(&y, 0.5, seed).unwrap();
        let a: HashSet<usize> = train.iter().copied().collect();
        let b: HashSet<usize> = test.iter().copied().collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len() + b.len(), y.len());
        assert_eq!(a.len(), train.len());
    }
}

#[test]
fn odd_split_is_within_one_of_proportional() {
    let mut rng_state = 12345u64;
    for _ in 0..50 {
        let y: Vec<u8> = (0..101)
            .map(|_| {
                rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                u8::from(rng_state >> 62 == 0)
            })
            .collect();
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos < 2 || pos > 99 {
            continue;
        }
        let (train, test) = stratified_split(&y, 0.5, rng_state).unwrap();
        assert!([50, 51].contains(&train.len()) && [50, 51].contains(&test.len()));
        let test_pos = test.iter().filter(|&&i| y[i] == 1).count() as f64;
        let expected = pos as f64 * test.len() as f64 / 101.0;
        assert!((test_pos - expected).abs() <= 1.0);
    }
}

#[test]
fn same_seed_same_split() {
    let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
    assert_eq!(stratified_split(&y, 0.3, 9).unwrap(), stratified_split(&y, 0.3, 9).unwrap());
    assert_ne!(stratified_split(&y, 0.3, 9).unwrap(), stratified_split(&y, 0.3, 10).unwrap());
}

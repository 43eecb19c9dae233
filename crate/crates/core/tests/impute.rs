use ehr_interpret::dataset::FeatureMatrix;
use ehr_interpret::impute::{fit_imputer, leading_singular_value, observed_means, soft_impute, ImputationConfig, SoftImputeConfig};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Rank-`r` matrix with a deterministic missing pattern; every column keeps an observed cell.
fn low_rank_with_holes(n: usize, d: usize, r: usize, seed: u64, rate: f64) -> FeatureMatrix {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let u: Vec<f64> = (0..n * r).map(|_| next() * 2.0 - 1.0).collect();
    let v: Vec<f64> = (0..d * r).map(|_| next() * 4.0 - 2.0).collect();
    let mut vals = Vec::with_capacity(n * d);
    for i in 0..n {
        for j in 0..d {
            let m: f64 = (0..r).map(|k| u[i * r + k] * v[j * r + k]).sum::<f64>() + j as f64;
            vals.push(if i > 0 && next() < rate { f64::NAN } else { m });
        }
    }
    FeatureMatrix::new(n, d, vals).unwrap()
}

/// Soft-thresholded SVD computed directly, for the fixed-point check.
fn shrink(w: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let svd = w.clone().svd(true, true);
    let s = svd.singular_values.map(|v| (v - lambda).max(0.0));
    svd.u.unwrap() * DMatrix::from_diagonal(&s) * svd.v_t.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn observed_cells_objective_and_rank(
        n in 6usize..20, d in 3usize..8, r in 1usize..3, seed in 0u64..1000, rate in 0.05f64..0.4, frac in 0.01f64..0.5, rank_cap in 1usize..4
    ) {
        let x = low_rank_with_holes(n, d, r, seed, rate);
        let lambda = frac * leading_singular_value(&x).unwrap();
        let max_rank = rank_cap.min(n.min(d));
        let cfg = SoftImputeConfig { shrinkage: lambda, max_rank, tolerance: 1e-6, max_iterations: 300 };
        let fit = soft_impute(&x, &cfg).unwrap();
        for (a, b) in x.values().iter().zip(fit.completed.values()) {
            prop_assert!(a.is_nan() || a.to_bits() == b.to_bits());
            prop_assert!(b.is_finite());
        }
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        prop_assert!(fit.rank <= max_rank);
        prop_assert_eq!(fit.model.components.len(), fit.rank);
    }
}

#[test]
fn converged_fit_is_a_soft_threshold_fixed_point() {
    let x = low_rank_with_holes(30, 10, 2, 17, 0.25);
    let lambda = 0.05 * leading_singular_value(&x).unwrap();
    let cfg = SoftImputeConfig { shrinkage: lambda, max_rank: 10, tolerance: 1e-12, max_iterations: 5000 };
    let fit = soft_impute(&x, &cfg).unwrap();
    assert!(fit.converged);
    let means = observed_means(&x).unwrap();
    let w = DMatrix::from_fn(30, 10, |i, j| fit.completed.value(i, j) - means[j]);
    let z = shrink(&w, lambda);
    for i in 0..30 {
        for j in 0..10 {
            if x.get(i, j).is_none() {
                assert!((z[(i, j)] - w[(i, j)]).abs() <= 1e-6, "cell ({i},{j})");
            }
        }
    }
}

#[test]
fn shrinkage_at_leading_singular_value_gives_means() {
    let x = low_rank_with_holes(15, 6, 2, 3, 0.3);
    let sigma = leading_singular_value(&x).unwrap();
    let fit = soft_impute(&x, &SoftImputeConfig::new(sigma, 6)).unwrap();
    let means = observed_means(&x).unwrap();
    assert_eq!(fit.rank, 0);
    for i in 0..15 {
        for j in 0..6 {
            if x.get(i, j).is_none() {
                assert!((fit.completed.value(i, j) - means[j]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn held_out_rows_use_training_factors_only() {
    let x = low_rank_with_holes(40, 6, 2, 9, 0.2);
    let train = x.select_rows(&(0..30).collect::<Vec<_>>()).unwrap();
    let test = x.select_rows(&(30..40).collect::<Vec<_>>()).unwrap();
    let (_, imputer) = fit_imputer(&train, &ImputationConfig::default()).unwrap();
    let a = imputer.transform(&test).unwrap();
    // a sentinel in another test row cannot change this row's imputation
    let mut poisoned = test.clone();
    poisoned.set(5, 0, Some(1e9));
    let b = imputer.transform(&poisoned).unwrap();
    for j in 0..6 {
        assert_eq!(a.value(0, j).to_bits(), b.value(0, j).to_bits());
    }
    assert!(!a.has_missing());
    for (o, c) in test.values().iter().zip(a.values()) {
        assert!(o.is_nan() || o.to_bits() == c.to_bits());
    }
}

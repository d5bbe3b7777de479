mod common;

use common::{cos, gaussian, seeded};
use embdebias::bias::{bias_correlation, domain_probe_accuracy, fit_lda_direction, BiasCorrelationReport, BiasDirection};
use embdebias::linalg::{from_rows, Matrix};
use embdebias::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn axis_aligned_separation() {
    let a = from_rows(&[[0.0, 0.0], [0.0, 1.0]], 2).unwrap();
    let b = from_rows(&[[4.0, 0.0], [4.0, 1.0]], 2).unwrap();
    let w = fit_lda_direction(&a, &b, 0.01).unwrap();
    assert!((w.vector[0] - 1.0).abs() < 1e-12 && w.vector[1].abs() < 1e-12, "{:?}", w.vector);
    assert_eq!((w.source.n_a, w.source.n_b), (2, 2));
}

#[test]
fn identical_clouds_are_degenerate() {
    let a = from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.0, 0.5]], 2).unwrap();
    assert!(matches!(fit_lda_direction(&a, &a, 0.01), Err(Error::DegenerateMeans { .. })));
}

#[test]
fn mismatched_dimension() {
    let a = from_rows(&[[1.0, 2.0], [3.0, -1.0]], 2).unwrap();
    let b = from_rows(&[[1.0], [3.0]], 1).unwrap();
    assert!(matches!(fit_lda_direction(&a, &b, 0.01), Err(Error::DimensionMismatch { .. })));
}

/// Samples with covariance `L Lᵀ` and mean `mu`.
fn correlated(seed: u64, n: usize, l: &Matrix, mu: &[f64]) -> Matrix {
    let z = gaussian(&mut seeded(seed), n, l.nrows());
    let mut x = z * l.transpose();
    for mut r in x.row_iter_mut() {
        for (v, m) in r.iter_mut().zip(mu) {
            *v += m;
        }
    }
    x
}

#[test]
fn recovers_population_direction() {
    // shared covariance diag(2, 1), Δμ = (1, 1): S⁻¹Δμ = (0.5, 1)
    let l = Matrix::from_diagonal(&DVector::from_vec(vec![2f64.sqrt(), 1.0]));
    let a = correlated(1, 10_000, &l, &[1.0, 1.0]);
    let b = correlated(2, 10_000, &l, &[0.0, 0.0]);
    let w = fit_lda_direction(&a, &b, 0.01).unwrap();
    assert!(cos(&w.vector, &[0.5, 1.0]) >= 0.99);
}

#[test]
fn isotropic_scatter_gives_mean_difference() {
    // two symmetric point sets with scatter exactly c·I
    let pts = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
    let a = from_rows(&pts.map(|p| [p[0] + 3.0, p[1] + 1.0]), 2).unwrap();
    let b = from_rows(&pts, 2).unwrap();
    let w = fit_lda_direction(&a, &b, 0.0).unwrap();
    assert!(1.0 - cos(&w.vector, &[3.0, 1.0]) <= 1e-9);
}

#[test]
fn large_shrinkage_tends_to_mean_difference() {
    let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.9, 0.4, 0.0, -0.5, 0.3, 0.2]);
    let a = correlated(3, 500, &l, &[0.3, -0.2, 0.5]);
    let b = correlated(4, 500, &l, &[0.0, 0.0, 0.0]);
    let dmu: Vec<f64> = (0..3).map(|j| a.column(j).mean() - b.column(j).mean()).collect();
    let w = fit_lda_direction(&a, &b, 1e6).unwrap();
    assert!(cos(&w.vector, &dmu) >= 1.0 - 1e-6);
}

#[test]
fn correlation_examples() {
    let w = BiasDirection::from_vector(vec![1.0, 0.0]).unwrap();
    assert_eq!(bias_correlation(&w, &[0.0, 1.0]).unwrap(), 0.0);
    assert!((bias_correlation(&w, &[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((bias_correlation(&w, &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    assert!(matches!(bias_correlation(&w, &[0.0, 0.0]), Err(Error::ZeroVector)));
}

#[test]
fn probe_examples() {
    let a = from_rows(&[[-1.0], [-2.0]], 1).unwrap();
    let b = from_rows(&[[1.0], [2.0]], 1).unwrap();
    let w = BiasDirection::from_vector(vec![1.0]).unwrap();
    assert_eq!(domain_probe_accuracy(&a, &b, &w).unwrap(), 1.0);
    assert_eq!(domain_probe_accuracy(&a, &a, &w).unwrap(), 0.5);
}

#[test]
fn correlation_report_mean() {
    let r = BiasCorrelationReport::new([("a".to_string(), -0.5), ("b".to_string(), 0.25)].into());
    assert!((r.mean_abs - 0.375).abs() < 1e-15);
}

proptest! {
    #[test]
    fn correlation_is_scale_invariant(seed in any::<u64>(), s in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let v = common::gaussian_vec(&mut seeded(seed), 6);
        let w = BiasDirection::from_vector(v.clone()).unwrap();
        let scaled: Vec<f64> = w.vector.iter().map(|x| x * s).collect();
        let c = bias_correlation(&w, &scaled).unwrap();
        prop_assert!((c - s.signum()).abs() <= 1e-12);
    }

    #[test]
    fn swap_flips_at_most_the_sign(seed in any::<u64>(), d in 2usize..6) {
        let mut r = seeded(seed);
        let a = gaussian(&mut r, 30, d).add_scalar(0.7);
        let b = gaussian(&mut r, 25, d);
        let w1 = fit_lda_direction(&a, &b, 0.01).unwrap();
        let w2 = fit_lda_direction(&b, &a, 0.01).unwrap();
        prop_assert!((common::norm(&w1.vector) - 1.0).abs() <= 1e-9);
        prop_assert!((cos(&w1.vector, &w2.vector).abs() - 1.0).abs() <= 1e-9);
    }
}

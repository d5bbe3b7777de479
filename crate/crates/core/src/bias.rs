//! Domain-separating directions and classifier sensitivity to them.
//!
//! A [`BiasDirection`] is the two-class LDA discriminant between samples of
//! two domains. Its cosine with a downstream classifier's coefficient
//! vector measures how much that classifier leans on domain identity.

use std::collections::BTreeMap;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_means, cosine, ensure_finite, population_covariance, Matrix, Vector};

/// Default ridge factor α in λ = α·trace(S_w)/D.
pub const DEFAULT_SHRINKAGE: f64 = 1e-2;

/// Components below this magnitude are skipped when fixing the sign.
const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DirectionScope {
    Global,
    Classwise { class: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSource {
    pub scope: DirectionScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
    pub n_a: usize,
    pub n_b: usize,
    pub shrinkage: f64,
}

/// Unit-norm domain-separating direction with its fitting provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDirection {
    pub vector: Vec<f64>,
    pub source: DirectionSource,
}

impl BiasDirection {
    /// Normalizes `v` and applies the sign convention (first non-negligible
    /// component positive). Source defaults to a global fit with no samples.
    pub fn from_vector(v: Vec<f64>) -> Result<Self> {
        let vector = canonical_unit(v)?;
        Ok(BiasDirection {
            vector,
            source: DirectionSource {
                scope: DirectionScope::Global,
                genre: None,
                n_a: 0,
                n_b: 0,
                shrinkage: 0.0,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn with_scope(mut self, scope: DirectionScope) -> Self {
        self.source.scope = scope;
        self
    }

    pub fn with_genre(mut self, genre: impl Into<String>) -> Self {
        self.source.genre = Some(genre.into());
        self
    }
}

fn canonical_unit(mut v: Vec<f64>) -> Result<Vec<f64>> {
    let n = crate::linalg::norm(&v);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::ZeroVector);
    }
    v.iter_mut().for_each(|x| *x /= n);
    if let Some(first) = v.iter().find(|x| x.abs() > SIGN_EPS) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(v)
}

fn check_pair(xa: &Matrix, xb: &Matrix) -> Result<()> {
    if xa.ncols() != xb.ncols() {
        return Err(Error::DimensionMismatch {
            expected: xa.ncols(),
            found: xb.ncols(),
        });
    }
    for x in [xa, xb] {
        if x.nrows() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                found: x.nrows(),
            });
        }
        ensure_finite(x)?;
    }
    Ok(())
}

/// Two-class LDA direction between the rows of `xa` and `xb`:
/// `normalize((S_w + λI)⁻¹ (μ_a − μ_b))` with `S_w` the average of the two
/// 1/N covariances and `λ = shrinkage · trace(S_w) / D`.
pub fn fit_lda_direction(xa: &Matrix, xb: &Matrix, shrinkage: f64) -> Result<BiasDirection> {
    check_pair(xa, xb)?;
    if !(shrinkage >= 0.0 && shrinkage.is_finite()) {
        return Err(Error::Config(format!("shrinkage must be finite and >= 0, got {shrinkage}")));
    }
    let d = xa.ncols();
    let mu_a = column_means(xa);
    let mu_b = column_means(xb);
    let diff: Vector = &mu_a - &mu_b;
    let gap = diff.norm();
    if gap < 1e-12 * (mu_a.norm() + mu_b.norm() + 1.0) {
        return Err(Error::DegenerateMeans { gap });
    }

    let mut scatter = (population_covariance(xa) + population_covariance(xb)) * 0.5;
    let lambda = shrinkage * scatter.trace() / d as f64;
    for i in 0..d {
        scatter[(i, i)] += lambda;
    }
    let chol = Cholesky::new(scatter).ok_or(Error::SingularScatter)?;
    let dir = chol.solve(&diff);
    let vector = canonical_unit(dir.iter().copied().collect())?;
    Ok(BiasDirection {
        vector,
        source: DirectionSource {
            scope: DirectionScope::Global,
            genre: None,
            n_a: xa.nrows(),
            n_b: xb.nrows(),
            shrinkage,
        },
    })
}

/// Cosine between a bias direction and a classifier coefficient vector.
pub fn bias_correlation(w: &BiasDirection, v: &[f64]) -> Result<f64> {
    cosine(&w.vector, v)
}

/// Balanced accuracy of thresholding the projection onto `w` at the midpoint
/// of the two projected means, folded into [0.5, 1].
pub fn domain_probe_accuracy(xa: &Matrix, xb: &Matrix, w: &BiasDirection) -> Result<f64> {
    check_pair(xa, xb)?;
    if w.dim() != xa.ncols() {
        return Err(Error::DimensionMismatch {
            expected: xa.ncols(),
            found: w.dim(),
        });
    }
    let wv = Vector::from_column_slice(&w.vector);
    let pa = xa * &wv;
    let pb = xb * &wv;
    let (ma, mb) = (pa.mean(), pb.mean());
    let t = 0.5 * (ma + mb);
    let (upper, lower) = if ma > mb { (&pa, &pb) } else { (&pb, &pa) };
    let frac = |p: &Vector, f: &dyn Fn(f64) -> bool| p.iter().filter(|&&x| f(x)).count() as f64 / p.len() as f64;
    let acc = 0.5 * (frac(upper, &|x| x > t) + frac(lower, &|x| x <= t));
    Ok(acc.max(1.0 - acc))
}

/// Per-class correlations `c_k` and the mean of their magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCorrelationReport {
    pub per_class: BTreeMap<String, f64>,
    pub mean_abs: f64,
}

impl BiasCorrelationReport {
    pub fn new(per_class: BTreeMap<String, f64>) -> Self {
        let mean_abs = if per_class.is_empty() {
            0.0
        } else {
            per_class.values().map(|c| c.abs()).sum::<f64>() / per_class.len() as f64
        };
        BiasCorrelationReport { per_class, mean_abs }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    #[test]
    fn axis_aligned_separation() {
        let a = from_rows(&[[0.0, 0.0], [0.0, 1.0]], 2).unwrap();
        let b = from_rows(&[[4.0, 0.0], [4.0, 1.0]], 2).unwrap();
        let w = fit_lda_direction(&a, &b, 0.01).unwrap();
        assert!((w.vector[0] - 1.0).abs() < 1e-12);
        assert!(w.vector[1].abs() < 1e-12);
        assert_eq!(w.source.n_a, 2);
    }

    #[test]
    fn identical_clouds_are_degenerate() {
        let a = from_rows(&[[1.0, 2.0], [3.0, 5.0], [0.0, 1.0]], 2).unwrap();
        assert!(matches!(fit_lda_direction(&a, &a, 0.01), Err(Error::DegenerateMeans { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let a = from_rows(&[[1.0, 2.0], [3.0, 5.0]], 2).unwrap();
        let b = from_rows(&[[1.0], [2.0]], 1).unwrap();
        assert!(matches!(fit_lda_direction(&a, &b, 0.01), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn too_few_samples() {
        let a = from_rows(&[[1.0]], 1).unwrap();
        let b = from_rows(&[[1.0], [2.0]], 1).unwrap();
        assert!(matches!(fit_lda_direction(&a, &b, 0.01), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn zero_shrinkage_singular_scatter() {
        let a = from_rows(&[[0.0, 0.0], [0.0, 1.0]], 2).unwrap();
        let b = from_rows(&[[4.0, 0.0], [4.0, 1.0]], 2).unwrap();
        assert!(matches!(fit_lda_direction(&a, &b, 0.0), Err(Error::SingularScatter)));
    }

    #[test]
    fn correlation_examples() {
        let w = BiasDirection::from_vector(vec![1.0, 0.0]).unwrap();
        assert_eq!(bias_correlation(&w, &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(bias_correlation(&w, &[2.0, 0.0]).unwrap(), 1.0);
        assert!((bias_correlation(&w, &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(bias_correlation(&w, &[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn probe_fully_separated() {
        let a = from_rows(&[[-1.0], [-2.0]], 1).unwrap();
        let b = from_rows(&[[1.0], [2.0]], 1).unwrap();
        let w = BiasDirection::from_vector(vec![1.0]).unwrap();
        assert_eq!(domain_probe_accuracy(&a, &b, &w).unwrap(), 1.0);
    }

    #[test]
    fn probe_identical_points() {
        let a = from_rows(&[[1.0, 1.0], [1.0, 1.0]], 2).unwrap();
        let w = BiasDirection::from_vector(vec![0.6, 0.8]).unwrap();
        assert_eq!(domain_probe_accuracy(&a, &a, &w).unwrap(), 0.5);
    }

    #[test]
    fn report_mean() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), -0.5);
        m.insert("b".to_string(), 0.25);
        assert_eq!(BiasCorrelationReport::new(m).mean_abs, 0.375);
    }

    #[test]
    fn sign_convention() {
        let w = BiasDirection::from_vector(vec![0.0, -3.0, 4.0]).unwrap();
        assert_eq!(w.vector, vec![0.0, 0.6, -0.8]);
    }
}

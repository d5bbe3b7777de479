//! Projection operators `x ↦ (I − BBᵀ)x` removing a bias direction or subspace.
//!
//! The operator keeps only the D×r orthonormal basis `B` and applies as r
//! rank-1 updates, so it stays cheap at kernelized dimensions.

use std::collections::BTreeMap;

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::bias::{BiasDirection, DirectionSource};
use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, Matrix};

/// Default relative threshold σ_min / σ_max for the full-rank check.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorFile", into = "OperatorFile")]
pub struct DebiasOperator {
    basis: Matrix,
    singular_values: Vec<f64>,
    provenance: Vec<DirectionSource>,
}

/// Serialized form: `basis` is a list of r basis vectors of length D.
#[derive(Serialize, Deserialize)]
struct OperatorFile {
    basis: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
    provenance: Vec<DirectionSource>,
}

impl From<DebiasOperator> for OperatorFile {
    fn from(op: DebiasOperator) -> Self {
        OperatorFile {
            basis: op.basis.column_iter().map(|c| c.iter().copied().collect()).collect(),
            singular_values: op.singular_values,
            provenance: op.provenance,
        }
    }
}

impl TryFrom<OperatorFile> for DebiasOperator {
    type Error = Error;

    fn try_from(f: OperatorFile) -> Result<Self> {
        let r = f.basis.len();
        let d = f.basis.first().map_or(0, Vec::len);
        if r == 0 || d == 0 {
            return Err(Error::validation("operator basis is empty"));
        }
        let mut basis = Matrix::zeros(d, r);
        for (j, col) in f.basis.iter().enumerate() {
            if col.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: col.len(),
                });
            }
            basis.column_mut(j).copy_from_slice(col);
        }
        if f.singular_values.len() != r {
            return Err(Error::validation("singular value count differs from basis rank"));
        }
        let op = DebiasOperator {
            basis,
            singular_values: f.singular_values,
            provenance: f.provenance,
        };
        let err = op.orthonormality_error();
        if err > 1e-8 {
            return Err(Error::validation(format!("basis is not orthonormal (‖BᵀB − I‖_F = {err:e})")));
        }
        Ok(op)
    }
}

impl DebiasOperator {
    /// Input dimension D.
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Number of removed directions r.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// D×r orthonormal basis of the removed subspace.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn provenance(&self) -> &[DirectionSource] {
        &self.provenance
    }

    /// `‖BᵀB − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.basis.tr_mul(&self.basis);
        (gram - Matrix::identity(self.rank(), self.rank())).norm()
    }

    /// Projects a single vector in place.
    pub fn apply_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        for b in self.basis.column_iter() {
            let c: f64 = b.iter().zip(x.iter()).map(|(u, v)| u * v).sum();
            for (xi, bi) in x.iter_mut().zip(b.iter()) {
                *xi -= c * bi;
            }
        }
        Ok(())
    }
}

/// Operator removing a single unit direction.
pub fn projector_from_direction(w: &BiasDirection) -> DebiasOperator {
    DebiasOperator {
        basis: Matrix::from_column_slice(w.dim(), 1, &w.vector),
        singular_values: vec![1.0],
        provenance: vec![w.source.clone()],
    }
}

/// Operator removing the span of several directions.
///
/// The directions are stacked as columns of a D×G matrix `W`; the basis is
/// the G left singular vectors of its reduced SVD, i.e. an orthonormal basis
/// of the column space of `W`. Fails unless `σ_min ≥ rel_tol · σ_max`.
pub fn projector_from_subspace(directions: &[BiasDirection], rel_tol: f64) -> Result<DebiasOperator> {
    let g = directions.len();
    let Some(first) = directions.first() else {
        return Err(Error::validation("at least one bias direction is required"));
    };
    let d = first.dim();
    for w in directions {
        if w.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w.dim(),
            });
        }
    }
    if g > d {
        return Err(Error::validation(format!("{g} directions exceed dimension {d}")));
    }
    let mut stacked = Matrix::zeros(d, g);
    for (j, w) in directions.iter().enumerate() {
        stacked.column_mut(j).copy_from_slice(&w.vector);
    }
    ensure_finite(&stacked)?;

    let svd = SVD::new(stacked, true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("Vᵀ requested");
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let (s_max, s_min) = (sigma[0], sigma[g - 1]);
    if !(s_min >= rel_tol * s_max) || s_max == 0.0 {
        // Coefficients of the near-null combination of the inputs.
        let null = v_t.row(order[g - 1]);
        let dependent_inputs = (0..g).filter(|&j| null[j].abs() >= 0.1).collect();
        return Err(Error::RankDeficient {
            singular_values: sigma,
            dependent_inputs,
        });
    }

    let mut basis = Matrix::zeros(d, g);
    for (k, &i) in order.iter().enumerate() {
        basis.set_column(k, &u.column(i));
    }
    Ok(DebiasOperator {
        basis,
        singular_values: sigma,
        provenance: directions.iter().map(|w| w.source.clone()).collect(),
    })
}

/// Projects every row of `x`: `X − (X B) Bᵀ`.
pub fn apply_debias(op: &DebiasOperator, x: &Matrix) -> Result<Matrix> {
    if x.ncols() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: x.ncols(),
        });
    }
    let coef = x * &op.basis;
    Ok(x - coef * op.basis.transpose())
}

/// Per-class operators; lookup of an absent class is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClasswiseDebias {
    dim: usize,
    operators: BTreeMap<String, DebiasOperator>,
}

impl ClasswiseDebias {
    pub fn get(&self, class: &str) -> Result<&DebiasOperator> {
        self.operators
            .get(class)
            .ok_or_else(|| Error::UnknownClass(class.to_string()))
    }

    pub fn apply(&self, class: &str, x: &Matrix) -> Result<Matrix> {
        apply_debias(self.get(class)?, x)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.operators.keys().map(String::as_str)
    }
}

pub fn classwise_operator_map(per_class: BTreeMap<String, DebiasOperator>) -> Result<ClasswiseDebias> {
    let dim = per_class
        .values()
        .next()
        .map(DebiasOperator::dim)
        .ok_or_else(|| Error::validation("class-wise operator map is empty"))?;
    for op in per_class.values() {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: op.dim(),
            });
        }
    }
    Ok(ClasswiseDebias {
        dim,
        operators: per_class,
    })
}

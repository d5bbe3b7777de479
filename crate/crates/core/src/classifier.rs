//! One-vs-rest L2-regularized logistic regression.
//!
//! The trained objective is
//!
//! ```text
//! (1/C)·½‖w‖² + Σ_i log(1 + exp(−ỹ_i (⟨w, x_i⟩ + b))),   ỹ_i ∈ {−1, +1}
//! ```
//!
//! with the intercept `b` unpenalized. It is minimized by damped Newton with
//! an Armijo backtracking line search, which is deterministic and reaches the
//! 1e-6 gradient tolerance in a handful of iterations on these problem sizes.

use std::cell::RefCell;

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::roc_auc;
use crate::linalg::{ensure_finite, gram, select_rows, Matrix, Vector};
use crate::seed::{derive_seed, rng};

pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 10_000;
pub const DEFAULT_FOLDS: usize = 5;

/// `{10^-8, 10^-7, …, 10^4}`.
pub fn default_c_grid() -> Vec<f64> {
    (-8..=4).map(|k| 10f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub n_samples: usize,
    pub n_positive: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// Objective after each accepted Newton step, starting with the initial value.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    #[serde(rename = "class")]
    pub class_name: String,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub c_value: f64,
    pub train_meta: TrainMeta,
}

impl ClassifierModel {
    pub fn with_class(mut self, name: impl Into<String>) -> Self {
        self.class_name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// The regularized logistic loss over a fixed design, parameterized by
/// `θ = [w; b]` of length D+1.
pub struct LogisticObjective {
    /// N×(D+1) design with a trailing column of ones.
    design: Matrix,
    signs: Vector,
    inv_c: f64,
    /// Row-scaled copy of the design, reused across Hessian evaluations.
    scratch: RefCell<Matrix>,
}

impl LogisticObjective {
    pub fn new(x: &Matrix, y: &[bool], c: f64) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("C must be positive and finite, got {c}")));
        }
        let d = x.ncols();
        let mut design = Matrix::from_element(x.nrows(), d + 1, 1.0);
        design.columns_mut(0, d).copy_from(x);
        let signs = Vector::from_iterator(y.len(), y.iter().map(|&p| if p { 1.0 } else { -1.0 }));
        Ok(LogisticObjective {
            scratch: RefCell::new(design.clone()),
            design,
            signs,
            inv_c: 1.0 / c,
        })
    }

    pub fn n_params(&self) -> usize {
        self.design.ncols()
    }

    fn margins(&self, theta: &Vector) -> Vector {
        (&self.design * theta).component_mul(&self.signs)
    }

    fn penalty(&self, theta: &Vector) -> f64 {
        let d = self.n_params() - 1;
        0.5 * self.inv_c * theta.rows(0, d).norm_squared()
    }

    pub fn value(&self, theta: &Vector) -> f64 {
        self.penalty(theta) + self.margins(theta).iter().map(|&m| softplus(-m)).sum::<f64>()
    }

    pub fn gradient(&self, theta: &Vector) -> Vector {
        let m = self.margins(theta);
        // d/dz softplus(−ỹz) = −ỹ·σ(−m)
        let r = Vector::from_iterator(m.len(), m.iter().zip(self.signs.iter()).map(|(&mi, &s)| -s * sigmoid(-mi)));
        let mut g = self.design.tr_mul(&r);
        let d = self.n_params() - 1;
        for j in 0..d {
            g[j] += self.inv_c * theta[j];
        }
        g
    }

    fn hessian(&self, theta: &Vector) -> Matrix {
        let m = self.margins(theta);
        let sq = Vector::from_iterator(m.len(), m.iter().map(|&mi| (sigmoid(mi) * sigmoid(-mi)).sqrt()));
        let mut scaled = self.scratch.borrow_mut();
        for (mut dst, src) in scaled.column_iter_mut().zip(self.design.column_iter()) {
            dst.zip_zip_apply(&src, &sq, |d, x, s| *d = x * s);
        }
        let mut h = gram(&scaled);
        let d = self.n_params() - 1;
        for j in 0..d {
            h[(j, j)] += self.inv_c;
        }
        h
    }
}

struct Fit {
    theta: Vector,
    iterations: usize,
    converged: bool,
    grad_norm: f64,
    trace: Vec<f64>,
}

fn newton_step(h: Matrix, g: &Vector) -> Vector {
    let scale = (h.trace() / h.nrows() as f64).max(f64::MIN_POSITIVE);
    let mut mu = 0.0;
    loop {
        let mut hm = h.clone();
        if mu > 0.0 {
            for i in 0..hm.nrows() {
                hm[(i, i)] += mu;
            }
        }
        if let Some(ch) = Cholesky::new(hm) {
            return -ch.solve(g);
        }
        mu = if mu == 0.0 { 1e-12 * scale } else { mu * 10.0 };
    }
}

fn minimize(obj: &LogisticObjective, init: Vector) -> Fit {
    let mut theta = init;
    let mut f = obj.value(&theta);
    let mut trace = vec![f];
    let mut g = obj.gradient(&theta);
    let mut gnorm = g.amax();
    let mut iterations = 0;
    while gnorm > GRAD_TOL && iterations < MAX_ITER {
        iterations += 1;
        let dir = newton_step(obj.hessian(&theta), &g);
        let slope = g.dot(&dir);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let cand = &theta + &dir * t;
            let fc = obj.value(&cand);
            if fc <= f + 1e-4 * t * slope {
                accepted = Some((cand, fc, None));
                break;
            }
            // Near the optimum f is flat to rounding; accept if the gradient shrinks.
            if fc <= f + 1e-12 * f.abs() {
                let gc = obj.gradient(&cand);
                if gc.amax() < gnorm {
                    accepted = Some((cand, fc, Some(gc)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        theta = cand;
        f = fc;
        trace.push(f);
        g = gc.unwrap_or_else(|| obj.gradient(&theta));
        gnorm = g.amax();
    }
    Fit {
        theta,
        iterations,
        converged: gnorm <= GRAD_TOL,
        grad_norm: gnorm,
        trace,
    }
}

fn check_labels(x: &Matrix, y: &[bool]) -> Result<usize> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: x.nrows(),
        });
    }
    ensure_finite(x)?;
    let pos = y.iter().filter(|&&p| p).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(pos)
}

fn train_from(x: &Matrix, y: &[bool], c: f64, seed: u64, init: Option<&Vector>) -> Result<ClassifierModel> {
    let n_positive = check_labels(x, y)?;
    let obj = LogisticObjective::new(x, y, c)?;
    let start = init.cloned().unwrap_or_else(|| {
        // Zero weights with the intercept at the optimum for w = 0.
        let mut t = Vector::zeros(obj.n_params());
        t[x.ncols()] = (n_positive as f64 / (x.nrows() - n_positive) as f64).ln();
        t
    });
    let fit = minimize(&obj, start);
    log::debug!("logreg n={} d={} C={c:e} iterations={} grad={:e}", x.nrows(), x.ncols(), fit.iterations, fit.grad_norm);
    if !fit.converged {
        log::warn!(
            "logistic regression (C = {c:e}) stopped after {} iterations with gradient {:e}",
            fit.iterations,
            fit.grad_norm
        );
    }
    let d = x.ncols();
    let weights: Vec<f64> = fit.theta.rows(0, d).iter().copied().collect();
    if weights.iter().any(|w| !w.is_finite()) || !fit.theta[d].is_finite() {
        return Err(Error::NonFinite { row: 0, column: d });
    }
    Ok(ClassifierModel {
        class_name: String::new(),
        weights,
        intercept: fit.theta[d],
        c_value: c,
        train_meta: TrainMeta {
            n_samples: x.nrows(),
            n_positive,
            seed,
            iterations: fit.iterations,
            converged: fit.converged,
            grad_norm: fit.grad_norm,
            initial_objective: fit.trace[0],
            final_objective: *fit.trace.last().expect("trace starts non-empty"),
            objective_trace: fit.trace,
        },
    })
}

/// Trains one binary model starting from zero weights and the log-odds
/// intercept. The solver is deterministic;
/// `seed` is recorded in the metadata.
pub fn train_logreg(x: &Matrix, y: &[bool], c: f64, seed: u64) -> Result<ClassifierModel> {
    train_from(x, y, c, seed, None)
}

pub fn predict_scores(model: &ClassifierModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.ncols(),
        });
    }
    let w = Vector::from_column_slice(&model.weights);
    Ok((x * w).iter().map(|&z| sigmoid(z + model.intercept)).collect())
}

/// The coefficient vector `v_k`, unnormalized.
pub fn classifier_direction(model: &ClassifierModel) -> &[f64] {
    &model.weights
}

/// Stratified fold assignment: positives and negatives are shuffled
/// separately and dealt round-robin.
pub fn stratified_folds(y: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..y.len()).filter(|&i| !y[i]).collect();
    if folds < 2 || pos.len() < folds || neg.len() < folds {
        return Err(Error::FoldDegenerate {
            folds,
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut assign = vec![0; y.len()];
    for (label, mut group) in [("pos", pos), ("neg", neg)] {
        let mut r = rng(derive_seed(seed, label));
        rand::seq::SliceRandom::shuffle(group.as_mut_slice(), &mut r);
        for (k, i) in group.into_iter().enumerate() {
            assign[i] = k % folds;
        }
    }
    Ok(assign)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Grid in ascending order.
    pub grid: Vec<f64>,
    /// Mean validation ROC-AUC per grid value.
    pub mean_auc: Vec<f64>,
    pub selected: f64,
}

/// Mean validation AUC for every grid value. Within a fold the grid is
/// walked in ascending order and each fit starts from the previous optimum.
pub fn cv_scores(x: &Matrix, y: &[bool], grid: &[f64], folds: usize, seed: u64) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(Error::Config("C grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::Config(format!("C grid value {bad} is not positive")));
    }
    check_labels(x, y)?;
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let assign = stratified_folds(y, folds, seed)?;
    let mut sums = vec![0.0; grid.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..y.len()).filter(|&i| assign[i] != fold).collect();
        let valid: Vec<usize> = (0..y.len()).filter(|&i| assign[i] == fold).collect();
        let xt = select_rows(x, &train);
        let yt: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let xv = select_rows(x, &valid);
        let yv: Vec<bool> = valid.iter().map(|&i| y[i]).collect();
        let mut warm: Option<Vector> = None;
        for (k, &c) in grid.iter().enumerate() {
            let model = train_from(&xt, &yt, c, seed, warm.as_ref())?;
            let scores = predict_scores(&model, &xv)?;
            sums[k] += roc_auc(&scores, &yv)?;
            let mut theta = Vector::from_column_slice(&model.weights).insert_row(model.dim(), 0.0);
            theta[model.dim()] = model.intercept;
            warm = Some(theta);
        }
    }
    let mean_auc: Vec<f64> = sums.iter().map(|s| s / folds as f64).collect();
    // Strict comparison keeps the smallest C among ties.
    let mut best = 0;
    for k in 1..grid.len() {
        if mean_auc[k] > mean_auc[best] {
            best = k;
        }
    }
    Ok(CvResult {
        selected: grid[best],
        grid,
        mean_auc,
    })
}

/// Grid value with the highest mean validation ROC-AUC; ties go to the smaller C.
pub fn cv_select_c(x: &Matrix, y: &[bool], grid: &[f64], folds: usize, seed: u64) -> Result<f64> {
    if let [only] = grid {
        return Ok(*only);
    }
    cv_scores(x, y, grid, folds, seed).map(|r| r.selected)
}

//! Z-score standardization and random Fourier features for the Gaussian
//! kernel `k(x, y) = exp(−γ‖x − y‖²)`.
//!
//! Feature j of `f(x)` is `sqrt(2/D′)·cos(⟨ω_j, x⟩ + b_j)` with
//! `ω_j ~ N(0, 2γ I)` and `b_j ~ U[0, 2π)`, so that `⟨f(x), f(y)⟩ ≈ k(x, y)`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::embeddings::{load_embeddings, save_embeddings, EmbeddingFormat, EmbeddingRow, EmbeddingTable};
use crate::data::sampling::sample_sorted;
use crate::error::{Error, Result};
use crate::linalg::{column_means, ensure_finite, select_rows, Matrix};
use crate::seed::{derive_seed, rng};

/// Lower bound on a standardizer scale.
pub const SCALE_FLOOR: f64 = 1e-8;

/// Output dimension multiplier used when none is given.
pub const DEFAULT_DPRIME_FACTOR: usize = 4;

/// Rows used by the median heuristic.
pub const MEDIAN_SAMPLE_ROWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn inverse(&self, z: &Matrix) -> Result<Matrix> {
        self.check(z)?;
        Ok(Matrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.scale[j] + self.mean[j]))
    }
}

/// Per-column mean and population standard deviation (floored at [`SCALE_FLOOR`]).
pub fn fit_standardizer(x: &Matrix) -> Result<Standardizer> {
    if x.nrows() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: x.nrows(),
        });
    }
    ensure_finite(x)?;
    let n = x.nrows() as f64;
    let mean = column_means(x);
    let scale = x
        .column_iter()
        .zip(mean.iter())
        .map(|(c, m)| {
            let var = c.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            var.sqrt().max(SCALE_FLOOR)
        })
        .collect();
    Ok(Standardizer {
        mean: mean.iter().copied().collect(),
        scale,
    })
}

pub fn apply_standardizer(s: &Standardizer, x: &Matrix) -> Result<Matrix> {
    s.check(x)?;
    Ok(Matrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - s.mean[j]) / s.scale[j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaHeuristic {
    Median,
}

/// Kernel bandwidth: a fixed positive value or `"median"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Fixed(f64),
    Heuristic(GammaHeuristic),
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Heuristic(GammaHeuristic::Median)
    }
}

/// Frozen random Fourier feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMap {
    input_dim: usize,
    /// D′×D, entries exactly representable in f32.
    frequencies: Matrix,
    phases: Vec<f64>,
    gamma: f64,
    seed: u64,
}

impl KernelMap {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.phases.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frequencies(&self) -> &Matrix {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }
}

/// Median pairwise Euclidean distance over at most [`MEDIAN_SAMPLE_ROWS`] rows.
pub fn median_pairwise_distance(x: &Matrix, seed: u64) -> Result<f64> {
    if x.nrows() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            found: x.nrows(),
        });
    }
    let rows: Vec<usize> = if x.nrows() > MEDIAN_SAMPLE_ROWS {
        let all: Vec<usize> = (0..x.nrows()).collect();
        sample_sorted(&all, MEDIAN_SAMPLE_ROWS, derive_seed(seed, "median-rows"))
    } else {
        (0..x.nrows()).collect()
    };
    // One contiguous column per sampled row.
    let t = select_rows(x, &rows).transpose();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for a in 0..t.ncols() {
        let ca = t.column(a);
        for b in a + 1..t.ncols() {
            let d2: f64 = ca.iter().zip(t.column(b).iter()).map(|(p, q)| (p - q) * (p - q)).sum();
            dists.push(d2.sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let n = dists.len();
    Ok(if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    })
}

/// Resolves `gamma`, so that `k` at the median distance `m` is `e^{-1/2}`
/// when the median heuristic is used (`γ = 1/(2m²)`).
pub fn resolve_gamma(gamma: GammaSpec, sample: Option<&Matrix>, seed: u64) -> Result<f64> {
    match gamma {
        GammaSpec::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
        GammaSpec::Fixed(g) => Err(Error::InvalidGamma(g)),
        GammaSpec::Heuristic(GammaHeuristic::Median) => {
            let x = sample.ok_or(Error::InsufficientSamples { needed: 2, found: 0 })?;
            let m = median_pairwise_distance(x, seed)?;
            let g = 1.0 / (2.0 * m * m);
            if g.is_finite() {
                Ok(g)
            } else {
                Err(Error::InvalidGamma(g))
            }
        }
    }
}

/// Samples a kernel map. `dprime = None` gives `4·D`.
pub fn fit_rff(
    input_dim: usize,
    dprime: Option<usize>,
    gamma: GammaSpec,
    seed: u64,
    sample: Option<&Matrix>,
) -> Result<KernelMap> {
    if input_dim == 0 {
        return Err(Error::validation("kernel input dimension must be at least 1"));
    }
    let dprime = dprime.unwrap_or(DEFAULT_DPRIME_FACTOR * input_dim);
    if dprime == 0 {
        return Err(Error::validation("kernel output dimension must be at least 1"));
    }
    if let Some(x) = sample {
        if x.ncols() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                found: x.ncols(),
            });
        }
    }
    let gamma = resolve_gamma(gamma, sample, seed)?;

    let mut r = rng(seed);
    let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).map_err(|_| Error::InvalidGamma(gamma))?;
    // Row-major draw order: ω_0 first, then ω_1, ...
    let mut frequencies = Matrix::zeros(dprime, input_dim);
    for i in 0..dprime {
        for j in 0..input_dim {
            let w: f64 = normal.sample(&mut r);
            frequencies[(i, j)] = f64::from(w as f32);
        }
    }
    let uniform = Uniform::new(0.0, 2.0 * PI).expect("valid phase range");
    let phases = (0..dprime).map(|_| r.sample(uniform)).collect();
    Ok(KernelMap {
        input_dim,
        frequencies,
        phases,
        gamma,
        seed,
    })
}

pub fn transform_rff(map: &KernelMap, x: &Matrix) -> Result<Matrix> {
    if x.ncols() != map.input_dim {
        return Err(Error::DimensionMismatch {
            expected: map.input_dim,
            found: x.ncols(),
        });
    }
    let scale = (2.0 / map.output_dim() as f64).sqrt();
    let mut z = x * map.frequencies.transpose();
    for (j, mut col) in z.column_iter_mut().enumerate() {
        let b = map.phases[j];
        col.apply(|v| *v = scale * (*v + b).cos());
    }
    Ok(z)
}

#[derive(Serialize, Deserialize)]
struct KernelSidecar {
    gamma: f64,
    seed: u64,
    dprime: usize,
    input_dim: usize,
    phases: Vec<f64>,
}

/// Writes the frequency table in the binary embedding container (row j has
/// clip id `omega`, frame j) and a JSON sidecar with the remaining state.
pub fn save_kernel_map(map: &KernelMap, table_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<()> {
    let rows = map
        .frequencies
        .row_iter()
        .enumerate()
        .map(|(j, row)| EmbeddingRow {
            clip_id: "omega".into(),
            frame_index: j as u32,
            vector: row.iter().copied().collect(),
        })
        .collect();
    let table = EmbeddingTable::new(map.input_dim, rows)?;
    save_embeddings(&table, table_path, EmbeddingFormat::Binary)?;
    let sidecar = KernelSidecar {
        gamma: map.gamma,
        seed: map.seed,
        dprime: map.output_dim(),
        input_dim: map.input_dim,
        phases: map.phases.clone(),
    };
    let path = sidecar_path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &sidecar)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_kernel_map(table_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<KernelMap> {
    let table = load_embeddings(table_path, EmbeddingFormat::Binary)?;
    let path = sidecar_path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let sidecar: KernelSidecar = serde_json::from_reader(BufReader::new(f))?;
    if table.len() != sidecar.dprime || sidecar.phases.len() != sidecar.dprime {
        return Err(Error::Format("kernel table and sidecar disagree on D′".into()));
    }
    if table.dim() != sidecar.input_dim {
        return Err(Error::DimensionMismatch {
            expected: sidecar.input_dim,
            found: table.dim(),
        });
    }
    if !(sidecar.gamma > 0.0) {
        return Err(Error::InvalidGamma(sidecar.gamma));
    }
    Ok(KernelMap {
        input_dim: table.dim(),
        frequencies: table.to_matrix(),
        phases: sidecar.phases,
        gamma: sidecar.gamma,
        seed: sidecar.seed,
    })
}

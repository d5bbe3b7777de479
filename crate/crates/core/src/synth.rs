//! Synthetic two-domain corpora with planted bias geometry.
//!
//! Each record is
//!
//! ```text
//! strength · u_class  +  Σ_bias ±(magnitude/2) · b  +  N(0, σ² I)
//! ```
//!
//! with `+` for domain `A` and `−` for domain `B`. A bias tied to a genre
//! only shifts records of that genre. Class directions are orthonormal and
//! orthogonal to every planted bias direction.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{save_embeddings, ClipRecord, EmbeddingFormat, EmbeddingRow, EmbeddingTable, GenreMap, LabelState, Manifest, Split};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng, Rng};

pub const DOMAINS: [&str; 2] = ["A", "B"];

pub fn class_name(k: usize) -> String {
    format!("c{k}")
}

pub fn genre_name(g: usize) -> String {
    format!("g{g}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedBias {
    /// Unit direction; drawn at random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    pub magnitude: f64,
    /// Genre index whose records carry this bias; all records when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<usize>,
}

/// Overrides the record count of one (domain, class, genre) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellCount {
    pub domain: String,
    pub class: usize,
    pub genre: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub dim: usize,
    pub n_classes: usize,
    pub n_genres: usize,
    pub samples_per_cell: usize,
    pub cell_counts: Vec<CellCount>,
    pub class_signal_strength: f64,
    pub biases: Vec<PlantedBias>,
    pub noise_sigma: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            dim: 64,
            n_classes: 4,
            n_genres: 2,
            samples_per_cell: 125,
            cell_counts: Vec::new(),
            class_signal_strength: 2.0,
            biases: vec![PlantedBias {
                direction: None,
                magnitude: 3.0,
                genre: None,
            }],
            noise_sigma: 1.0,
            train_fraction: 0.75,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dim == 0 || self.n_classes == 0 || self.n_genres == 0 {
            return bad("dim, n_classes and n_genres must be positive".into());
        }
        if self.samples_per_cell == 0 {
            return bad("samples_per_cell must be at least 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        if !self.class_signal_strength.is_finite() {
            return bad("class_signal_strength must be finite".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return bad(format!("train_fraction must lie in (0, 1], got {}", self.train_fraction));
        }
        for (i, b) in self.biases.iter().enumerate() {
            if !(b.magnitude >= 0.0 && b.magnitude.is_finite()) {
                return bad(format!("bias {i}: magnitude must be finite and >= 0"));
            }
            if let Some(g) = b.genre {
                if g >= self.n_genres {
                    return bad(format!("bias {i}: genre {g} out of range"));
                }
            }
            if let Some(d) = &b.direction {
                if d.len() != self.dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.dim,
                        found: d.len(),
                    });
                }
                let n = crate::linalg::norm(d);
                if !((n - 1.0).abs() <= 1e-9) {
                    return bad(format!("bias {i}: direction is not unit length (norm {n})"));
                }
            }
        }
        for c in &self.cell_counts {
            if !DOMAINS.contains(&c.domain.as_str()) || c.class >= self.n_classes || c.genre >= self.n_genres {
                return bad(format!("cell count override {c:?} is out of range"));
            }
            if c.count == 0 {
                return bad(format!("cell count override {c:?} must be at least 1"));
            }
        }
        if self.dim <= self.biases.len() + self.n_classes {
            return Err(Error::InfeasibleSpec(format!(
                "dimension {} must exceed bias count {} plus class count {}",
                self.dim,
                self.biases.len(),
                self.n_classes
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self, domain: &str, class: usize, genre: usize) -> usize {
        self.cell_counts
            .iter()
            .rev()
            .find(|c| c.domain == domain && c.class == class && c.genre == genre)
            .map_or(self.samples_per_cell, |c| c.count)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SynthSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthBias {
    pub direction: Vec<f64>,
    pub magnitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub dataset: String,
    pub clip_id: String,
    pub class: String,
    pub genre: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub biases: Vec<TruthBias>,
    pub class_directions: BTreeMap<String, Vec<f64>>,
    pub records: Vec<TruthRecord>,
}

#[derive(Debug, Clone)]
pub struct SynthDomain {
    pub name: String,
    pub table: EmbeddingTable,
    pub manifest: Manifest,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub domains: Vec<SynthDomain>,
    pub genre_map: GenreMap,
    pub truth: GroundTruth,
}

fn gaussian_vector(r: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(r)).collect()
}

/// Removes from `v` its components along each (unit) vector of `basis`,
/// twice for numerical safety, and normalizes.
fn orthonormalize_against(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Option<Vec<f64>> {
    for _ in 0..2 {
        for b in basis {
            let c = crate::linalg::dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let n = crate::linalg::norm(&v);
    (n > 1e-8).then(|| v.into_iter().map(|x| x / n).collect())
}

/// Builds both domains. Vectors are rounded to f32 so the binary embedding
/// container stores them exactly.
pub fn generate_biased_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let d = spec.dim;
    let mut dir_rng = rng(derive_seed(spec.seed, "directions"));

    let mut biases = Vec::with_capacity(spec.biases.len());
    for b in &spec.biases {
        let direction = match &b.direction {
            Some(v) => v.clone(),
            None => orthonormalize_against(gaussian_vector(&mut dir_rng, d), &[])
                .ok_or_else(|| Error::InfeasibleSpec("could not draw a bias direction".into()))?,
        };
        biases.push(TruthBias {
            direction,
            magnitude: b.magnitude,
            genre: b.genre.map(genre_name),
        });
    }

    // Orthonormal basis of the bias span, then class directions orthogonal to it.
    let mut span: Vec<Vec<f64>> = Vec::new();
    for b in &biases {
        if let Some(u) = orthonormalize_against(b.direction.clone(), &span) {
            span.push(u);
        }
    }
    let mut class_dirs: Vec<Vec<f64>> = Vec::with_capacity(spec.n_classes);
    for _ in 0..spec.n_classes {
        let mut basis = span.clone();
        basis.extend(class_dirs.iter().cloned());
        let u = (0..16)
            .find_map(|_| orthonormalize_against(gaussian_vector(&mut dir_rng, d), &basis))
            .ok_or_else(|| Error::InfeasibleSpec("could not construct orthogonal class directions".into()))?;
        class_dirs.push(u);
    }

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut noise_rng = rng(derive_seed(spec.seed, "noise"));
    let classes: Vec<String> = (0..spec.n_classes).map(class_name).collect();
    let mut domains = Vec::with_capacity(2);
    let mut truth_records = Vec::new();
    for (di, domain) in DOMAINS.iter().enumerate() {
        let sign = if di == 0 { 0.5 } else { -0.5 };
        let mut rows = Vec::new();
        let mut records = Vec::new();
        for (k, class) in classes.iter().enumerate() {
            for g in 0..spec.n_genres {
                let genre = genre_name(g);
                let n = spec.cell_count(domain, k, g);
                let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n);
                for i in 0..n {
                    let mut v: Vec<f64> = (0..d).map(|_| noise.sample(&mut noise_rng)).collect();
                    for (x, u) in v.iter_mut().zip(&class_dirs[k]) {
                        *x += spec.class_signal_strength * u;
                    }
                    for (b, planted) in biases.iter().zip(&spec.biases) {
                        if planted.genre.is_some_and(|bg| bg != g) {
                            continue;
                        }
                        for (x, u) in v.iter_mut().zip(&b.direction) {
                            *x += sign * b.magnitude * u;
                        }
                    }
                    let v: Vec<f64> = v.into_iter().map(|x| x as f32 as f64).collect();
                    let clip_id = format!("{domain}-{class}-{genre}-{i:05}");
                    let split = if i < n_train { Split::Train } else { Split::Test };
                    let labels = classes
                        .iter()
                        .enumerate()
                        .map(|(j, c)| (c.clone(), if j == k { LabelState::Positive } else { LabelState::Negative }))
                        .collect();
                    rows.push(EmbeddingRow {
                        clip_id: clip_id.clone(),
                        frame_index: 0,
                        vector: v,
                    });
                    records.push(ClipRecord {
                        clip_id: clip_id.clone(),
                        dataset: domain.to_string(),
                        split,
                        genres: vec![genre.clone()],
                        labels,
                    });
                    truth_records.push(TruthRecord {
                        dataset: domain.to_string(),
                        clip_id,
                        class: class.clone(),
                        genre: genre.clone(),
                        split,
                    });
                }
            }
        }
        domains.push(SynthDomain {
            name: domain.to_string(),
            table: EmbeddingTable::new(d, rows)?,
            manifest: Manifest::new(records)?.with_classes(&classes),
        });
    }

    let genre_map = GenreMap::new((0..spec.n_genres).map(genre_name).collect(), BTreeMap::new())?;
    Ok(SynthCorpus {
        domains,
        genre_map,
        truth: GroundTruth {
            biases,
            class_directions: classes.iter().cloned().zip(class_dirs).collect(),
            records: truth_records,
        },
    })
}

/// Paths written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    /// `(dataset, embeddings, manifest)` per domain.
    pub domains: Vec<(String, PathBuf, PathBuf)>,
    pub genre_map: PathBuf,
    pub ground_truth: PathBuf,
    pub spec: PathBuf,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `<domain>.emb` (binary), `<domain>.manifest.jsonl`,
/// `genre_map.json`, `ground_truth.json` and `spec.json` under `out`.
pub fn write_corpus(corpus: &SynthCorpus, spec: &SynthSpec, out: impl AsRef<Path>) -> Result<CorpusFiles> {
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut domains = Vec::new();
    for dom in &corpus.domains {
        let emb = out.join(format!("{}.emb", dom.name));
        let man = out.join(format!("{}.manifest.jsonl", dom.name));
        save_embeddings(&dom.table, &emb, EmbeddingFormat::Binary)?;
        dom.manifest.save(&man)?;
        domains.push((dom.name.clone(), emb, man));
    }
    let files = CorpusFiles {
        domains,
        genre_map: out.join("genre_map.json"),
        ground_truth: out.join("ground_truth.json"),
        spec: out.join("spec.json"),
    };
    write_json(&files.genre_map, &corpus.genre_map)?;
    write_json(&files.ground_truth, &corpus.truth)?;
    write_json(&files.spec, spec)?;
    Ok(files)
}

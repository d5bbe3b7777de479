use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bias::DEFAULT_SHRINKAGE;
use crate::classifier::{default_c_grid, DEFAULT_FOLDS};
use crate::data::EmbeddingFormat;
use crate::debias::DEFAULT_REL_TOL;
use crate::error::{Error, Result};
use crate::kernel::{GammaSpec, DEFAULT_DPRIME_FACTOR};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "LDA")]
    Lda,
    #[serde(rename = "mLDA")]
    Mlda,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "KLDA")]
    Klda,
    #[serde(rename = "mKLDA")]
    Mklda,
}

/// How a strategy removes bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DebiasKind {
    Off,
    Single,
    Genre,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::None,
        Strategy::Lda,
        Strategy::Mlda,
        Strategy::K,
        Strategy::Klda,
        Strategy::Mklda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::Lda => "LDA",
            Strategy::Mlda => "mLDA",
            Strategy::K => "K",
            Strategy::Klda => "KLDA",
            Strategy::Mklda => "mKLDA",
        }
    }

    pub fn kernelized(self) -> bool {
        matches!(self, Strategy::K | Strategy::Klda | Strategy::Mklda)
    }

    pub fn debias(self) -> DebiasKind {
        match self {
            Strategy::None | Strategy::K => DebiasKind::Off,
            Strategy::Lda | Strategy::Klda => DebiasKind::Single,
            Strategy::Mlda | Strategy::Mklda => DebiasKind::Genre,
        }
    }

    /// `input` or `kernel`.
    pub fn space(self) -> &'static str {
        if self.kernelized() {
            "kernel"
        } else {
            "input"
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}` (expected none, LDA, mLDA, K, KLDA or mKLDA)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    #[default]
    Global,
    Classwise,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Global => "global",
            Scope::Classwise => "classwise",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Scope::Global),
            "classwise" => Ok(Scope::Classwise),
            other => Err(Error::Config(format!("unknown scope `{other}` (expected global or classwise)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub embeddings: PathBuf,
    /// Guessed from the file extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<EmbeddingFormat>,
    pub manifest: PathBuf,
}

impl DatasetConfig {
    pub fn embedding_format(&self) -> EmbeddingFormat {
        self.format.unwrap_or_else(|| EmbeddingFormat::from_path(&self.embeddings))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub dprime_factor: usize,
    pub gamma: GammaSpec,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            dprime_factor: DEFAULT_DPRIME_FACTOR,
            gamma: GammaSpec::default(),
        }
    }
}

/// Explicit per-purpose seeds; each one absent is derived from the master seed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rff: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedSeeds {
    pub sampling: u64,
    pub rff: u64,
    pub cv: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genre_map: Option<PathBuf>,
    /// Empty means every class named in the manifests.
    #[serde(default)]
    pub classes: Vec<String>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default = "default_shrinkage")]
    pub lda_shrinkage: f64,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seeds: SeedOverrides,
    #[serde(default = "default_min_genre")]
    pub min_genre_samples: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    pub output_dir: PathBuf,
    /// Tag every sample read and fail on a test-split read during fitting.
    #[serde(default)]
    pub instrument: bool,
}

fn default_strategy() -> Strategy {
    Strategy::None
}

fn default_shrinkage() -> f64 {
    DEFAULT_SHRINKAGE
}

fn default_folds() -> usize {
    DEFAULT_FOLDS
}

fn default_min_genre() -> usize {
    5
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    /// Config with defaults for everything but the data.
    pub fn new(datasets: Vec<DatasetConfig>, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            datasets,
            genre_map: None,
            classes: Vec::new(),
            strategy: Strategy::None,
            scope: Scope::Global,
            kernel: KernelConfig::default(),
            lda_shrinkage: DEFAULT_SHRINKAGE,
            c_grid: default_c_grid(),
            cv_folds: DEFAULT_FOLDS,
            seed: 0,
            seeds: SeedOverrides::default(),
            min_genre_samples: default_min_genre(),
            rel_tol: DEFAULT_REL_TOL,
            output_dir: output_dir.into(),
            instrument: false,
        }
    }

    /// Reads a JSON config; relative paths are taken relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for d in &mut cfg.datasets {
            resolve(&base, &mut d.embeddings);
            resolve(&base, &mut d.manifest);
        }
        if let Some(g) = &mut cfg.genre_map {
            resolve(&base, g);
        }
        resolve(&base, &mut cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.len() != 2 {
            return bad(format!("exactly two datasets are required, found {}", self.datasets.len()));
        }
        if self.datasets[0].name == self.datasets[1].name {
            return bad(format!("dataset names must differ (both `{}`)", self.datasets[0].name));
        }
        if !(self.lda_shrinkage >= 0.0 && self.lda_shrinkage.is_finite()) {
            return bad(format!("lda_shrinkage must be finite and >= 0, got {}", self.lda_shrinkage));
        }
        if self.c_grid.is_empty() || self.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return bad("c_grid must be a non-empty list of positive values".into());
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if self.kernel.dprime_factor == 0 {
            return bad("kernel.dprime_factor must be at least 1".into());
        }
        if let GammaSpec::Fixed(g) = self.kernel.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidGamma(g));
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return bad(format!("rel_tol must lie in (0, 1), got {}", self.rel_tol));
        }
        if self.strategy.debias() == DebiasKind::Genre && self.genre_map.is_none() {
            return bad(format!("strategy {} needs a genre_map", self.strategy));
        }
        Ok(())
    }

    /// Checks that every referenced file exists.
    pub fn check_paths(&self) -> Result<()> {
        let mut paths: Vec<&Path> = self
            .datasets
            .iter()
            .flat_map(|d| [d.embeddings.as_path(), d.manifest.as_path()])
            .collect();
        if let Some(g) = &self.genre_map {
            paths.push(g);
        }
        for p in paths {
            if !p.is_file() {
                return Err(Error::Config(format!("file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn resolved_seeds(&self) -> ResolvedSeeds {
        ResolvedSeeds {
            sampling: self.seeds.sampling.unwrap_or_else(|| derive_seed(self.seed, "sampling")),
            rff: self.seeds.rff.unwrap_or_else(|| derive_seed(self.seed, "rff")),
            cv: self.seeds.cv.unwrap_or_else(|| derive_seed(self.seed, "cv")),
        }
    }

    /// Hex SHA-256 of the config (minus output location and instrumentation)
    /// together with the resolved seeds and any `extra` labels.
    pub fn fingerprint(&self, extra: &[&str]) -> String {
        #[derive(Serialize)]
        struct Canon<'a> {
            config: &'a ExperimentConfig,
            seeds: ResolvedSeeds,
            extra: &'a [&'a str],
        }
        let mut cfg = self.clone();
        cfg.output_dir = PathBuf::new();
        cfg.instrument = false;
        let canon = Canon {
            config: &cfg,
            seeds: self.resolved_seeds(),
            extra,
        };
        let bytes = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Seeds used for one class. They depend on the class (and domain), never on
/// the strategy, so strategies are compared on identical samples and folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassSeeds {
    pub positives: u64,
    pub negatives: u64,
    pub rff: u64,
    cv: u64,
}

impl ClassSeeds {
    pub fn new(seeds: &ResolvedSeeds, class: &str) -> Self {
        ClassSeeds {
            positives: derive_seed(seeds.sampling, &format!("{class}/pos")),
            negatives: derive_seed(seeds.sampling, &format!("{class}/neg")),
            rff: derive_seed(seeds.rff, class),
            cv: derive_seed(seeds.cv, class),
        }
    }

    pub fn cv_for(&self, domain: &str) -> u64 {
        derive_seed(self.cv, domain)
    }
}

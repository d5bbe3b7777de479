use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Validation { line: Option<usize>, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("class means are indistinguishable (|mu_a - mu_b| = {gap:e})")]
    DegenerateMeans { gap: f64 },

    #[error("insufficient samples: need at least {needed}, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("matrix is not positive definite; increase shrinkage")]
    SingularScatter,

    #[error("zero-length vector")]
    ZeroVector,

    #[error(
        "bias directions are rank deficient: singular values {singular_values:?}, \
         dependent inputs {dependent_inputs:?}"
    )]
    RankDeficient {
        singular_values: Vec<f64>,
        dependent_inputs: Vec<usize>,
    },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("class `{class}` has no eligible {state} records on side {side}")]
    EmptyClass {
        class: String,
        state: String,
        side: char,
    },

    #[error("invalid kernel bandwidth gamma = {0}")]
    InvalidGamma(f64),

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("labels contain a single class")]
    SingleClass,

    #[error("stratified {folds}-fold split is degenerate: {positives} positives, {negatives} negatives")]
    FoldDegenerate {
        folds: usize,
        positives: usize,
        negatives: usize,
    },

    #[error("report is missing cell {0}")]
    IncompleteMatrix(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("test-split record `{clip_id}` read during {phase}")]
    Leakage { clip_id: String, phase: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            line: None,
            message: message.into(),
        }
    }

    /// Wraps the error with a human-readable location, e.g. `class=organ strategy=LDA`.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping `Context` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// Stable name of the innermost error variant, e.g. `DegenerateMeans`.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
            Error::Validation { .. } => "Validation",
            Error::Format(_) => "Format",
            Error::NonFinite { .. } => "NonFinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::DegenerateMeans { .. } => "DegenerateMeans",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::SingularScatter => "SingularScatter",
            Error::ZeroVector => "ZeroVector",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::UnknownClass(_) => "UnknownClass",
            Error::EmptyClass { .. } => "EmptyClass",
            Error::InvalidGamma(_) => "InvalidGamma",
            Error::InfeasibleSpec(_) => "InfeasibleSpec",
            Error::SingleClass => "SingleClass",
            Error::FoldDegenerate { .. } => "FoldDegenerate",
            Error::IncompleteMatrix(_) => "IncompleteMatrix",
            Error::Layout(_) => "Layout",
            Error::Leakage { .. } => "Leakage",
            Error::Config(_) => "Config",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::Context { .. } => unreachable!("root skips context"),
        }
    }
}

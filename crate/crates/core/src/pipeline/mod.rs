//! End-to-end experiments: strategy × scope × transfer direction.

mod config;
mod corpus;
mod matrix;
mod run;

pub use config::{
    ClassSeeds, DatasetConfig, DebiasKind, ExperimentConfig, KernelConfig, ResolvedSeeds, Scope, SeedOverrides, Strategy,
};
pub use corpus::{corpus_from_parts, load_corpus, Access, AccessAudit, Corpus, DomainData, Phase};
pub use matrix::{load_report, run_dir, run_matrix, run_matrix_on, write_report, write_run, MatrixOutput, REPORT_FILE};
pub use run::{
    bias_samples, declared_cells, fit_classifier, fit_debias, genre_histogram, probe, probe_on, run_strategy, run_strategy_on,
    test_set, training_sets, FeatureMap, FittedDebias, RunOutput,
};

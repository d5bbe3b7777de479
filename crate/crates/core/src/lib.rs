//! Domain-bias analysis and removal for pre-trained embedding features.
//!
//! Fits domain-separating directions with two-class LDA, removes them with
//! orthogonal projections (optionally in a random-Fourier-feature space),
//! trains one-vs-rest logistic regressions, and evaluates within- and
//! cross-domain transfer.

pub mod bias;
pub mod classifier;
pub mod data;
pub mod debias;
pub mod error;
pub mod evaluation;
pub mod kernel;
pub mod linalg;
pub mod pipeline;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};

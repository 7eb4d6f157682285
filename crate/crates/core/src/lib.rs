//! Multi-modal text + EEG/gaze sequence classification.
//!
//! The crate covers the whole pipeline: a corpus format and a seeded synthetic
//! corpus generator, word-level EEG band features (FFT band-pass + Hilbert
//! envelope aligned to eye fixations), a small differentiable layer kit, late
//! fusion two-tower models, a cross-validated training driver, and the
//! evaluation harness (macro metrics, paired bootstrap, Bonferroni, ablations).
//!
//! Numerical code is generic over [`Scalar`] (`f32` for training, `f64` for
//! gradient checking). Concrete aliases for the common instantiations live at
//! the crate root.

pub mod commands;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod signal;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Network used for training.
pub type Network = model::Network<f32>;
/// Double precision network, used by gradient checks.
pub type Network64 = model::Network<f64>;
/// Word-level feature matrix as stored and exported.
pub type WordFeatures = signal::WordFeatureMatrix<f32>;
/// Word-level feature matrix in double precision.
pub type WordFeatures64 = signal::WordFeatureMatrix<f64>;
/// Training batch in single precision.
pub type Batch = model::Batch<f32>;
/// Training batch in double precision.
pub type Batch64 = model::Batch<f64>;

//! Variance-based softmax smoothing for post-hoc calibration.
//!
//! A classifier that emits one logit vector per sub-patch of its input (an
//! audio window, an image tile) already carries an uncertainty signal: how
//! much those sub-patch predictions disagree. This crate turns that spread
//! into a softmax temperature, and ships the baselines, metrics, input
//! perturbations and a small synthetic task needed to evaluate it.
//!
//! The numeric modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases. File formats and the
//! command line use `f64`.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod noise;
pub mod real;
pub mod seed;
pub mod smoothing;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use real::{argmax, Real};
pub use types::{
    mean_over_rows, softmax, BetaPolicy, EnsembleLogits, LogitMatrix, Matrix, PooledLogits,
    ProbVector, SigmaStats, SmoothingConfig,
};

pub type LogitMatrixF64 = LogitMatrix<f64>;
pub type LogitMatrixF32 = LogitMatrix<f32>;
pub type EnsembleLogitsF64 = EnsembleLogits<f64>;
pub type EnsembleLogitsF32 = EnsembleLogits<f32>;
pub type ProbVectorF64 = ProbVector<f64>;
pub type ProbVectorF32 = ProbVector<f32>;
pub type SigmaStatsF64 = SigmaStats<f64>;
pub type SmoothingConfigF64 = SmoothingConfig<f64>;
pub type SmoothingConfigF32 = SmoothingConfig<f32>;
pub type CalibrationReportF64 = metrics::CalibrationReport<f64>;

//! Monte-Carlo laboratory for entrywise fluctuation laws of sample
//! covariance matrices.
//!
//! `mp-core` supplies the deterministic predictions; this crate generates the
//! random matrices, applies test functions through several exact evaluation
//! routes, collects sqrt(N)-normalized fluctuation samples, and confronts
//! them with the predictions through variance, goodness-of-fit, independence
//! and covariance-block tests. The `mpfluct` binary drives the whole pipeline
//! from JSON configs.

// Force the OpenBLAS link for ndarray's BLAS-backed matrix products.
use blas_src as _;

pub mod blas;
pub mod cli;
pub mod config;
pub mod ensemble;
pub mod fluct_mc;
pub mod funcalc;
pub mod hs;
pub mod report;
pub mod stats;

pub use ensemble::{form_covariance, sample_matrix, truncate_entries, EnsembleSpec, EntryDist};
pub use fluct_mc::{
    resolvent_decay_probe, run_entry_fluctuations, run_resolvent_field, Centering,
    FluctuationBatch, ResolventFieldBatch,
};

/// Errors produced by the laboratory layer.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Core(#[from] mp_core::CoreError),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("truncation level leaves zero variance")]
    DegenerateTruncation,

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("{failed} of {total} trials failed eigensolves (tolerated: {tolerated})")]
    TooManyFailedTrials {
        failed: usize,
        total: usize,
        tolerated: usize,
    },

    #[error("integration grid too coarse: refinement moved the result by {relative_change:e} (tolerance {tolerance:e}); coarse norm {coarse_norm:e}, refined norm {refined_norm:e}")]
    GridTooCoarse {
        relative_change: f64,
        tolerance: f64,
        coarse_norm: f64,
        refined_norm: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for LabError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        LabError::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

//! Deterministic analytics for sample covariance random matrices.
//!
//! Everything in this crate is a pure function of its arguments: the
//! Marchenko-Pastur density and its Stieltjes transform, expectations against
//! the law computed by edge-desingularized adaptive quadrature, the variance
//! functionals `omega2`/`rho` that drive the entrywise central limit theorems,
//! the `phi` kernels behind the resolvent-field covariances, and the closed
//! covariance predictions themselves.
//!
//! The crate is `no_std`-compatible (enable the `libm` feature and disable
//! default features); the companion `mp-lab` crate carries the Monte-Carlo
//! harness, IO and the CLI.

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("mp-core needs either the `std` or the `libm` feature");

pub mod jet;
pub mod kernels;
pub mod params;
pub mod predict;
pub mod quad;
pub mod stieltjes;
pub mod testfn;

mod density;
mod fm;
mod moments;

pub use density::{mp_cdf, mp_density};
pub use kernels::{phi_kernel, phi_parts, relation_g_residual, relation_phi_residual, PhiParts};
pub use moments::{mp_expect, mp_integrate, omega2, orthonormal_p1, rho};
pub use params::MpParams;
pub use predict::{
    predict_entry_clt, predict_resolvent_field_cov, resolvent_cov_via_mp, CovBlock2, EntryField,
    Prediction,
};
pub use quad::{adaptive_gk15, QuadResult, QuadValue};
pub use stieltjes::{stieltjes_g, stieltjes_g_prime};
pub use testfn::TestFunction;

pub use num_complex::Complex64;

/// Errors shared by the analytic layer.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    /// Parameter validation failed (non-positive `sigma2`/`c`, bad family
    /// parameters, empty coefficient lists, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    /// The adaptive quadrature exhausted its evaluation budget before
    /// reaching the requested absolute tolerance.
    #[error("quadrature did not converge: requested {requested:e}, achieved {achieved:e}")]
    QuadratureNoConvergence { requested: f64, achieved: f64 },

    /// A resolvent-domain argument was inside `[0, u_plus]` on the real axis.
    #[error("point {re} lies inside the support interval [0, {u_plus}]")]
    InsideSupport { re: f64, u_plus: f64 },

    /// A test function is invalid for the given law (e.g. a Cauchy pole
    /// touching the support).
    #[error("test function invalid: {0}")]
    InvalidTestFunction(&'static str),

    /// Two independent evaluation routes for the same quantity disagreed
    /// beyond tolerance; flagged instead of silently picking one.
    #[error("evaluation routes disagree by {difference:e} (tolerance {tolerance:e})")]
    RouteMismatch { difference: f64, tolerance: f64 },
}

pub type Result<T> = core::result::Result<T, CoreError>;

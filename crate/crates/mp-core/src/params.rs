//! Law parameters: the pair (sigma^2, c) and the derived support edges.

use crate::fm;
use crate::{CoreError, Result};

/// Parameters of the Marchenko-Pastur law: scale index `sigma2` (the entry
/// variance) and ratio index `c` (the column/row ratio limit).
///
/// The continuous part of the law lives on `[edge_lower(), edge_upper()]`
/// with `edge_lower = sigma2 (1 - sqrt(c))^2` and
/// `edge_upper = sigma2 (1 + sqrt(c))^2`; for `c < 1` there is an additional
/// point mass at zero of weight `1 - c`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MpParams {
    sigma2: f64,
    c: f64,
}

impl MpParams {
    pub fn new(sigma2: f64, c: f64) -> Result<Self> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(CoreError::InvalidParameter("sigma2 must be positive"));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(CoreError::InvalidParameter("c must be positive"));
        }
        Ok(Self { sigma2, c })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Lower support edge `u_- = sigma2 (1 - sqrt(c))^2`.
    pub fn edge_lower(&self) -> f64 {
        let s = fm::sqrt(self.c);
        self.sigma2 * (1.0 - s) * (1.0 - s)
    }

    /// Upper support edge `u_+ = sigma2 (1 + sqrt(c))^2`.
    pub fn edge_upper(&self) -> f64 {
        let s = fm::sqrt(self.c);
        self.sigma2 * (1.0 + s) * (1.0 + s)
    }

    /// Weight of the point mass at zero: `max(0, 1 - c)`.
    pub fn atom_weight(&self) -> f64 {
        (1.0 - self.c).max(0.0)
    }

    /// Mean of the law, `c sigma2`.
    pub fn mean(&self) -> f64 {
        self.c * self.sigma2
    }

    /// The law with inverted ratio index, `(sigma2, 1/c)`; the `phi` kernels
    /// of the resolvent-field covariances integrate against it.
    pub fn ratio_inverted(&self) -> Self {
        Self {
            sigma2: self.sigma2,
            c: 1.0 / self.c,
        }
    }

    /// Distance from a real point to the support `{0} ∪ [u_-, u_+]`
    /// (the atom counted only when `c < 1`).
    pub fn support_distance(&self, x: f64) -> f64 {
        let lo = self.edge_lower();
        let hi = self.edge_upper();
        let d_band = if x < lo {
            lo - x
        } else if x > hi {
            x - hi
        } else {
            0.0
        };
        if self.c < 1.0 {
            d_band.min(fm::abs(x))
        } else {
            d_band
        }
    }
}

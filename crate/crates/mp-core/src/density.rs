//! Marchenko-Pastur density and distribution function.

use crate::fm;
use crate::moments::integrate_continuous_theta;
use crate::params::MpParams;
use crate::Result;

/// Density of the continuous part of the law at `x`:
/// `sqrt((u_+ - x)(x - u_-)) / (2 pi x sigma2)` on `[u_-, u_+] ∩ (0, ∞)`,
/// zero elsewhere. The point mass at zero is reported separately by
/// [`MpParams::atom_weight`], never folded into the density.
pub fn mp_density(x: f64, p: &MpParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lo = p.edge_lower();
    let hi = p.edge_upper();
    if x < lo || x > hi {
        return 0.0;
    }
    let radicand = (hi - x) * (x - lo);
    if radicand <= 0.0 {
        return 0.0;
    }
    fm::sqrt(radicand) / (2.0 * core::f64::consts::PI * x * p.sigma2())
}

/// Distribution function `F(x) = atom·1{x >= 0} + ∫_{u_-}^{min(x, u_+)} density`.
///
/// The partial integral uses the same `x = u_- + span sin^2 θ` substitution as
/// the expectation quadrature, so the square-root edges stay benign.
pub fn mp_cdf(x: f64, p: &MpParams) -> Result<f64> {
    if x < 0.0 {
        return Ok(0.0);
    }
    let lo = p.edge_lower();
    let hi = p.edge_upper();
    let atom = p.atom_weight();
    if x <= lo {
        return Ok(atom.min(1.0));
    }
    if x >= hi {
        return Ok(1.0);
    }
    let span = hi - lo;
    let theta_max = fm::asin(fm::sqrt(((x - lo) / span).clamp(0.0, 1.0)));
    let partial = integrate_continuous_theta(p, theta_max, |_| 1.0)?;
    Ok((atom + partial).clamp(0.0, 1.0))
}

//! Expectations against the law and the CLT variance functionals.
//!
//! The continuous part is integrated after the substitution
//! `x = u_- + (u_+ - u_-) sin^2 θ`, `θ ∈ [0, π/2]`, which absorbs the
//! square-root edge vanishing (and the `x^{-1/2}` blow-up at the hard edge
//! when `c = 1`) into a smooth integrand; naive quadrature on `[u_-, u_+]`
//! loses several digits at the edges.

use crate::params::MpParams;
use crate::quad::{adaptive_gk15, QuadValue};
use crate::testfn::TestFunction;
use crate::{fm, Result};

/// Absolute tolerance requested from the quadrature.
pub(crate) const QUAD_TOL: f64 = 1e-11;
/// Mass-relative tolerance floor; protects convergence for integrands whose
/// magnitude pushes the absolute target below roundoff.
pub(crate) const QUAD_REL_MASS_TOL: f64 = 1e-12;
/// Evaluation budget per integral.
pub(crate) const QUAD_BUDGET: usize = 1 << 15;

/// Integrate `f` against the continuous part of the law over
/// `θ ∈ [0, theta_max]` in substituted coordinates (`θ_max = π/2` covers the
/// whole band).
pub(crate) fn integrate_continuous_theta<V: QuadValue>(
    p: &MpParams,
    theta_max: f64,
    f: impl Fn(f64) -> V,
) -> Result<V> {
    let lo = p.edge_lower();
    let span = p.edge_upper() - lo;
    let scale = span * span / (4.0 * core::f64::consts::PI * p.sigma2());
    let integrand = |theta: f64| -> V {
        let s = fm::sin(theta);
        let x = lo + span * s * s;
        if x <= 0.0 {
            // Only reachable at θ = 0 when c = 1; the weight vanishes there.
            return V::zero();
        }
        let s2 = fm::sin(2.0 * theta);
        f(x).scale(scale * s2 * s2 / x)
    };
    let r = adaptive_gk15(
        integrand,
        0.0,
        theta_max,
        QUAD_TOL,
        QUAD_REL_MASS_TOL,
        QUAD_BUDGET,
    )?;
    Ok(r.value)
}

/// Expectation of an arbitrary scalar- or complex-valued function under the
/// full law, atom included: `atom · f(0) + ∫ f dμ_cont`.
pub fn mp_integrate<V: QuadValue>(p: &MpParams, f: impl Fn(f64) -> V) -> Result<V> {
    let band = integrate_continuous_theta(p, core::f64::consts::FRAC_PI_2, &f)?;
    let atom = p.atom_weight();
    if atom > 0.0 {
        Ok(band.add(f(0.0).scale(atom)))
    } else {
        Ok(band)
    }
}

/// `∫ f dμ` for a test function (atom included).
pub fn mp_expect(f: &TestFunction, p: &MpParams) -> Result<f64> {
    f.validate(p)?;
    mp_integrate(p, |x| f.eval(x))
}

/// Variance of `f` under the law: `E f^2 - (E f)^2`, clamped at zero against
/// roundoff. This is the universal off-diagonal limiting variance.
pub fn omega2(f: &TestFunction, p: &MpParams) -> Result<f64> {
    f.validate(p)?;
    let mean = mp_integrate(p, |x| f.eval(x))?;
    let second = mp_integrate(p, |x| {
        let v = f.eval(x);
        v * v
    })?;
    Ok((second - mean * mean).max(0.0))
}

/// Inner product of `f` with the first nontrivial orthonormal polynomial
/// `(x - c sigma2) / (sqrt(c) sigma2)`; carries the fourth-cumulant
/// contribution on the diagonal.
pub fn rho(f: &TestFunction, p: &MpParams) -> Result<f64> {
    f.validate(p)?;
    let mean = p.mean();
    let norm = fm::sqrt(p.c()) * p.sigma2();
    mp_integrate(p, |x| f.eval(x) * (x - mean) / norm)
}

/// Evaluate the first nontrivial orthonormal polynomial of the law at `x`.
pub fn orthonormal_p1(x: f64, p: &MpParams) -> f64 {
    (x - p.mean()) / (fm::sqrt(p.c()) * p.sigma2())
}

//! Test functions applied to matrix arguments.
//!
//! The menu is fixed and closed; every family is C^∞ on a neighborhood of
//! `[0, u_+]` by construction, which settles the regularity demanded of test
//! functions structurally rather than numerically. Each family knows its own
//! derivative tower (needed by the quasi-analytic extension).

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::jet::{smooth_step_jet, Jet};
use crate::params::MpParams;
use crate::{CoreError, Result};

/// Descriptor of a scalar test function `f: R -> R`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case"))]
pub enum TestFunction {
    /// `f(x) = value`.
    Constant { value: f64 },
    /// `f(x) = Σ coeffs[k] x^k` (ascending powers).
    Polynomial { coeffs: Vec<f64> },
    /// `f(x) = Re 1/(pole - x)`; the pole must stay away from `[0, u_+]`.
    CauchyRe { pole_re: f64, pole_im: f64 },
    /// `f(x) = Im 1/(pole - x)`.
    CauchyIm { pole_re: f64, pole_im: f64 },
    /// `f(x) = exp(-(x - center)^2 / (2 width^2))`.
    GaussianBump { center: f64, width: f64 },
    /// Smoothed indicator of `[lo, hi]`: 1 on the plateau, 0 outside
    /// `[lo - ramp, hi + ramp]`, C^∞ ramps in between.
    IndicatorSmoothed { lo: f64, hi: f64, ramp: f64 },
}

impl TestFunction {
    pub fn constant(value: f64) -> Self {
        TestFunction::Constant { value }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(CoreError::InvalidTestFunction(
                "polynomial needs at least one coefficient",
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::InvalidTestFunction(
                "polynomial coefficients must be finite",
            ));
        }
        Ok(TestFunction::Polynomial { coeffs })
    }

    pub fn identity() -> Self {
        TestFunction::Polynomial {
            coeffs: vec![0.0, 1.0],
        }
    }

    pub fn cauchy_re(pole: Complex64) -> Self {
        TestFunction::CauchyRe {
            pole_re: pole.re,
            pole_im: pole.im,
        }
    }

    pub fn cauchy_im(pole: Complex64) -> Self {
        TestFunction::CauchyIm {
            pole_re: pole.re,
            pole_im: pole.im,
        }
    }

    pub fn gaussian_bump(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(CoreError::InvalidTestFunction("bump width must be positive"));
        }
        Ok(TestFunction::GaussianBump { center, width })
    }

    pub fn indicator_smoothed(lo: f64, hi: f64, ramp: f64) -> Result<Self> {
        if !(ramp > 0.0) || !(hi > lo) {
            return Err(CoreError::InvalidTestFunction(
                "smoothed indicator needs hi > lo and ramp > 0",
            ));
        }
        Ok(TestFunction::IndicatorSmoothed { lo, hi, ramp })
    }

    /// Check the family-specific invariants against a concrete law.
    pub fn validate(&self, p: &MpParams) -> Result<()> {
        match self {
            TestFunction::Constant { value } => {
                if !value.is_finite() {
                    return Err(CoreError::InvalidTestFunction("constant must be finite"));
                }
            }
            TestFunction::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(CoreError::InvalidTestFunction("bad polynomial coefficients"));
                }
            }
            TestFunction::CauchyRe { pole_re, pole_im }
            | TestFunction::CauchyIm { pole_re, pole_im } => {
                let dist = if *pole_im != 0.0 {
                    pole_im.abs()
                } else {
                    p.support_distance(*pole_re)
                        .min(band_distance(*pole_re, p))
                };
                if !(dist > 0.0) {
                    return Err(CoreError::InvalidTestFunction(
                        "cauchy pole touches [0, u_plus]",
                    ));
                }
            }
            TestFunction::GaussianBump { center, width } => {
                if !center.is_finite() || !(*width > 0.0) {
                    return Err(CoreError::InvalidTestFunction("bad bump parameters"));
                }
            }
            TestFunction::IndicatorSmoothed { lo, hi, ramp } => {
                if !(*ramp > 0.0) || !(hi > lo) {
                    return Err(CoreError::InvalidTestFunction("bad indicator parameters"));
                }
            }
        }
        Ok(())
    }

    /// Pointwise evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * x + c;
                }
                acc
            }
            TestFunction::CauchyRe { pole_re, pole_im } => {
                (Complex64::new(pole_re - x, *pole_im)).finv().re
            }
            TestFunction::CauchyIm { pole_re, pole_im } => {
                (Complex64::new(pole_re - x, *pole_im)).finv().im
            }
            TestFunction::GaussianBump { center, width } => {
                let t = (x - center) / width;
                crate::fm::exp(-0.5 * t * t)
            }
            TestFunction::IndicatorSmoothed { lo, hi, ramp } => {
                let rise = crate::jet::smooth_step((x - (lo - ramp)) / ramp);
                let fall = crate::jet::smooth_step(((hi + ramp) - x) / ramp);
                rise * fall
            }
        }
    }

    /// Derivative tower `[f(x), f'(x), ..., f^{(order)}(x)]`.
    pub fn derivatives(&self, x: f64, order: usize) -> Vec<f64> {
        assert!(order <= crate::jet::MAX_ORDER, "derivative order too large");
        match self {
            TestFunction::Constant { value } => {
                let mut out = vec![0.0; order + 1];
                out[0] = *value;
                out
            }
            TestFunction::Polynomial { coeffs } => {
                // Differentiate the coefficient list repeatedly; exact.
                let mut out = Vec::with_capacity(order + 1);
                let mut cur = coeffs.clone();
                for _ in 0..=order {
                    let mut acc = 0.0;
                    for &c in cur.iter().rev() {
                        acc = acc * x + c;
                    }
                    out.push(acc);
                    cur = cur
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(k, &c)| k as f64 * c)
                        .collect();
                }
                out
            }
            TestFunction::CauchyRe { pole_re, pole_im }
            | TestFunction::CauchyIm { pole_re, pole_im } => {
                // d^n/dx^n 1/(z0 - x) = n! / (z0 - x)^{n+1}
                let z0 = Complex64::new(*pole_re, *pole_im);
                let take_re = matches!(self, TestFunction::CauchyRe { .. });
                let base = (z0 - x).finv();
                let mut power = base;
                let mut factorial = 1.0;
                let mut out = Vec::with_capacity(order + 1);
                for n in 0..=order {
                    if n > 0 {
                        factorial *= n as f64;
                        power *= base;
                    }
                    let v = power * factorial;
                    out.push(if take_re { v.re } else { v.im });
                }
                out
            }
            TestFunction::GaussianBump { center, width } => {
                let t = Jet::variable(x, order)
                    .sub(&Jet::constant(*center, order))
                    .scale(1.0 / width);
                let jet = t.mul(&t).scale(-0.5).exp();
                (0..=order).map(|k| jet.derivative(k)).collect()
            }
            TestFunction::IndicatorSmoothed { lo, hi, ramp } => {
                let xj = Jet::variable(x, order);
                let rise = smooth_step_jet(
                    &xj.sub(&Jet::constant(lo - ramp, order)).scale(1.0 / ramp),
                );
                let fall = smooth_step_jet(
                    &Jet::constant(hi + ramp, order).sub(&xj).scale(1.0 / ramp),
                );
                let jet = rise.mul(&fall);
                (0..=order).map(|k| jet.derivative(k)).collect()
            }
        }
    }

    /// Whether the family decays fast enough for the planar resolvent
    /// integral (the quasi-analytic route only accepts these).
    pub fn is_bump_like(&self) -> bool {
        matches!(
            self,
            TestFunction::GaussianBump { .. } | TestFunction::IndicatorSmoothed { .. }
        )
    }

    /// Interval outside which the function (and its first dozen derivatives)
    /// is numerically negligible; `None` for families without useful decay.
    pub fn support_hint(&self) -> Option<(f64, f64)> {
        match self {
            TestFunction::GaussianBump { center, width } => {
                // exp(-0.5 t^2) with |t| = 12 is ~1e-32; derivative
                // prefactors do not claw that back.
                Some((center - 12.0 * width, center + 12.0 * width))
            }
            TestFunction::IndicatorSmoothed { lo, hi, ramp } => Some((lo - ramp, hi + ramp)),
            _ => None,
        }
    }
}

/// Distance from a real point to the bare interval `[0, u_plus]` (for pole
/// placement the atom-free gap inside the interval does not count as safe).
fn band_distance(x: f64, p: &MpParams) -> f64 {
    let hi = p.edge_upper();
    if x < 0.0 {
        -x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

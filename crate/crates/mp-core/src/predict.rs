//! Closed-form limiting variances and covariance blocks.
//!
//! Entry-CLT side: off-diagonal entries of `f(M)` fluctuate with variance
//! `omega2(f)`; diagonal entries add a fourth-cumulant term through `rho(f)`.
//! Resolvent-field side: the limiting field is `sqrt(c) g^2(z) Y(z)` whose
//! `Y`-covariances are stated at scaled arguments — the displayed covariance
//! of `Y(cz), Y(cw)` uses kernels at `(z, w)` — so evaluating the block at
//! points `(z, w)` substitutes `z/c, w/c` into the kernels. For real
//! ensembles the assembled block is cross-checked against the independent
//! closed form through the covariance of `1/(z - η)` under the ambient law.

use num_complex::Complex64;

use crate::fm;
use crate::kernels::phi_parts;
use crate::moments::{omega2, rho};
use crate::params::MpParams;
use crate::stieltjes::{stieltjes_g, stieltjes_g_prime};
use crate::testfn::TestFunction;
use crate::{CoreError, Result};

/// Tolerance for the assembly-vs-identity cross-check.
const BLOCK_XCHECK_TOL: f64 = 1e-8;

/// Entry field of the underlying rectangular matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EntryField {
    Real,
    Complex,
}

/// Limiting Gaussian prediction for one normalized entry of `f(M)`.
///
/// `variance` is assembled as `omega2_term + kappa4_term` exactly (no
/// clamping), so the decomposition identity holds bit-for-bit; in the
/// degenerate Bernoulli-linear case it may sit a quadrature-epsilon below
/// zero.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prediction {
    /// Total limiting variance of the (complex) entry fluctuation.
    pub variance: f64,
    /// The functional `omega^2(f)`.
    pub omega2: f64,
    /// The functional `rho(f)`.
    pub rho: f64,
    /// Contribution `coefficient * omega^2(f)` (coefficient 1 or 2).
    pub omega2_term: f64,
    /// Contribution `(kappa4 / sigma^4) rho^2(f)` (zero off the diagonal).
    pub kappa4_term: f64,
    /// Variance of the real coordinate.
    pub re_variance: f64,
    /// Variance of the imaginary coordinate (nonzero only for complex
    /// off-diagonal entries, where Re and Im are i.i.d. with half the total).
    pub im_variance: f64,
    /// Limiting cross-covariance of the two coordinates (always zero).
    pub cross_covariance: f64,
}

/// Limiting variance of `sqrt(N) (f(M)_ij - E f(M)_ij)`.
///
/// `kappa4` follows the field convention: `m4 - 3 sigma^4` for real entries,
/// `m4 - 2 sigma^4` for complex ones.
pub fn predict_entry_clt(
    f: &TestFunction,
    p: &MpParams,
    field: EntryField,
    kappa4: f64,
    diagonal: bool,
) -> Result<Prediction> {
    let w2 = omega2(f, p)?;
    let r = rho(f, p)?;
    let s4 = p.sigma2() * p.sigma2();

    let (omega2_coeff, kappa4_term) = if diagonal {
        let coeff = match field {
            EntryField::Real => 2.0,
            EntryField::Complex => 1.0,
        };
        (coeff, kappa4 / s4 * r * r)
    } else {
        (1.0, 0.0)
    };
    let omega2_term = omega2_coeff * w2;
    let variance = omega2_term + kappa4_term;

    let (re_variance, im_variance) = if !diagonal && field == EntryField::Complex {
        (0.5 * variance, 0.5 * variance)
    } else {
        (variance, 0.0)
    };

    Ok(Prediction {
        variance,
        omega2: w2,
        rho: r,
        omega2_term,
        kappa4_term,
        re_variance,
        im_variance,
        cross_covariance: 0.0,
    })
}

/// 2x2 covariance block over `(Re, Im)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovBlock2(pub [[f64; 2]; 2]);

impl CovBlock2 {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for r in &self.0 {
            for &v in r {
                m = m.max(fm::abs(v));
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &CovBlock2) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                m = m.max(fm::abs(self.0[r][c] - other.0[r][c]));
            }
        }
        m
    }

    /// `R_a · self · R_b^T` where `R_u` is the real 2x2 representation of
    /// multiplication by the complex number `u`.
    fn conjugate_by(&self, a: Complex64, b: Complex64) -> CovBlock2 {
        let ra = [[a.re, -a.im], [a.im, a.re]];
        let rb = [[b.re, -b.im], [b.im, b.re]];
        let mut tmp = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    tmp[i][j] += ra[i][k] * self.0[k][j];
                }
            }
        }
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    out[i][j] += tmp[i][k] * rb[j][k];
                }
            }
        }
        CovBlock2(out)
    }

    /// Block built from a bilinear moment `b = E[a1 a2]` and a sesquilinear
    /// one `s = E[a1 conj(a2)]` of two zero-mean complex variables.
    fn from_bilinear_pair(b: Complex64, s: Complex64) -> CovBlock2 {
        CovBlock2([
            [0.5 * (b.re + s.re), 0.5 * (b.im - s.im)],
            [0.5 * (b.im + s.im), 0.5 * (s.re - b.re)],
        ])
    }
}

fn check_field_domain(z: Complex64, p: &MpParams) -> Result<()> {
    if z.im == 0.0 && z.re >= 0.0 && z.re <= p.edge_upper() {
        return Err(CoreError::InsideSupport {
            re: z.re,
            u_plus: p.edge_upper(),
        });
    }
    Ok(())
}

/// Covariance of `1/(z - η)` and `1/(w - η)` under the ambient law, as a
/// bilinear complex moment (no conjugation):
/// `(g(z) - g(w))/(w - z) - g(z) g(w)`, with the confluent limit
/// `-g'(z) - g(z)^2` at `z = w`.
fn resolvent_function_cov(z: Complex64, w: Complex64, p: &MpParams) -> Result<Complex64> {
    let gz = stieltjes_g(z, p)?;
    if (z - w).norm() < 1e-12 * (1.0 + z.norm()) {
        let gp = stieltjes_g_prime(z, p)?;
        return Ok(-gp - gz * gz);
    }
    let gw = stieltjes_g(w, p)?;
    Ok((gz - gw) / (w - z) - gz * gw)
}

/// `rho` applied to the complex resolvent function `x ↦ 1/(z - x)`:
/// `((z - c sigma2) g(z) - 1) / (sqrt(c) sigma2)`.
fn rho_resolvent(z: Complex64, p: &MpParams) -> Result<Complex64> {
    let g = stieltjes_g(z, p)?;
    Ok(((z - p.mean()) * g - 1.0) / (fm::sqrt(p.c()) * p.sigma2()))
}

/// Independent route to the real-ensemble covariance block of the limiting
/// resolvent field at `(z, w)`: bilinear covariance
/// `coef·Cov(1/(z-η), 1/(w-η)) + (kappa4/sigma^4)·rho_z·rho_w` with
/// `coef = 2` on the diagonal and `1` off it, expanded over `(Re, Im)`.
pub fn resolvent_cov_via_mp(
    z: Complex64,
    w: Complex64,
    p: &MpParams,
    kappa4: f64,
    diagonal: bool,
) -> Result<CovBlock2> {
    check_field_domain(z, p)?;
    check_field_domain(w, p)?;
    let s4 = p.sigma2() * p.sigma2();
    let moment = |zz: Complex64, ww: Complex64| -> Result<Complex64> {
        let base = resolvent_function_cov(zz, ww, p)?;
        if diagonal {
            let k = rho_resolvent(zz, p)? * rho_resolvent(ww, p)? * (kappa4 / s4);
            Ok(base * 2.0 + k)
        } else {
            Ok(base)
        }
    };
    let b = moment(z, w)?;
    let s = moment(z, w.conj())?;
    Ok(CovBlock2::from_bilinear_pair(b, s))
}

/// Covariance block of the limiting resolvent field
/// `Ψ(z) = sqrt(c) g^2(z) Y(z)` between `(Re Ψ_ij(z), Im Ψ_ij(z))` and
/// `(Re Ψ_ij(w), Im Ψ_ij(w))`, assembled from the stated `Y`-covariances.
///
/// For real ensembles the result is verified against
/// [`resolvent_cov_via_mp`] and a [`CoreError::RouteMismatch`] is returned if
/// the two disagree beyond `1e-8`.
pub fn predict_resolvent_field_cov(
    z: Complex64,
    w: Complex64,
    p: &MpParams,
    field: EntryField,
    kappa4: f64,
    diagonal: bool,
) -> Result<CovBlock2> {
    check_field_domain(z, p)?;
    check_field_domain(w, p)?;

    let c = p.c();
    let s4 = p.sigma2() * p.sigma2();
    let q = p.ratio_inverted();
    let zc = z / c;
    let wc = w / c;

    let parts = phi_parts(zc, wc, p)?;
    let t_z = zc * stieltjes_g(zc, &q)?;
    let t_w = wc * stieltjes_g(wc, &q)?;

    let y_block = match (diagonal, field) {
        (true, _) => {
            let coef = match field {
                EntryField::Real => 2.0,
                EntryField::Complex => 1.0,
            };
            CovBlock2([
                [
                    kappa4 * t_z.re * t_w.re + coef * s4 * parts.pp,
                    kappa4 * t_z.re * t_w.im + coef * s4 * parts.pm,
                ],
                [
                    kappa4 * t_z.im * t_w.re + coef * s4 * parts.mp,
                    kappa4 * t_z.im * t_w.im + coef * s4 * parts.mm,
                ],
            ])
        }
        (false, EntryField::Real) => CovBlock2([
            [s4 * parts.pp, s4 * parts.pm],
            [s4 * parts.mp, s4 * parts.mm],
        ]),
        (false, EntryField::Complex) => {
            let diag = 0.5 * s4 * (parts.pp + parts.mm);
            let cross = 0.5 * s4 * (parts.pm - parts.mp);
            CovBlock2([[diag, cross], [-cross, diag]])
        }
    };

    let sqrt_c = fm::sqrt(c);
    let gz2 = stieltjes_g(z, p)?.powi(2) * sqrt_c;
    let gw2 = stieltjes_g(w, p)?.powi(2) * sqrt_c;
    let block = y_block.conjugate_by(gz2, gw2);

    if field == EntryField::Real {
        let check = resolvent_cov_via_mp(z, w, p, kappa4, diagonal)?;
        let difference = block.max_abs_diff(&check);
        if difference > BLOCK_XCHECK_TOL {
            return Err(CoreError::RouteMismatch {
                difference,
                tolerance: BLOCK_XCHECK_TOL,
            });
        }
    }
    Ok(block)
}

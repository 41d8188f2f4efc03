//! The `phi` kernels of the resolvent-field covariances.
//!
//! `phi(z, w) = E[ z/(z - η) · w/(w - η) ]` with `η` drawn from the law with
//! inverted ratio index `(sigma2, 1/c)`. Two independent routes are kept:
//! direct quadrature against the inverted-ratio law, and the reduction to the
//! ambient law (ratio `c`) through
//! `phi(z, w) = (1/c) E[ cz/(cz - η_c) · cw/(cw - η_c) ] + (1 - 1/c)`.
//! Every public evaluation cross-checks the two and refuses to guess when
//! they disagree.

use num_complex::Complex64;

use crate::moments::mp_integrate;
use crate::params::MpParams;
use crate::stieltjes::stieltjes_g;
use crate::{CoreError, Result};

/// Tolerance for the route-(a)/route-(b) agreement check.
const ROUTE_TOL: f64 = 1e-9;

/// Real bilinear pieces of the kernel at an ordered argument pair `(z, w)`:
/// expectations of products of real and imaginary parts of the two factors.
#[derive(Debug, Clone, Copy)]
pub struct PhiParts {
    /// `E[Re a(z) Re a(w)]`
    pub pp: f64,
    /// `E[Im a(z) Im a(w)]`
    pub mm: f64,
    /// `E[Re a(z) Im a(w)]`
    pub pm: f64,
    /// `E[Im a(z) Re a(w)]` (equals `pm` with the arguments swapped)
    pub mp: f64,
}

fn check_kernel_domain(z: Complex64, q: &MpParams) -> Result<()> {
    if z.im == 0.0 && z.re >= 0.0 && z.re <= q.edge_upper() {
        return Err(CoreError::InsideSupport {
            re: z.re,
            u_plus: q.edge_upper(),
        });
    }
    if z.norm() == 0.0 {
        return Err(CoreError::InvalidParameter("kernel argument must be nonzero"));
    }
    Ok(())
}

/// Plain bilinear expectation `E[ z/(z-η) · w/(w-η) ]` against the law `q`
/// (no conjugations); quadrature route.
fn phi_raw(z: Complex64, w: Complex64, q: &MpParams) -> Result<Complex64> {
    mp_integrate(q, |x| (z / (z - x)) * (w / (w - x)))
}

/// Reduction route through the ambient law `p` (ratio index `c`).
fn phi_via_ambient(z: Complex64, w: Complex64, p: &MpParams) -> Result<Complex64> {
    let c = p.c();
    let e = mp_integrate(p, |x| {
        let cz = c * z;
        let cw = c * w;
        (cz / (cz - x)) * (cw / (cw - x))
    })?;
    Ok(e / c + (1.0 - 1.0 / c))
}

/// Kernel value with both routes evaluated and cross-checked.
///
/// `p` is the ambient law `(sigma2, c)`; the kernel itself integrates against
/// the inverted-ratio law. Arguments must stay off `[0, u_+] / c ∪ {0}`.
pub fn phi_kernel(z: Complex64, w: Complex64, p: &MpParams) -> Result<Complex64> {
    let q = p.ratio_inverted();
    check_kernel_domain(z, &q)?;
    check_kernel_domain(w, &q)?;
    let direct = phi_raw(z, w, &q)?;
    let reduced = phi_via_ambient(z, w, p)?;
    let difference = (direct - reduced).norm();
    if difference > ROUTE_TOL * (1.0 + direct.norm()) {
        return Err(CoreError::RouteMismatch {
            difference,
            tolerance: ROUTE_TOL,
        });
    }
    Ok(direct)
}

/// The four real bilinear kernel variants at `(z, w)`.
///
/// Recovered from two complex quadratures: with `B = E[a(z) a(w)]` and
/// `S = E[a(z) a(w̄)] = E[a(z) conj(a(w))]`,
/// `pp = Re(B+S)/2`, `mm = Re(S-B)/2`, `pm = (Im B - Im S)/2`,
/// `mp = (Im B + Im S)/2`.
pub fn phi_parts(z: Complex64, w: Complex64, p: &MpParams) -> Result<PhiParts> {
    let q = p.ratio_inverted();
    check_kernel_domain(z, &q)?;
    check_kernel_domain(w, &q)?;
    let b = phi_raw(z, w, &q)?;
    let s = phi_raw(z, w.conj(), &q)?;
    Ok(PhiParts {
        pp: 0.5 * (b.re + s.re),
        mm: 0.5 * (s.re - b.re),
        pm: 0.5 * (b.im - s.im),
        mp: 0.5 * (b.im + s.im),
    })
}

/// Residual of the ratio-inversion identity for the Stieltjes transform:
/// `g_{σ,1/c}(z) - g_{σ,c}(cz) - (1 - 1/c)/z`.
pub fn relation_g_residual(z: Complex64, p: &MpParams) -> Result<f64> {
    let q = p.ratio_inverted();
    let lhs = stieltjes_g(z, &q)?;
    let rhs = stieltjes_g(z * p.c(), p)? + (1.0 - 1.0 / p.c()) / z;
    Ok((lhs - rhs).norm())
}

/// Residual between the two kernel evaluation routes.
pub fn relation_phi_residual(z: Complex64, w: Complex64, p: &MpParams) -> Result<f64> {
    let q = p.ratio_inverted();
    check_kernel_domain(z, &q)?;
    check_kernel_domain(w, &q)?;
    let direct = phi_raw(z, w, &q)?;
    let reduced = phi_via_ambient(z, w, p)?;
    Ok((direct - reduced).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn both_factors_tend_to_one_far_away() {
        let p = MpParams::new(1.0, 1.0).unwrap();
        let z = Complex64::new(0.0, 1e6);
        let v = phi_kernel(z, z, &p).unwrap();
        assert!((v - 1.0).norm() < 1e-5);
    }

    #[test]
    fn routes_agree_at_spec_point() {
        let p = MpParams::new(1.0, 2.0).unwrap();
        let z = Complex64::new(0.0, 2.0);
        let w = Complex64::new(1.0, 1.0);
        let residual = relation_phi_residual(z, w, &p).unwrap();
        assert!(residual < 1e-9, "route residual {residual}");
    }

    #[test]
    fn g_relation_holds_at_spec_point() {
        let p = MpParams::new(1.0, 2.0).unwrap();
        let z = Complex64::new(3.0, 1.0);
        assert!(relation_g_residual(z, &p).unwrap() < 1e-12);
    }

    #[test]
    fn parts_match_direct_real_quadratures() {
        // Independent route: integrate the Re/Im products directly.
        let p = MpParams::new(1.0, 2.0).unwrap();
        let q = p.ratio_inverted();
        let z = Complex64::new(0.5, 1.5);
        let w = Complex64::new(-1.0, 0.7);
        let parts = phi_parts(z, w, &p).unwrap();
        let factor = |u: Complex64, x: f64| u / (u - x);
        let pp = mp_integrate(&q, |x| factor(z, x).re * factor(w, x).re).unwrap();
        let mm = mp_integrate(&q, |x| factor(z, x).im * factor(w, x).im).unwrap();
        let pm = mp_integrate(&q, |x| factor(z, x).re * factor(w, x).im).unwrap();
        let mp_ = mp_integrate(&q, |x| factor(z, x).im * factor(w, x).re).unwrap();
        assert_abs_diff_eq!(parts.pp, pp, epsilon = 1e-10);
        assert_abs_diff_eq!(parts.mm, mm, epsilon = 1e-10);
        assert_abs_diff_eq!(parts.pm, pm, epsilon = 1e-10);
        assert_abs_diff_eq!(parts.mp, mp_, epsilon = 1e-10);
    }

    #[test]
    fn rejects_arguments_on_the_inverted_support() {
        let p = MpParams::new(1.0, 2.0).unwrap();
        // Inverted law has ratio 1/2, upper edge (1 + 1/sqrt2)^2 ≈ 2.91.
        assert!(phi_kernel(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            &p
        )
        .is_err());
    }
}

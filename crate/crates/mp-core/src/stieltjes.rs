//! Stieltjes transform of the law and its derivative.
//!
//! `g(z)` is pinned down as the root of the quadratic
//! `z sigma2 g^2 + (sigma2 (c-1) - z) g + 1 = 0` that decays like `1/z` at
//! infinity. Off the real axis the correct root is the one with
//! `sign(Im g) = -sign(Im z)`; on the real axis outside `[0, u_+]` both roots
//! are real, and the decaying branch is the one with `g·z` closer to 1 (the
//! wrong root satisfies `g1 g2 = 1/(sigma2 z)`, so its `g·z` drifts to
//! `z/sigma2` instead).

use num_complex::Complex64;

use crate::params::MpParams;
use crate::{CoreError, Result};

fn quadratic_roots(z: Complex64, p: &MpParams) -> (Complex64, Complex64) {
    let s2 = p.sigma2();
    let a = s2 * z;
    let b = Complex64::new(s2 * (p.c() - 1.0), 0.0) - z;
    // (b^2 - 4a) factors as (z - u_+)(z - u_-); numerically stable split via
    // the larger-magnitude root first.
    let disc = ((z - p.edge_upper()) * (z - p.edge_lower())).sqrt();
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    (q / a, Complex64::new(1.0, 0.0) / q)
}

/// Evaluate `g(z)` for `z` outside `[0, u_+]`.
pub fn stieltjes_g(z: Complex64, p: &MpParams) -> Result<Complex64> {
    let hi = p.edge_upper();
    if z.im == 0.0 && z.re >= 0.0 && z.re <= hi {
        return Err(CoreError::InsideSupport {
            re: z.re,
            u_plus: hi,
        });
    }
    let (r1, r2) = quadratic_roots(z, p);
    let pick = if z.im != 0.0 {
        // Exactly one root has imaginary part opposite to Im z.
        let want_negative = z.im > 0.0;
        let ok1 = (r1.im < 0.0) == want_negative;
        let ok2 = (r2.im < 0.0) == want_negative;
        match (ok1, ok2) {
            (true, false) => r1,
            (false, true) => r2,
            // Degenerate imaginary parts at roundoff level: fall back to the
            // decay criterion below.
            _ => pick_by_decay(z, r1, r2),
        }
    } else {
        pick_by_decay(z, r1, r2)
    };
    Ok(pick)
}

fn pick_by_decay(z: Complex64, r1: Complex64, r2: Complex64) -> Complex64 {
    if ((r1 * z) - 1.0).norm() <= ((r2 * z) - 1.0).norm() {
        r1
    } else {
        r2
    }
}

/// `g'(z)`, from implicit differentiation of the defining quadratic.
pub fn stieltjes_g_prime(z: Complex64, p: &MpParams) -> Result<Complex64> {
    let g = stieltjes_g(z, p)?;
    let s2 = p.sigma2();
    let denom = 2.0 * s2 * z * g + Complex64::new(s2 * (p.c() - 1.0), 0.0) - z;
    Ok((g - s2 * g * g) / denom)
}

/// Residual of the defining quadratic at `(z, g)`; diagnostic used by tests.
pub fn quadratic_residual(z: Complex64, g: Complex64, p: &MpParams) -> f64 {
    let s2 = p.sigma2();
    (z * s2 * g * g + (Complex64::new(s2 * (p.c() - 1.0), 0.0) - z) * g + 1.0).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_ratio_value_at_minus_one() {
        let p = MpParams::new(1.0, 1.0).unwrap();
        let g = stieltjes_g(Complex64::new(-1.0, 0.0), &p).unwrap();
        assert_abs_diff_eq!(g.re, (1.0 - 5.0f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_eq!(g.im, 0.0);
    }

    #[test]
    fn decays_like_inverse_z() {
        for &(s2, c) in &[(1.0, 1.0), (2.0, 0.5), (1.0, 3.0)] {
            let p = MpParams::new(s2, c).unwrap();
            for &z in &[
                Complex64::new(1e6, 0.0),
                Complex64::new(-1e6, 0.0),
                Complex64::new(0.0, 1e6),
                Complex64::new(7e5, 7e5),
            ] {
                let g = stieltjes_g(z, &p).unwrap();
                let rel = (g - z.finv()).norm() * z.norm();
                assert!(rel < 1e-4, "g far from 1/z at |z|=1e6: rel={rel}");
            }
        }
    }

    #[test]
    fn residual_and_bound_on_a_grid() {
        let p = MpParams::new(1.0, 1.0).unwrap();
        for i in 0..10 {
            for j in 1..11 {
                let z = Complex64::new(-2.0 + i as f64, 0.05 * j as f64);
                let g = stieltjes_g(z, &p).unwrap();
                assert!(quadratic_residual(z, g, &p) < 1e-12);
                assert!(g.norm() <= 1.0 / z.im.abs() + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_points_inside_support() {
        let p = MpParams::new(1.0, 0.5).unwrap();
        // The gap between the atom and the band still counts as inside.
        assert!(stieltjes_g(Complex64::new(0.05, 0.0), &p).is_err());
        assert!(stieltjes_g(Complex64::new(0.0, 0.0), &p).is_err());
        assert!(stieltjes_g(Complex64::new(-0.05, 0.0), &p).is_ok());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = MpParams::new(1.3, 2.0).unwrap();
        let z = Complex64::new(1.0, 1.5);
        let h = 1e-6;
        let fd = (stieltjes_g(z + h, &p).unwrap() - stieltjes_g(z - h, &p).unwrap()) / (2.0 * h);
        let gp = stieltjes_g_prime(z, &p).unwrap();
        assert!((fd - gp).norm() < 1e-8);
    }

    #[test]
    fn conjugate_symmetry() {
        let p = MpParams::new(1.0, 2.0).unwrap();
        let z = Complex64::new(2.0, 0.7);
        let g = stieltjes_g(z, &p).unwrap();
        let gc = stieltjes_g(z.conj(), &p).unwrap();
        assert_abs_diff_eq!(g.re, gc.re, epsilon = 1e-14);
        assert_abs_diff_eq!(g.im, -gc.im, epsilon = 1e-14);
    }
}

//! Oracle-driven checks of the analytic layer.
//!
//! The reference quadrature here parameterizes the band as
//! `x(θ) = sigma2 (1 + c + 2 sqrt(c) cos θ)`, under which the density weight
//! becomes `(2 sigma2 c / π) sin^2 θ / x(θ)` — smooth on `[0, π]` even at the
//! hard edge `c = 1` — and applies a plain midpoint rule, which converges
//! spectrally there. No library quadrature machinery is involved, and the
//! frozen golden numbers below were independently confirmed against closed
//! forms.

use approx::assert_abs_diff_eq;
use mp_core::{
    mp_cdf, mp_density, mp_expect, mp_integrate, omega2, orthonormal_p1, phi_kernel,
    predict_entry_clt, relation_g_residual, relation_phi_residual, rho, stieltjes_g, Complex64,
    EntryField, MpParams, TestFunction,
};

/// Midpoint-rule oracle for `∫ f dμ` with `n` nodes on the band plus the atom.
fn mp_oracle(p: &MpParams, n: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let s2 = p.sigma2();
    let c = p.c();
    let sc = c.sqrt();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let theta = core::f64::consts::PI * (k as f64 + 0.5) / n as f64;
        let x = s2 * (1.0 + c + 2.0 * sc * theta.cos());
        acc += f(x) * (theta.sin().powi(2) / x);
    }
    acc *= 2.0 * s2 * c / n as f64;
    acc + f(0.0) * p.atom_weight()
}

fn mp_oracle_real(p: &MpParams, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    mp_oracle(p, n, |x| Complex64::new(f(x), 0.0)).re
}

#[test]
fn oracle_agrees_with_itself_across_refinement() {
    // Two refinement levels of the oracle agree to 1e-12 before it is used
    // to judge anything else; includes the hard-edge case c = 1.
    for &(s2, c) in &[(1.0, 1.0), (1.0, 2.0), (2.0, 0.5)] {
        let p = MpParams::new(s2, c).unwrap();
        let f = |x: f64| 1.0 / (p.edge_upper() + 1.0 - x);
        let a = mp_oracle_real(&p, 1000, f);
        let b = mp_oracle_real(&p, 4000, f);
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn expectations_match_oracle_for_all_families() {
    let params = [
        MpParams::new(1.0, 1.0).unwrap(),
        MpParams::new(1.0, 2.0).unwrap(),
        MpParams::new(2.0, 0.5).unwrap(),
    ];
    for p in &params {
        let fns = [
            TestFunction::identity(),
            TestFunction::polynomial(vec![1.0, -0.5, 0.25]).unwrap(),
            TestFunction::cauchy_re(Complex64::new(p.edge_upper() + 1.0, 0.0)),
            TestFunction::cauchy_im(Complex64::new(1.0, 1.0)),
            TestFunction::gaussian_bump(p.mean(), 0.8).unwrap(),
            TestFunction::indicator_smoothed(0.2, p.mean(), 0.4).unwrap(),
        ];
        for f in &fns {
            let got = mp_expect(f, p).unwrap();
            let want = mp_oracle_real(p, 4000, |x| f.eval(x));
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }
}

#[test]
fn golden_cauchy_functionals_at_square_ratio() {
    // Frozen values for f(x) = 1/(5 - x) at (sigma2, c) = (1, 1), confirmed
    // by the oracle at two refinement levels and by closed forms:
    // E f = (5 - sqrt 5)/10, omega2 = (7 sqrt 5 - 15)/50,
    // rho = (5 - 2 sqrt 5)/5.
    let p = MpParams::new(1.0, 1.0).unwrap();
    let f = TestFunction::cauchy_re(Complex64::new(5.0, 0.0));

    assert_abs_diff_eq!(
        mp_expect(&f, &p).unwrap(),
        0.27639320225002103,
        epsilon = 1e-10
    );
    assert_abs_diff_eq!(
        omega2(&f, &p).unwrap(),
        0.013049516849970557,
        epsilon = 1e-10
    );
    assert_abs_diff_eq!(rho(&f, &p).unwrap(), 0.10557280900008412, epsilon = 1e-10);

    // The same numbers through the oracle at two refinement levels.
    for n in [1000, 4000] {
        let ef = mp_oracle_real(&p, n, |x| f.eval(x));
        let ef2 = mp_oracle_real(&p, n, |x| f.eval(x) * f.eval(x));
        assert_abs_diff_eq!(ef2 - ef * ef, 0.013049516849970557, epsilon = 1e-12);
    }
}

#[test]
fn normalization_with_atom_across_ratios() {
    for &c in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        let p = MpParams::new(1.0, c).unwrap();
        let total = mp_expect(&TestFunction::constant(1.0), &p).unwrap();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(mp_oracle_real(&p, 4000, |_| 1.0), 1.0, epsilon = 1e-10);
    }
}

#[test]
fn stieltjes_matches_quadrature_transform_on_grid() {
    for &(s2, c) in &[(1.0, 1.0), (1.0, 2.0), (2.0, 0.5)] {
        let p = MpParams::new(s2, c).unwrap();
        let mut grid = vec![
            Complex64::new(-1.0, 0.0),
            Complex64::new(p.edge_upper() + 0.5, 0.0),
            Complex64::new(p.edge_upper() + 3.0, 0.0),
        ];
        for k in 0..12 {
            grid.push(Complex64::new(
                -2.0 + 0.8 * k as f64,
                0.35 + 0.21 * k as f64,
            ));
        }
        for &z in &grid {
            let g = stieltjes_g(z, &p).unwrap();
            let oracle = mp_oracle(&p, 4000, |x| (z - x).finv());
            assert!(
                (g - oracle).norm() < 1e-9,
                "g mismatch at z={z}, |diff|={}",
                (g - oracle).norm()
            );
        }
    }
}

#[test]
fn stieltjes_decay_at_large_argument() {
    let p = MpParams::new(1.0, 1.0).unwrap();
    for &z in &[Complex64::new(1e6, 0.0), Complex64::new(0.0, 1e6)] {
        let g = stieltjes_g(z, &p).unwrap();
        // |g - 1/z| = O(|z|^-2), i.e. relative to 1/|z| it is O(1e-6).
        assert!((g - z.finv()).norm() * z.norm() < 1e-5);
    }
}

#[test]
fn quadratic_residual_and_bound_on_dense_grid() {
    let p = MpParams::new(1.0, 1.0).unwrap();
    let s2 = p.sigma2();
    let mut count = 0;
    for i in 0..10 {
        for j in 0..10 {
            let z = Complex64::new(-1.5 + 0.7 * i as f64, 0.05 + 0.45 * j as f64);
            let g = stieltjes_g(z, &p).unwrap();
            let residual =
                (z * s2 * g * g + (Complex64::new(s2 * (p.c() - 1.0), 0.0) - z) * g + 1.0).norm();
            assert!(residual < 1e-12, "residual {residual} at {z}");
            assert!(g.norm() <= 1.0 / z.im.abs() * (1.0 + 1e-12));
            count += 1;
        }
    }
    assert_eq!(count, 100);
}

#[test]
fn density_midpoint_and_edge_values() {
    let p = MpParams::new(1.0, 1.0).unwrap();
    assert_abs_diff_eq!(
        mp_density(2.0, &p),
        1.0 / (2.0 * core::f64::consts::PI),
        epsilon = 1e-14
    );
    assert_eq!(mp_density(p.edge_upper(), &p), 0.0);
    let q = MpParams::new(1.0, 2.0).unwrap();
    assert_abs_diff_eq!(q.edge_upper(), 5.828427124746190, epsilon = 1e-12);
    assert_abs_diff_eq!(q.edge_lower(), 0.171572875253810, epsilon = 1e-12);
}

#[test]
fn cdf_golden_value_and_oracle_consistency() {
    // F(2) at (1,1) = 1/2 + 1/pi (closed form).
    let p = MpParams::new(1.0, 1.0).unwrap();
    let f2 = mp_cdf(2.0, &p).unwrap();
    assert_abs_diff_eq!(f2, 0.5 + core::f64::consts::FRAC_1_PI, epsilon = 1e-10);

    // CDF of the band via oracle with a sharp cut evaluated between nodes.
    let q = MpParams::new(1.0, 2.0).unwrap();
    let x0 = 3.0;
    let oracle = mp_oracle_real(&q, 200_000, |x| if x <= x0 { 1.0 } else { 0.0 });
    assert_abs_diff_eq!(mp_cdf(x0, &q).unwrap(), oracle, epsilon = 1e-4);
}

#[test]
fn relations_between_ratio_and_inverse_ratio_laws() {
    for &(s2, c) in &[(1.0, 2.0), (1.0, 0.5), (1.5, 3.0)] {
        let p = MpParams::new(s2, c).unwrap();
        let pts = [
            Complex64::new(3.0, 1.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(-1.0, 0.5),
            Complex64::new(1.0, 4.0),
        ];
        for &z in &pts {
            assert!(relation_g_residual(z, &p).unwrap() < 1e-10);
            for &w in &pts {
                assert!(relation_phi_residual(z, w, &p).unwrap() < 1e-10);
            }
        }
    }
}

#[test]
fn golden_phi_kernel_value() {
    // phi(2i, 1+i) at (sigma2, c) = (1, 2), frozen from an independent
    // high-precision evaluation.
    let p = MpParams::new(1.0, 2.0).unwrap();
    let v = phi_kernel(Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0), &p).unwrap();
    assert_abs_diff_eq!(v.re, 0.71933158618115238, epsilon = 1e-9);
    assert_abs_diff_eq!(v.im, -0.34599194828554692, epsilon = 1e-9);
}

#[test]
fn orthonormal_polynomial_system() {
    for &(s2, c) in &[(1.0, 0.25), (1.0, 1.0), (2.0, 4.0)] {
        let p = MpParams::new(s2, c).unwrap();
        let p0p0 = mp_integrate(&p, |_| 1.0).unwrap();
        let p1p1 = mp_integrate(&p, |x| orthonormal_p1(x, &p).powi(2)).unwrap();
        let p0p1 = mp_integrate(&p, |x| orthonormal_p1(x, &p)).unwrap();
        assert_abs_diff_eq!(p0p0, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p1p1, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(p0p1, 0.0, epsilon = 1e-10);
    }
}

#[test]
fn entry_clt_prediction_decomposition_is_exact() {
    let p = MpParams::new(1.0, 1.0).unwrap();
    let f = TestFunction::cauchy_re(Complex64::new(5.0, 0.0));
    for &field in &[EntryField::Real, EntryField::Complex] {
        for &diag in &[true, false] {
            for &k4 in &[0.0, -2.0, 6.0] {
                let pr = predict_entry_clt(&f, &p, field, k4, diag).unwrap();
                assert_eq!(pr.variance, pr.omega2_term + pr.kappa4_term);
            }
        }
    }
}

#[test]
fn centered_exponential_diagonal_prediction_matches_hand_value() {
    // kappa4 = 6 sigma^4, f(x) = x: 2 c sigma^4 + 6 c sigma^4.
    let p = MpParams::new(1.0, 1.0).unwrap();
    let pr =
        predict_entry_clt(&TestFunction::identity(), &p, EntryField::Real, 6.0, true).unwrap();
    assert_abs_diff_eq!(pr.variance, 8.0, epsilon = 1e-9);
}

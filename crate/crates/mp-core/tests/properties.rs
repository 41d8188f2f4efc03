//! Property tests for the analytic invariants.

use mp_core::{
    mp_density, omega2, predict_entry_clt, rho, stieltjes_g, Complex64, EntryField, MpParams,
    TestFunction,
};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = MpParams> {
    (0.2f64..3.0, 0.2f64..4.0).prop_map(|(s2, c)| MpParams::new(s2, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn density_is_nonnegative_and_supported(p in params_strategy(), x in -1.0f64..10.0) {
        let d = mp_density(x, &p);
        prop_assert!(d >= 0.0);
        if x < p.edge_lower() || x > p.edge_upper() {
            prop_assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn stieltjes_bound_and_residual_off_axis(
        p in params_strategy(),
        re in -5.0f64..10.0,
        im in 0.05f64..5.0,
        flip in proptest::bool::ANY,
    ) {
        let z = Complex64::new(re, if flip { -im } else { im });
        let g = stieltjes_g(z, &p).unwrap();
        prop_assert!(g.norm() <= 1.0 / im * (1.0 + 1e-10));
        prop_assert!(g.im * z.im <= 0.0);
        let s2 = p.sigma2();
        let residual =
            (z * s2 * g * g + (Complex64::new(s2 * (p.c() - 1.0), 0.0) - z) * g + 1.0).norm();
        prop_assert!(residual < 1e-12);
    }

    #[test]
    fn omega2_nonnegative_for_random_cubics(
        p in params_strategy(),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -1.0f64..1.0,
        d in -0.5f64..0.5,
    ) {
        let f = TestFunction::polynomial(vec![a, b, c, d]).unwrap();
        prop_assert!(omega2(&f, &p).unwrap() >= 0.0);
    }

    #[test]
    fn constants_have_zero_functionals(p in params_strategy(), v in -10.0f64..10.0) {
        let f = TestFunction::constant(v);
        let w2 = omega2(&f, &p).unwrap();
        prop_assert!(w2 >= 0.0);
        prop_assert!(w2 < 1e-12 * (1.0 + v * v));
        prop_assert!(rho(&f, &p).unwrap().abs() < 1e-9);
    }

    #[test]
    fn prediction_decomposition_identity(
        p in params_strategy(),
        k4 in -3.0f64..8.0,
        diagonal in proptest::bool::ANY,
    ) {
        let f = TestFunction::identity();
        for field in [EntryField::Real, EntryField::Complex] {
            let pr = predict_entry_clt(&f, &p, field, k4, diagonal).unwrap();
            prop_assert_eq!(pr.variance, pr.omega2_term + pr.kappa4_term);
            prop_assert!((pr.re_variance + pr.im_variance - pr.variance).abs() < 1e-12);
        }
    }
}

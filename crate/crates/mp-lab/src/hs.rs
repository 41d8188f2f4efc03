//! Planar resolvent-integral route to `f(M)`.
//!
//! `f(M) = -(1/π) ∬ ∂f̃/∂z̄ (zI - M)^{-1} dx dy` where `f̃` is the
//! quasi-analytic extension of `f` of order `l`, cut off by a smooth
//! mollifier in `y`. Conjugate symmetry folds the lower half plane into the
//! upper one, so the driver evaluates one resolvent factorization per node
//! with `y > 0` and closes with the adjoint.

use ndarray::Array2;
use ndarray_linalg::Inverse;
use num_complex::Complex64;
use rayon::prelude::*;

use mp_core::jet::{smooth_step_jet, Jet};
use mp_core::TestFunction;

use crate::ensemble::MatrixData;
use crate::funcalc::shifted;
use crate::{LabError, Result};

/// Quasi-analytic extension of order `l`:
/// `f̃(x + iy) = Σ_{n<=l} f^{(n)}(x) (iy)^n / n! · σ(y)` with the standard
/// smooth mollifier `σ` equal to 1 on `|y| <= 1/2` and 0 on `|y| >= 1`.
#[derive(Debug, Clone)]
pub struct QuasiAnalyticExtension {
    pub f: TestFunction,
    pub order: usize,
}

impl QuasiAnalyticExtension {
    /// Default extension order; high enough that the near-axis vanishing of
    /// `∂f̃/∂z̄` dominates the resolvent blow-up with a wide margin.
    pub const DEFAULT_ORDER: usize = 6;

    pub fn new(f: TestFunction, order: usize) -> Result<Self> {
        if order == 0 || order + 1 > mp_core::jet::MAX_ORDER {
            return Err(LabError::InvalidRequest(format!(
                "extension order {order} outside supported range"
            )));
        }
        Ok(Self { f, order })
    }

    /// Mollifier value and derivative at `y >= 0`.
    fn mollifier(y: f64) -> (f64, f64) {
        if y <= 0.5 {
            return (1.0, 0.0);
        }
        if y >= 1.0 {
            return (0.0, 0.0);
        }
        let t = Jet::variable(2.0 * (1.0 - y), 1);
        let s = smooth_step_jet(&t);
        (s.value(), -2.0 * s.derivative(1))
    }

    /// Extension value `f̃(x + iy)`; equals `f(x)` exactly on the axis.
    pub fn extension(&self, x: f64, y: f64) -> Complex64 {
        let (sigma, _) = Self::mollifier(y.abs());
        if sigma == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let derivs = self.f.derivatives(x, self.order);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut iy_pow = Complex64::new(1.0, 0.0);
        let mut factorial = 1.0;
        for (n, &d) in derivs.iter().enumerate() {
            if n > 0 {
                iy_pow *= Complex64::new(0.0, y);
                factorial *= n as f64;
            }
            acc += iy_pow * (d / factorial);
        }
        acc * sigma
    }

    /// `∂f̃/∂z̄` at `x + iy`, `y > 0`:
    /// `(1/2)[σ(y) f^{(l+1)}(x) (iy)^l / l! + i σ'(y) Σ_{n<=l} f^{(n)}(x)(iy)^n/n!]`.
    pub fn dbar(&self, x: f64, y: f64) -> Complex64 {
        let (sigma, sigma_prime) = Self::mollifier(y);
        if sigma == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let l = self.order;
        let derivs = self.f.derivatives(x, l + 1);

        let mut iy_pow = Complex64::new(1.0, 0.0);
        let mut factorial = 1.0;
        let mut taylor = Complex64::new(0.0, 0.0);
        for (n, &d) in derivs.iter().take(l + 1).enumerate() {
            if n > 0 {
                iy_pow *= Complex64::new(0.0, y);
                factorial *= n as f64;
            }
            taylor += iy_pow * (d / factorial);
        }
        // After the loop iy_pow = (iy)^l and factorial = l!.
        let leading = iy_pow * (derivs[l + 1] / factorial) * sigma;
        let cutoff = Complex64::new(0.0, sigma_prime) * taylor;
        (leading + cutoff) * 0.5
    }
}

/// Tensor-product integration grid for the strip `0 < y <= 1`.
#[derive(Debug, Clone, Copy)]
pub struct HsGrid {
    /// Simpson nodes across the support of `f` (rounded up to odd).
    pub nx: usize,
    /// Total nodes across `y`, split between a log-spaced segment
    /// `[y_min, 1/2]` and a linear segment `[1/2, 1]`.
    pub ny: usize,
    /// Lower cutoff of the log segment; the integrand vanishes like `y^l`
    /// there, so the discarded mass is negligible.
    pub y_min: f64,
}

impl Default for HsGrid {
    fn default() -> Self {
        HsGrid {
            nx: 200,
            ny: 64,
            y_min: 1e-4,
        }
    }
}

fn simpson_nodes(a: f64, b: f64, n_req: usize) -> Vec<(f64, f64)> {
    let n = if n_req < 3 {
        3
    } else if n_req % 2 == 0 {
        n_req + 1
    } else {
        n_req
    };
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let w = if k == 0 || k == n - 1 {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + h * k as f64, w * h / 3.0)
        })
        .collect()
}

/// y-nodes and weights: log-Simpson on `[y_min, 1/2]`, linear Simpson on
/// `[1/2, 1]`.
fn y_nodes(grid: &HsGrid) -> Vec<(f64, f64)> {
    let n_log = (grid.ny / 2).max(3);
    let n_lin = (grid.ny - grid.ny / 2).max(3);
    let mut nodes = Vec::new();
    for (u, w) in simpson_nodes(grid.y_min.ln(), 0.5f64.ln(), n_log) {
        let y = u.exp();
        nodes.push((y, w * y));
    }
    for (y, w) in simpson_nodes(0.5, 1.0, n_lin) {
        nodes.push((y, w));
    }
    nodes
}

fn hs_sum(
    m: &MatrixData,
    ext: &QuasiAnalyticExtension,
    grid: &HsGrid,
    (x_lo, x_hi): (f64, f64),
) -> Result<Array2<Complex64>> {
    let x_nodes = simpson_nodes(x_lo, x_hi, grid.nx);
    let yw = y_nodes(grid);

    // Collect quadrature nodes with nonzero density weight.
    let mut nodes: Vec<(Complex64, Complex64)> = Vec::new();
    for &(x, wx) in &x_nodes {
        for &(y, wy) in &yw {
            let d = ext.dbar(x, y);
            if d.norm() > 0.0 {
                nodes.push((Complex64::new(x, y), d * (wx * wy)));
            }
        }
    }

    let n = match m {
        MatrixData::Real(a) => a.nrows(),
        MatrixData::Complex(a) => a.nrows(),
    };

    // One factorization per node; chunks are summed in fixed order so the
    // result does not depend on the parallel schedule.
    let partials: Vec<Result<Array2<Complex64>>> = nodes
        .par_chunks(32)
        .map(|chunk| {
            let mut acc = Array2::<Complex64>::zeros((n, n));
            for &(z, w) in chunk {
                let r = shifted(m, z).inv()?;
                acc.zip_mut_with(&r, |a, &b| *a += w * b);
            }
            Ok(acc)
        })
        .collect();

    let mut total = Array2::<Complex64>::zeros((n, n));
    for p in partials {
        total += &p?;
    }
    Ok(total)
}

/// `f(M)` through the planar resolvent integral.
///
/// The result is recomputed on a refined grid; if the two differ by more
/// than `rel_tol/2` in relative Frobenius norm the grid is reported as too
/// coarse (with both norms), otherwise the refined value is returned.
pub fn matrix_function_hs(
    m: &MatrixData,
    ext: &QuasiAnalyticExtension,
    grid: &HsGrid,
    rel_tol: f64,
) -> Result<Array2<f64>> {
    if !ext.f.is_bump_like() {
        return Err(LabError::InvalidRequest(
            "planar-integral route needs a decaying family (bump or smoothed indicator)".into(),
        ));
    }
    let span = ext
        .f
        .support_hint()
        .expect("bump-like families advertise support");

    let coarse = assemble(hs_sum(m, ext, grid, span)?);
    let fine_grid = HsGrid {
        nx: grid.nx * 2,
        ny: grid.ny * 2,
        y_min: grid.y_min,
    };
    let fine = assemble(hs_sum(m, ext, &fine_grid, span)?);

    let diff = frobenius_diff(&fine, &coarse);
    let fine_norm = frobenius(&fine);
    let relative_change = diff / fine_norm.max(1e-300);
    if relative_change > 0.5 * rel_tol {
        return Err(LabError::GridTooCoarse {
            relative_change,
            tolerance: rel_tol,
            coarse_norm: frobenius(&coarse),
            refined_norm: fine_norm,
        });
    }
    Ok(fine)
}

/// Close the integral with the lower half plane: `-(1/π)(S + S^H)`, which is
/// real symmetric for self-adjoint input.
fn assemble(s: Array2<Complex64>) -> Array2<f64> {
    let n = s.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = -(s[(i, j)].re + s[(j, i)].re) / std::f64::consts::PI;
        }
    }
    out
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn frobenius_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Relative Frobenius distance; shared by tests and the acceptance suite.
pub fn relative_frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    frobenius_diff(a, b) / frobenius(b).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{form_covariance, sample_matrix, EnsembleSpec, EntryDist};
    use crate::funcalc::matrix_function_spectral;
    use approx::assert_abs_diff_eq;
    use mp_core::EntryField;

    fn bump() -> TestFunction {
        TestFunction::gaussian_bump(1.5, 0.5).unwrap()
    }

    #[test]
    fn extension_is_exact_on_the_axis() {
        let ext = QuasiAnalyticExtension::new(bump(), 6).unwrap();
        for &x in &[0.0, 0.7, 1.5, 3.2] {
            let v = ext.extension(x, 0.0);
            assert_eq!(v.re, ext.f.eval(x));
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn dbar_vanishes_at_stated_order_near_axis() {
        // For y < 1/2 the cutoff is inert and |dbar| = |f^{(l+1)}(x)| y^l / (2 l!),
        // so the ratio across two decades is exactly 10^l.
        for &l in &[2usize, 6] {
            let ext = QuasiAnalyticExtension::new(bump(), l).unwrap();
            let x = 1.9; // away from bump center so f^{(l+1)}(x) != 0
            let a = ext.dbar(x, 1e-2).norm();
            let b = ext.dbar(x, 1e-3).norm();
            let measured = (a / b).log10();
            assert!(
                (measured - l as f64).abs() < 0.2 * l as f64,
                "order {l}: measured decay exponent {measured}"
            );
        }
    }

    #[test]
    fn dbar_is_zero_beyond_the_mollifier() {
        let ext = QuasiAnalyticExtension::new(bump(), 4).unwrap();
        assert_eq!(ext.dbar(1.5, 1.1).norm(), 0.0);
        assert_eq!(ext.extension(1.5, 1.2).norm(), 0.0);
    }

    #[test]
    fn scalar_case_matches_pointwise_value() {
        let f = bump();
        let ext = QuasiAnalyticExtension::new(f.clone(), 6).unwrap();
        let m = MatrixData::Real(Array2::from_elem((1, 1), 1.1));
        let got = matrix_function_hs(&m, &ext, &HsGrid::default(), 1e-3).unwrap();
        assert_abs_diff_eq!(got[(0, 0)], f.eval(1.1), epsilon = 1e-4);
    }

    #[test]
    fn matches_spectral_route_on_an_ensemble_instance() {
        let spec = EnsembleSpec {
            rows: 50,
            cols: 100,
            field: EntryField::Real,
            entry: EntryDist::Gaussian { sigma2: 1.0 },
            truncation: None,
            seed: 11,
        };
        let md = form_covariance(&sample_matrix(&spec, 0).unwrap());
        let m = match &md {
            MatrixData::Real(a) => a.clone(),
            _ => unreachable!(),
        };
        let f = bump();
        let ext = QuasiAnalyticExtension::new(f.clone(), 6).unwrap();
        let hs = matrix_function_hs(&md, &ext, &HsGrid::default(), 1e-3).unwrap();
        let spectral = matrix_function_spectral(&m, &f).unwrap();
        let rel = relative_frobenius(&hs, &spectral);
        assert!(rel < 1e-3, "relative frobenius {rel}");
    }

    #[test]
    fn higher_extension_order_is_more_accurate_at_fixed_grid() {
        let spec = EnsembleSpec {
            rows: 24,
            cols: 48,
            field: EntryField::Real,
            entry: EntryDist::Gaussian { sigma2: 1.0 },
            truncation: None,
            seed: 12,
        };
        let md = form_covariance(&sample_matrix(&spec, 0).unwrap());
        let m = match &md {
            MatrixData::Real(a) => a.clone(),
            _ => unreachable!(),
        };
        let f = bump();
        let spectral = matrix_function_spectral(&m, &f).unwrap();
        let grid = HsGrid {
            nx: 120,
            ny: 48,
            y_min: 1e-4,
        };
        let errs: Vec<f64> = [2usize, 6]
            .iter()
            .map(|&l| {
                let ext = QuasiAnalyticExtension::new(f.clone(), l).unwrap();
                let hs = hs_sum(&md, &ext, &grid, f.support_hint().unwrap()).unwrap();
                relative_frobenius(&assemble(hs), &spectral)
            })
            .collect();
        assert!(
            errs[1] < errs[0],
            "order 6 error {} not below order 2 error {}",
            errs[1],
            errs[0]
        );
    }

    #[test]
    fn rejects_non_decaying_families() {
        let ext = QuasiAnalyticExtension::new(TestFunction::identity(), 6).unwrap();
        let m = MatrixData::Real(Array2::eye(3));
        assert!(matches!(
            matrix_function_hs(&m, &ext, &HsGrid::default(), 1e-3),
            Err(LabError::InvalidRequest(_))
        ));
    }
}

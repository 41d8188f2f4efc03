//! Matrix functional calculus on self-adjoint matrices.
//!
//! `f(M)` is defined through the spectral decomposition `Q f(Λ) Q^*`. For the
//! Monte-Carlo hot paths there are exact alternative routes per family —
//! polynomials through Horner matrix-vector recursions, Cauchy kernels
//! through one factorized resolvent solve — all computing the same object;
//! the spectral route is the reference they are tested against.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eigh, EigValsh, Inverse, Scalar, Solve, UPLO};
use num_complex::Complex64;

use mp_core::TestFunction;

use crate::ensemble::MatrixData;
use crate::{LabError, Result};

/// Eigenvalues (ascending) and the unitary of column eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T> {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<T>,
}

impl<T: Scalar<Real = f64> + ndarray_linalg::Lapack> SpectralDecomposition<T> {
    /// `max |Q Λ Q^* - M|` — reconstruction fidelity diagnostic.
    pub fn reconstruction_error(&self, m: &Array2<T>) -> f64 {
        let rebuilt = self.apply_scalar_map(|x| x);
        let mut err: f64 = 0.0;
        for (a, b) in rebuilt.iter().zip(m.iter()) {
            err = err.max((*a - *b).abs());
        }
        err
    }

    /// `max |Q^* Q - I|` — orthonormality diagnostic.
    pub fn orthonormality_error(&self) -> f64 {
        let q = &self.eigenvectors;
        let gram = conj_t(q).dot(q);
        let n = gram.nrows();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { T::one() } else { T::zero() };
                err = err.max((gram[(i, j)] - target).abs());
            }
        }
        err
    }

    /// Assemble `Q · diag(map(λ)) · Q^*`.
    pub fn apply_scalar_map(&self, map: impl Fn(f64) -> f64) -> Array2<T> {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (mut col, &lambda) in scaled.axis_iter_mut(Axis(1)).zip(self.eigenvalues.iter()) {
            let v = T::from_real(map(lambda));
            col.mapv_inplace(|x| x * v);
        }
        scaled.dot(&conj_t(q))
    }

    /// Entry `(Q f(Λ) Q^*)_{ij}` without forming the full matrix.
    pub fn entry(&self, f: &TestFunction, i: usize, j: usize) -> T {
        let q = &self.eigenvectors;
        let mut acc = T::zero();
        for (l, &lambda) in self.eigenvalues.iter().enumerate() {
            acc += q[(i, l)] * q[(j, l)].conj() * T::from_real(f.eval(lambda));
        }
        acc
    }
}

fn conj_t<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    m.t().mapv(|x| x.conj())
}

/// Symmetric/Hermitian eigendecomposition with ascending eigenvalues.
pub fn eigh<T: Scalar<Real = f64> + ndarray_linalg::Lapack>(
    m: &Array2<T>,
) -> Result<SpectralDecomposition<T>> {
    let (eigenvalues, eigenvectors) = m.eigh(UPLO::Lower)?;
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(LabError::Linalg("non-finite eigenvalues".into()));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `f(M)` by spectral calculus.
pub fn matrix_function_spectral<T: Scalar<Real = f64> + ndarray_linalg::Lapack>(
    m: &Array2<T>,
    f: &TestFunction,
) -> Result<Array2<T>> {
    Ok(eigh(m)?.apply_scalar_map(|x| f.eval(x)))
}

/// Largest eigenvalue (no eigenvectors).
pub fn largest_eigenvalue<T: Scalar<Real = f64> + ndarray_linalg::Lapack>(
    m: &Array2<T>,
) -> Result<f64> {
    let vals = m.eigvalsh(UPLO::Lower)?;
    vals.iter()
        .fold(None::<f64>, |acc, &v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or_else(|| LabError::Linalg("empty matrix".into()))
}

/// Complexified copy of a self-adjoint matrix.
pub fn to_complex(m: &MatrixData) -> Array2<Complex64> {
    match m {
        MatrixData::Real(a) => a.mapv(|x| Complex64::new(x, 0.0)),
        MatrixData::Complex(a) => a.clone(),
    }
}

/// `z I - M` for a complex shift.
pub fn shifted(m: &MatrixData, z: Complex64) -> Array2<Complex64> {
    let mut s = to_complex(m);
    s.mapv_inplace(|v| -v);
    let n = s.nrows();
    for i in 0..n {
        s[(i, i)] += z;
    }
    s
}

/// Entries of the resolvent `(zI - M)^{-1}` at the requested index pairs,
/// via one LU factorization and unit-vector solves (no full inversion).
pub fn resolvent_entries(
    m: &MatrixData,
    z: Complex64,
    pairs: &[(usize, usize)],
) -> Result<Vec<Complex64>> {
    let a = shifted(m, z);
    let n = a.nrows();
    let mut columns: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    columns.sort_unstable();
    columns.dedup();

    use ndarray_linalg::Factorize;
    let lu = a.factorize()?;
    let mut solved: std::collections::HashMap<usize, Array1<Complex64>> =
        std::collections::HashMap::new();
    for &j in &columns {
        if j >= n {
            return Err(LabError::InvalidRequest(format!(
                "resolvent column {j} out of range for size {n}"
            )));
        }
        let mut e = Array1::from_elem(n, Complex64::new(0.0, 0.0));
        e[j] = Complex64::new(1.0, 0.0);
        solved.insert(j, lu.solve(&e)?);
    }
    Ok(pairs
        .iter()
        .map(|&(i, j)| solved[&j][i])
        .collect())
}

/// Exact entries of `f(M)` at the requested pairs, dispatched by family:
/// polynomials via Horner matrix-vector recursion, Cauchy kernels via the
/// resolvent identity `Re/Im (z0 I - M)^{-1}`, bump families via the
/// spectral decomposition. All routes produce the same mathematical object.
pub fn function_entries(
    m: &MatrixData,
    f: &TestFunction,
    pairs: &[(usize, usize)],
) -> Result<Vec<Complex64>> {
    match f {
        TestFunction::Constant { value } => Ok(pairs
            .iter()
            .map(|&(i, j)| {
                if i == j {
                    Complex64::new(*value, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()),
        TestFunction::Polynomial { coeffs } => polynomial_entries(m, coeffs, pairs),
        TestFunction::CauchyRe { pole_re, pole_im } => {
            cauchy_entries(m, Complex64::new(*pole_re, *pole_im), true, pairs)
        }
        TestFunction::CauchyIm { pole_re, pole_im } => {
            cauchy_entries(m, Complex64::new(*pole_re, *pole_im), false, pairs)
        }
        _ => spectral_entries(m, f, pairs),
    }
}

fn polynomial_entries(
    m: &MatrixData,
    coeffs: &[f64],
    pairs: &[(usize, usize)],
) -> Result<Vec<Complex64>> {
    let degree = coeffs.len() - 1;
    if degree <= 1 {
        // Affine case: c0 I + c1 M read off directly.
        let c0 = coeffs[0];
        let c1 = coeffs.get(1).copied().unwrap_or(0.0);
        return Ok(pairs
            .iter()
            .map(|&(i, j)| {
                let mij = match m {
                    MatrixData::Real(a) => Complex64::new(a[(i, j)], 0.0),
                    MatrixData::Complex(a) => a[(i, j)],
                };
                mij * c1 + if i == j { c0 } else { 0.0 }
            })
            .collect());
    }

    // Horner on columns: v <- M v + c_k e_j gives (Σ c_k M^k) e_j.
    let mut columns: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    columns.sort_unstable();
    columns.dedup();
    let mut per_column: std::collections::HashMap<usize, Vec<Complex64>> =
        std::collections::HashMap::new();
    match m {
        MatrixData::Real(a) => {
            let n = a.nrows();
            for &j in &columns {
                let mut v = Array1::<f64>::zeros(n);
                v[j] = coeffs[degree];
                for k in (0..degree).rev() {
                    v = a.dot(&v);
                    v[j] += coeffs[k];
                }
                per_column.insert(j, v.iter().map(|&x| Complex64::new(x, 0.0)).collect());
            }
        }
        MatrixData::Complex(a) => {
            let n = a.nrows();
            for &j in &columns {
                let mut v = Array1::<Complex64>::zeros(n);
                v[j] = Complex64::new(coeffs[degree], 0.0);
                for k in (0..degree).rev() {
                    v = a.dot(&v);
                    v[j] += coeffs[k];
                }
                per_column.insert(j, v.to_vec());
            }
        }
    }
    Ok(pairs.iter().map(|&(i, j)| per_column[&j][i]).collect())
}

fn cauchy_entries(
    m: &MatrixData,
    pole: Complex64,
    real_part: bool,
    pairs: &[(usize, usize)],
) -> Result<Vec<Complex64>> {
    // Real pole, real matrix: the resolvent is real and the imaginary-part
    // kernel vanishes identically, so one real factorization suffices.
    if pole.im == 0.0 {
        if let MatrixData::Real(a) = m {
            if !real_part {
                return Ok(vec![Complex64::new(0.0, 0.0); pairs.len()]);
            }
            let n = a.nrows();
            let mut s = a.mapv(|x| -x);
            for i in 0..n {
                s[(i, i)] += pole.re;
            }
            use ndarray_linalg::Factorize;
            let lu = s.factorize()?;
            let mut columns: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
            columns.sort_unstable();
            columns.dedup();
            let mut solved: std::collections::HashMap<usize, Array1<f64>> =
                std::collections::HashMap::new();
            for &j in &columns {
                let mut e = Array1::zeros(n);
                e[j] = 1.0;
                solved.insert(j, lu.solve(&e)?);
            }
            return Ok(pairs
                .iter()
                .map(|&(i, j)| Complex64::new(solved[&j][i], 0.0))
                .collect());
        }
    }

    // f(M) = (R(z0) + R(conj z0))/2 resp. (R(z0) - R(conj z0))/2i with
    // R(conj z0) the conjugate transpose of R(z0) for self-adjoint M;
    // entries need R_ij and R_ji.
    let mut wanted: Vec<(usize, usize)> = Vec::with_capacity(pairs.len() * 2);
    for &(i, j) in pairs {
        wanted.push((i, j));
        wanted.push((j, i));
    }
    let entries = resolvent_entries(m, pole, &wanted)?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let rij = entries[2 * k];
            let rji = entries[2 * k + 1];
            if real_part {
                (rij + rji.conj()) * 0.5
            } else {
                (rij - rji.conj()) * Complex64::new(0.0, -0.5)
            }
        })
        .collect())
}

fn spectral_entries(
    m: &MatrixData,
    f: &TestFunction,
    pairs: &[(usize, usize)],
) -> Result<Vec<Complex64>> {
    match m {
        MatrixData::Real(a) => {
            let d = eigh(a)?;
            Ok(pairs
                .iter()
                .map(|&(i, j)| Complex64::new(d.entry(f, i, j), 0.0))
                .collect())
        }
        MatrixData::Complex(a) => {
            let d = eigh(a)?;
            Ok(pairs.iter().map(|&(i, j)| d.entry(f, i, j)).collect())
        }
    }
}

/// `max |B^*(z - BB^*)^{-1} B - B^* B (z - B^* B)^{-1}|` — residual of the
/// resolvent commute identity, with both sides evaluated from independent
/// factorizations of the N- and n-sized shifted matrices.
pub fn commute_identity_residual(b: &Array2<Complex64>, z: Complex64) -> Result<f64> {
    let (n_rows, n_cols) = b.dim();
    let b_adj = conj_t(b);
    let gram_big = b.dot(&b_adj); // B B^* (N x N)
    let gram_small = b_adj.dot(b); // B^* B (n x n)

    let mut s_big = gram_big.mapv(|v| -v);
    for i in 0..n_rows {
        s_big[(i, i)] += z;
    }
    let mut s_small = gram_small.mapv(|v| -v);
    for i in 0..n_cols {
        s_small[(i, i)] += z;
    }

    let lhs = b_adj.dot(&s_big.inv()?).dot(b);
    let rhs = gram_small.dot(&s_small.inv()?);

    let mut err: f64 = 0.0;
    for (a, c) in lhs.iter().zip(rhs.iter()) {
        err = err.max((a - c).norm());
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{form_covariance, sample_matrix, EnsembleSpec, EntryDist};
    use approx::assert_abs_diff_eq;
    use mp_core::EntryField;

    fn random_covariance(rows: usize, cols: usize, seed_stream: u64) -> MatrixData {
        let spec = EnsembleSpec {
            rows,
            cols,
            field: EntryField::Real,
            entry: EntryDist::Gaussian { sigma2: 1.0 },
            truncation: None,
            seed: 99,
        };
        form_covariance(&sample_matrix(&spec, seed_stream).unwrap())
    }

    #[test]
    fn identity_and_diagonal_are_exact() {
        let eye = Array2::<f64>::eye(4);
        let d = eigh(&eye).unwrap();
        for &l in d.eigenvalues.iter() {
            assert_abs_diff_eq!(l, 1.0, epsilon = 1e-14);
        }
        assert!(d.reconstruction_error(&eye) < 1e-14);

        let m = Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 0.0, 3.0]).unwrap();
        let d = eigh(&m).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvalues[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn random_instance_orthonormality_and_reconstruction() {
        let m = match random_covariance(50, 70, 0) {
            MatrixData::Real(a) => a,
            _ => unreachable!(),
        };
        let d = eigh(&m).unwrap();
        assert!(d.orthonormality_error() < 1e-12);
        let scale = 1.0 + largest_eigenvalue(&m).unwrap();
        assert!(d.reconstruction_error(&m) <= 1e-10 * scale);
        // Ascending order and PSD up to roundoff.
        for w in d.eigenvalues.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert!(d.eigenvalues[0] > -1e-10);
    }

    #[test]
    fn identity_function_returns_the_matrix() {
        let m = match random_covariance(24, 30, 1) {
            MatrixData::Real(a) => a,
            _ => unreachable!(),
        };
        let f = TestFunction::identity();
        let fm = matrix_function_spectral(&m, &f).unwrap();
        for (a, b) in fm.iter().zip(m.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let one = matrix_function_spectral(&m, &TestFunction::constant(1.0)).unwrap();
        for i in 0..24 {
            for j in 0..24 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(one[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn function_eigenvalues_match_mapped_spectrum() {
        let m = match random_covariance(32, 32, 2) {
            MatrixData::Real(a) => a,
            _ => unreachable!(),
        };
        let f = TestFunction::gaussian_bump(1.0, 0.7).unwrap();
        let fm = matrix_function_spectral(&m, &f).unwrap();
        let mut mapped: Vec<f64> = eigh(&m)
            .unwrap()
            .eigenvalues
            .iter()
            .map(|&l| f.eval(l))
            .collect();
        let mut got: Vec<f64> = eigh(&fm).unwrap().eigenvalues.to_vec();
        mapped.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (a, b) in mapped.iter().zip(got.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn cauchy_function_matches_direct_solve_oracle() {
        // f = Re 1/(z0 - x) with real z0 beyond the spectrum compared against
        // the full spectral route on a 40x40 instance.
        let md = random_covariance(40, 60, 3);
        let m = match &md {
            MatrixData::Real(a) => a.clone(),
            _ => unreachable!(),
        };
        let z0 = largest_eigenvalue(&m).unwrap() + 1.0;
        let f = TestFunction::cauchy_re(Complex64::new(z0, 0.0));
        let spectral = matrix_function_spectral(&m, &f).unwrap();
        let pairs: Vec<(usize, usize)> = (0..6).flat_map(|i| (i..6).map(move |j| (i, j))).collect();
        let direct = function_entries(&md, &f, &pairs).unwrap();
        for (&(i, j), v) in pairs.iter().zip(direct.iter()) {
            assert_abs_diff_eq!(v.re, spectral[(i, j)], epsilon = 1e-8);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn entry_routes_agree_across_families() {
        let md = random_covariance(28, 36, 4);
        let m = match &md {
            MatrixData::Real(a) => a.clone(),
            _ => unreachable!(),
        };
        let pairs: Vec<(usize, usize)> = vec![(0, 0), (0, 1), (1, 2), (3, 3)];
        let fns = [
            TestFunction::polynomial(vec![0.5, -1.0, 0.25, 0.1]).unwrap(),
            TestFunction::cauchy_im(Complex64::new(1.0, 1.5)),
            TestFunction::gaussian_bump(1.2, 0.6).unwrap(),
        ];
        for f in &fns {
            let fast = function_entries(&md, f, &pairs).unwrap();
            let full = matrix_function_spectral(&m, f).unwrap();
            for (&(i, j), v) in pairs.iter().zip(fast.iter()) {
                assert_abs_diff_eq!(v.re, full[(i, j)], epsilon = 1e-9);
                assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn resolvent_trivial_cases_and_reflection() {
        // M = 0: R(i) = -i I.
        let zero = MatrixData::Real(Array2::zeros((3, 3)));
        let r = resolvent_entries(&zero, Complex64::new(0.0, 1.0), &[(0, 0), (0, 1)]).unwrap();
        assert_abs_diff_eq!(r[0].im, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[0].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r[1].norm(), 0.0, epsilon = 1e-14);

        // M = diag(1,2), z = 3: entries 1/2 and 1.
        let m = MatrixData::Real(Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 2.0]).unwrap());
        let r = resolvent_entries(&m, Complex64::new(3.0, 0.0), &[(0, 0), (1, 1)]).unwrap();
        assert_abs_diff_eq!(r[0].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(r[1].re, 1.0, epsilon = 1e-14);

        // Reflection symmetry and the resolvent bound on a random instance.
        let md = random_covariance(30, 30, 5);
        let z = Complex64::new(1.0, 0.8);
        let pairs: Vec<(usize, usize)> =
            (0..5).flat_map(|i| (0..5).map(move |j| (i, j))).collect();
        let rz = resolvent_entries(&md, z, &pairs).unwrap();
        let rzc = resolvent_entries(&md, z.conj(), &pairs).unwrap();
        for (a, b) in rz.iter().zip(rzc.iter()) {
            assert!((a.conj() - b).norm() < 1e-12);
            assert!(a.norm() <= 1.0 / z.im.abs() + 1e-12);
        }
    }

    #[test]
    fn commute_identity_residual_is_tiny() {
        // B = 0 gives exactly zero.
        let zero = Array2::from_elem((4, 7), Complex64::new(0.0, 0.0));
        assert_eq!(
            commute_identity_residual(&zero, Complex64::new(0.0, 5.0)).unwrap(),
            0.0
        );

        // Random rectangular and square cases, imaginary and real shifts.
        let spec = EnsembleSpec {
            rows: 20,
            cols: 35,
            field: EntryField::Complex,
            entry: EntryDist::Gaussian { sigma2: 1.0 },
            truncation: None,
            seed: 5,
        };
        let b = match sample_matrix(&spec, 0).unwrap().data {
            MatrixData::Complex(a) => a.mapv(|z| z / (20f64).sqrt()),
            _ => unreachable!(),
        };
        let r = commute_identity_residual(&b, Complex64::new(0.0, 5.0)).unwrap();
        assert!(r < 1e-10, "residual {r}");

        let square = b.slice(ndarray::s![.., ..20]).to_owned();
        let norm = largest_eigenvalue(&square.dot(&conj_t(&square)).mapv(|z| z)).unwrap();
        let r = commute_identity_residual(&square, Complex64::new(norm + 1.0, 0.0)).unwrap();
        assert!(r < 1e-10, "residual {r}");
    }
}

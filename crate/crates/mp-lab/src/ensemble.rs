//! Random matrix generation: entry distributions, truncation preprocessing,
//! and assembly of the sample covariance matrix.
//!
//! Entry laws form a fixed menu with closed-form moments, so fourth cumulants
//! enter predictions exactly instead of being estimated. Sampling is
//! counter-based: trial `t` of a run draws from the ChaCha stream
//! `(seed, t)`, which makes parallel runs reproducible and independent of
//! scheduling.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use mp_core::{EntryField, MpParams};

use crate::{LabError, Result};

/// Centered entry distribution with target variance and exact moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntryDist {
    Gaussian { sigma2: f64 },
    Rademacher { sigma2: f64 },
    Uniform { sigma2: f64 },
    CenteredExponential { sigma2: f64 },
    /// Two-point law taking value `a` with probability `p` and
    /// `-a p / (1 - p)` otherwise; mean zero by construction, variance
    /// `a^2 p / (1 - p)`. The asymmetry supplies a nonzero third cumulant.
    TwoPoint { a: f64, p: f64 },
}

impl EntryDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            EntryDist::Gaussian { sigma2 }
            | EntryDist::Rademacher { sigma2 }
            | EntryDist::Uniform { sigma2 }
            | EntryDist::CenteredExponential { sigma2 } => {
                sigma2.is_finite() && *sigma2 > 0.0
            }
            EntryDist::TwoPoint { a, p } => {
                a.is_finite() && *a != 0.0 && p.is_finite() && *p > 0.0 && *p < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::InvalidEnsemble(format!(
                "bad entry distribution parameters: {self:?}"
            )))
        }
    }

    /// Entry variance `sigma^2`.
    pub fn sigma2(&self) -> f64 {
        match self {
            EntryDist::Gaussian { sigma2 }
            | EntryDist::Rademacher { sigma2 }
            | EntryDist::Uniform { sigma2 }
            | EntryDist::CenteredExponential { sigma2 } => *sigma2,
            EntryDist::TwoPoint { a, p } => a * a * p / (1.0 - p),
        }
    }

    /// Kurtosis ratio `m4 / sigma^4` of the scalar law (scale invariant).
    fn kurtosis_ratio(&self) -> f64 {
        match self {
            EntryDist::Gaussian { .. } => 3.0,
            EntryDist::Rademacher { .. } => 1.0,
            EntryDist::Uniform { .. } => 1.8,
            EntryDist::CenteredExponential { .. } => 9.0,
            EntryDist::TwoPoint { p, .. } => {
                let q = 1.0 - p;
                (q.powi(3) + p.powi(3)) / (p * q)
            }
        }
    }

    /// Fourth moment `E X^4` of the scalar law at its target variance.
    pub fn m4(&self) -> f64 {
        let v = self.sigma2();
        self.kurtosis_ratio() * v * v
    }

    /// Third cumulant (equals the third moment for centered laws).
    pub fn kappa3(&self) -> f64 {
        let v = self.sigma2();
        match self {
            EntryDist::CenteredExponential { .. } => 2.0 * v * v.sqrt(),
            EntryDist::TwoPoint { p, .. } => {
                let q = 1.0 - p;
                (1.0 - 2.0 * p) / (p * q).sqrt() * v * v.sqrt()
            }
            _ => 0.0,
        }
    }

    /// Fourth cumulant under the real-entry convention `m4 - 3 sigma^4`.
    pub fn kappa4_real(&self) -> f64 {
        let v = self.sigma2();
        (self.kurtosis_ratio() - 3.0) * v * v
    }

    /// Fourth cumulant under the complex-entry convention `m4 - 2 sigma^4`,
    /// with `m4 = E|A|^4` for i.i.d. real/imaginary components of this kind.
    pub fn kappa4_complex(&self) -> f64 {
        let v = self.sigma2();
        0.5 * (self.kurtosis_ratio() - 3.0) * v * v
    }

    /// Fourth cumulant in the convention matching the ensemble field.
    pub fn kappa4(&self, field: EntryField) -> f64 {
        match field {
            EntryField::Real => self.kappa4_real(),
            EntryField::Complex => self.kappa4_complex(),
        }
    }

    /// Draw one scalar sample with variance `component_variance`.
    fn sample_component(&self, rng: &mut ChaCha8Rng, component_variance: f64) -> f64 {
        let s = component_variance.sqrt();
        match self {
            EntryDist::Gaussian { .. } => {
                let z: f64 = StandardNormal.sample(rng);
                s * z
            }
            EntryDist::Rademacher { .. } => {
                if rng.random::<bool>() {
                    s
                } else {
                    -s
                }
            }
            EntryDist::Uniform { .. } => {
                let u: f64 = rng.random();
                (2.0 * u - 1.0) * 3.0f64.sqrt() * s
            }
            EntryDist::CenteredExponential { .. } => {
                let e: f64 = Exp1.sample(rng);
                s * (e - 1.0)
            }
            EntryDist::TwoPoint { a, p } => {
                let (alpha, beta) = two_point_values(*a, *p, component_variance);
                if rng.random::<f64>() < *p {
                    alpha
                } else {
                    beta
                }
            }
        }
    }

    /// Exact mean and variance of `clip(X, -bound, bound)` for a component of
    /// this kind with variance `component_variance`.
    fn clipped_moments(&self, component_variance: f64, bound: f64) -> (f64, f64) {
        let v = component_variance;
        let s = v.sqrt();
        match self {
            EntryDist::Gaussian { .. } => {
                let t = bound / s;
                let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let upper_tail = 0.5 * libm::erfc(t / std::f64::consts::SQRT_2);
                let inner = 1.0 - 2.0 * upper_tail;
                let var = v * (inner - 2.0 * t * phi + 2.0 * t * t * upper_tail);
                (0.0, var)
            }
            EntryDist::Rademacher { .. } => {
                let m = s.min(bound);
                (0.0, m * m)
            }
            EntryDist::Uniform { .. } => {
                let a = 3.0f64.sqrt() * s;
                if bound >= a {
                    (0.0, v)
                } else {
                    (0.0, bound * bound * (1.0 - 2.0 * bound / (3.0 * a)))
                }
            }
            EntryDist::CenteredExponential { .. } => {
                // X = s (E - 1), E ~ Exp(1); clip in E-coordinates at
                // [max(0, 1 - bound/s), 1 + bound/s].
                let lo = (1.0 - bound / s).max(0.0);
                let hi = 1.0 + bound / s;
                let e = |t: f64| (-t).exp();
                let i0 = e(lo) - e(hi);
                let i1 = (lo + 1.0) * e(lo) - (hi + 1.0) * e(hi);
                let i2 = (lo * lo + 2.0 * lo + 2.0) * e(lo) - (hi * hi + 2.0 * hi + 2.0) * e(hi);
                let p_below = 1.0 - e(lo);
                let p_above = e(hi);
                let mean = -bound * p_below + s * (i1 - i0) + bound * p_above;
                let m2 = bound * bound * (p_below + p_above) + v * (i2 - 2.0 * i1 + i0);
                (mean, m2 - mean * mean)
            }
            EntryDist::TwoPoint { a, p } => {
                let (alpha, beta) = two_point_values(*a, *p, v);
                let ca = alpha.clamp(-bound, bound);
                let cb = beta.clamp(-bound, bound);
                let mean = p * ca + (1.0 - p) * cb;
                let m2 = p * ca * ca + (1.0 - p) * cb * cb;
                (mean, m2 - mean * mean)
            }
        }
    }
}

/// Support points of the two-point law rescaled to a target variance.
fn two_point_values(a: f64, p: f64, variance: f64) -> (f64, f64) {
    let natural = a * a * p / (1.0 - p);
    let scale = (variance / natural).sqrt();
    (a * scale, -a * p / (1.0 - p) * scale)
}

/// Optional clip-recenter-rescale preprocessing; the bound is
/// `level * sqrt(N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub level: f64,
}

/// Full description of a random matrix ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    /// Number of rows `N` of the rectangular matrix (and the side of `M`).
    pub rows: usize,
    /// Number of columns `n`; the ratio `c_N = n / N` drives the law.
    pub cols: usize,
    pub field: EntryField,
    pub entry: EntryDist,
    #[serde(default)]
    pub truncation: Option<Truncation>,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(LabError::InvalidEnsemble(
                "matrix dimensions must be positive".into(),
            ));
        }
        self.entry.validate()?;
        if let Some(t) = &self.truncation {
            if !(t.level > 0.0) {
                return Err(LabError::InvalidEnsemble(
                    "truncation level must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Finite-size ratio `c_N = n / N`; predictions at finite `N` use it.
    pub fn c_n(&self) -> f64 {
        self.cols as f64 / self.rows as f64
    }

    /// Law parameters `(sigma^2, c_N)` for this ensemble.
    pub fn mp_params(&self) -> Result<MpParams> {
        Ok(MpParams::new(self.entry.sigma2(), self.c_n())?)
    }

    /// Fourth cumulant of the entry law in this field's convention.
    pub fn kappa4(&self) -> f64 {
        self.entry.kappa4(self.field)
    }
}

/// Rectangular data matrix, real or complex.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

/// A sampled rectangular matrix together with the spec that produced it.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    pub data: MatrixData,
    pub spec: EnsembleSpec,
}

/// Deterministic RNG for `(seed, stream)`; streams never overlap.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw the rectangular matrix for one trial. Entries are filled row-major
/// from the trial's own counter-derived stream, so results are bit-identical
/// across thread schedules.
pub fn sample_matrix(spec: &EnsembleSpec, stream: u64) -> Result<SampleMatrix> {
    spec.validate()?;
    let mut rng = substream_rng(spec.seed, stream);
    let (rows, cols) = (spec.rows, spec.cols);
    let data = match spec.field {
        EntryField::Real => {
            let v = spec.entry.sigma2();
            let mut buf = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                buf.push(spec.entry.sample_component(&mut rng, v));
            }
            MatrixData::Real(Array2::from_shape_vec((rows, cols), buf).expect("shape"))
        }
        EntryField::Complex => {
            // Re and Im i.i.d. with variance sigma2/2: E A^2 = 0, E|A|^2 = sigma2.
            let v = 0.5 * spec.entry.sigma2();
            let mut buf = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                let re = spec.entry.sample_component(&mut rng, v);
                let im = spec.entry.sample_component(&mut rng, v);
                buf.push(Complex64::new(re, im));
            }
            MatrixData::Complex(Array2::from_shape_vec((rows, cols), buf).expect("shape"))
        }
    };
    Ok(SampleMatrix {
        data,
        spec: spec.clone(),
    })
}

/// Clip entries to `[-level sqrt(N), level sqrt(N)]` (complex: per
/// component), then recenter and rescale with the clipped law's exact
/// moments so the output law keeps mean zero and variance `sigma^2`.
pub fn truncate_entries(m: &SampleMatrix, level: f64) -> Result<SampleMatrix> {
    if !(level > 0.0) {
        return Err(LabError::InvalidEnsemble(
            "truncation level must be positive".into(),
        ));
    }
    let bound = level * (m.spec.rows as f64).sqrt();
    let spec = &m.spec;
    let component_variance = match spec.field {
        EntryField::Real => spec.entry.sigma2(),
        EntryField::Complex => 0.5 * spec.entry.sigma2(),
    };
    let (mean, var) = spec.entry.clipped_moments(component_variance, bound);
    if !(var > f64::MIN_POSITIVE) {
        return Err(LabError::DegenerateTruncation);
    }
    let scale = (component_variance / var).sqrt();
    let transform = |x: f64| (x.clamp(-bound, bound) - mean) * scale;

    let data = match &m.data {
        MatrixData::Real(a) => MatrixData::Real(a.mapv(transform)),
        MatrixData::Complex(a) => MatrixData::Complex(
            a.mapv(|z| Complex64::new(transform(z.re), transform(z.im))),
        ),
    };
    Ok(SampleMatrix {
        data,
        spec: spec.clone(),
    })
}

/// Assemble `M = (1/N) A A^*`, symmetrized so self-adjointness is exact.
pub fn form_covariance(m: &SampleMatrix) -> MatrixData {
    let n_inv = 1.0 / m.spec.rows as f64;
    match &m.data {
        MatrixData::Real(a) => {
            let mut out = a.dot(&a.t());
            out *= n_inv;
            symmetrize_real(&mut out);
            MatrixData::Real(out)
        }
        MatrixData::Complex(a) => {
            let adj = a.t().mapv(|z| z.conj());
            let mut out = a.dot(&adj);
            out.mapv_inplace(|z| z * n_inv);
            hermitize(&mut out);
            MatrixData::Complex(out)
        }
    }
}

fn symmetrize_real(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn hermitize(m: &mut Array2<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

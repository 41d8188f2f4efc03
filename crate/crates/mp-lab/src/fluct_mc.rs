//! Monte-Carlo harness for the two fluctuation objects under study:
//! sqrt(N)-normalized entries of `f(M)` and the resolvent corner field
//! `Ψ_N(z) = sqrt(N) (R^{(m)}(z) - g(z) I)`.
//!
//! Trials are independent units of work on counter-derived RNG substreams;
//! batches are assembled by trial index, so the stored data is bit-identical
//! no matter how many workers ran them.

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use mp_core::{mp_expect, stieltjes_g, TestFunction};

use crate::ensemble::{form_covariance, sample_matrix, truncate_entries, EnsembleSpec, SampleMatrix};
use crate::funcalc::{function_entries, shifted};
use crate::{LabError, Result};

/// How the raw entry values are centered before sqrt(N)-scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract the across-trials mean per pair; unbiased at any size.
    #[default]
    Empirical,
    /// Subtract `δ_ij ∫ f dμ_{σ, c_N}`, the deterministic limit centering.
    Analytic,
}

/// Tolerated fraction of failed eigensolves (per mille).
const FAILURE_TOLERANCE_PER_MILLE: usize = 1;

/// Samples of `sqrt(N) (f(M)_ij - center_ij)`, one column per index pair.
#[derive(Debug, Clone)]
pub struct FluctuationBatch {
    pub spec: EnsembleSpec,
    pub function: TestFunction,
    /// 0-based index pairs, each with `i <= j`.
    pub pairs: Vec<(usize, usize)>,
    pub centering: Centering,
    /// Number of retained trials (failed eigensolves are dropped, counted).
    pub trials: usize,
    pub failed_trials: usize,
    /// `samples[pair][trial]`.
    pub samples: Vec<Vec<Complex64>>,
}

impl FluctuationBatch {
    pub fn pair_label(&self, idx: usize) -> String {
        let (i, j) = self.pairs[idx];
        format!("e{}_{}", i + 1, j + 1)
    }

    /// Real coordinates of one pair's samples.
    pub fn coordinate(&self, pair_idx: usize, imaginary: bool) -> Vec<f64> {
        self.samples[pair_idx]
            .iter()
            .map(|z| if imaginary { z.im } else { z.re })
            .collect()
    }
}

/// Check and normalize an index-pair list against the ensemble.
fn validate_pairs(spec: &EnsembleSpec, pairs: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    if pairs.is_empty() {
        return Err(LabError::InvalidRequest("no index pairs requested".into()));
    }
    let cap = spec.rows.min(32);
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        if i > j {
            return Err(LabError::InvalidRequest(format!(
                "pair ({i}, {j}) must have i <= j"
            )));
        }
        if j >= cap {
            return Err(LabError::InvalidRequest(format!(
                "pair index {j} exceeds the corner limit min(N, 32) = {cap}"
            )));
        }
        out.push((i, j));
    }
    Ok(out)
}

fn prepared_sample(spec: &EnsembleSpec, stream: u64) -> Result<SampleMatrix> {
    let sm = sample_matrix(spec, stream)?;
    match spec.truncation {
        Some(t) => truncate_entries(&sm, t.level),
        None => Ok(sm),
    }
}

fn collect_trials<T: Send>(
    trials: usize,
    run: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<(Vec<T>, usize)> {
    crate::blas::single_threaded_blas();
    let raw: Vec<Result<T>> = (0..trials as u64).into_par_iter().map(run).collect();
    let total = raw.len();
    let mut ok = Vec::with_capacity(total);
    let mut failed = 0usize;
    let mut first_error: Option<LabError> = None;
    for r in raw {
        match r {
            Ok(v) => ok.push(v),
            Err(e @ (LabError::InvalidRequest(_) | LabError::InvalidEnsemble(_)))
            | Err(e @ LabError::Core(_))
            | Err(e @ LabError::DegenerateTruncation) => {
                // Deterministic precondition problems abort the run outright.
                return Err(e);
            }
            Err(e) => {
                failed += 1;
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    let tolerated = total * FAILURE_TOLERANCE_PER_MILLE / 1000;
    if failed > tolerated {
        return Err(LabError::TooManyFailedTrials {
            failed,
            total,
            tolerated,
        });
    }
    Ok((ok, failed))
}

/// Monte-Carlo samples of normalized entries of `f(M)`.
pub fn run_entry_fluctuations(
    spec: &EnsembleSpec,
    f: &TestFunction,
    pairs: &[(usize, usize)],
    trials: usize,
    centering: Centering,
) -> Result<FluctuationBatch> {
    spec.validate()?;
    if trials < 100 {
        return Err(LabError::InvalidRequest(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    let pairs = validate_pairs(spec, pairs)?;
    let p = spec.mp_params()?;
    f.validate(&p)?;

    let (per_trial, failed_trials) = collect_trials(trials, |t| {
        let sm = prepared_sample(spec, t)?;
        trial_entry_values(&sm, f, &pairs)
    })?;

    let kept = per_trial.len();
    let sqrt_n = (spec.rows as f64).sqrt();
    let mut samples = vec![vec![Complex64::new(0.0, 0.0); kept]; pairs.len()];
    for (t, row) in per_trial.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            samples[k][t] = v;
        }
    }

    match centering {
        Centering::Empirical => {
            for column in samples.iter_mut() {
                let mean = column.iter().sum::<Complex64>() / kept as f64;
                for v in column.iter_mut() {
                    *v = (*v - mean) * sqrt_n;
                }
            }
        }
        Centering::Analytic => {
            let expect = mp_expect(f, &p)?;
            for (k, column) in samples.iter_mut().enumerate() {
                let (i, j) = pairs[k];
                let center = if i == j {
                    Complex64::new(expect, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                for v in column.iter_mut() {
                    *v = (*v - center) * sqrt_n;
                }
            }
        }
    }

    Ok(FluctuationBatch {
        spec: spec.clone(),
        function: f.clone(),
        pairs,
        centering,
        trials: kept,
        failed_trials,
        samples,
    })
}

fn trial_entry_values(
    sm: &SampleMatrix,
    f: &TestFunction,
    pairs: &[(usize, usize)],
) -> Result<Vec<Complex64>> {
    // Affine functions only need inner products of rows of the rectangle;
    // skip the covariance assembly entirely.
    if let TestFunction::Polynomial { coeffs } = f {
        if coeffs.len() <= 2 {
            let c0 = coeffs[0];
            let c1 = coeffs.get(1).copied().unwrap_or(0.0);
            let n_inv = 1.0 / sm.spec.rows as f64;
            return Ok(pairs
                .iter()
                .map(|&(i, j)| {
                    let dot = match &sm.data {
                        crate::ensemble::MatrixData::Real(a) => {
                            let ri = a.row(i);
                            let rj = a.row(j);
                            Complex64::new(ri.dot(&rj) * n_inv, 0.0)
                        }
                        crate::ensemble::MatrixData::Complex(a) => {
                            let ri = a.row(i);
                            let rj = a.row(j);
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (x, y) in ri.iter().zip(rj.iter()) {
                                acc += x * y.conj();
                            }
                            acc * n_inv
                        }
                    };
                    dot * c1 + if i == j { c0 } else { 0.0 }
                })
                .collect());
        }
    }
    let m = form_covariance(sm);
    function_entries(&m, f, pairs)
}

/// Resolvent corner samples `Ψ_N(z)` per point and upper-triangle entry.
#[derive(Debug, Clone)]
pub struct ResolventFieldBatch {
    pub spec: EnsembleSpec,
    pub points: Vec<Complex64>,
    pub corner: usize,
    pub trials: usize,
    pub failed_trials: usize,
    /// Targets in order: for each point, all `(i, j)` with `i <= j < corner`.
    pub targets: Vec<(usize, usize, usize)>,
    /// `samples[target][trial]`.
    pub samples: Vec<Vec<Complex64>>,
}

impl ResolventFieldBatch {
    pub fn target_index(&self, point_idx: usize, i: usize, j: usize) -> Option<usize> {
        self.targets
            .iter()
            .position(|&t| t == (point_idx, i, j))
    }

    pub fn samples_for(&self, point_idx: usize, i: usize, j: usize) -> Option<&[Complex64]> {
        self.target_index(point_idx, i, j)
            .map(|k| self.samples[k].as_slice())
    }

    pub fn target_label(&self, idx: usize) -> String {
        let (p, i, j) = self.targets[idx];
        format!("r{}_{}@p{}", i + 1, j + 1, p + 1)
    }
}

/// Monte-Carlo samples of the resolvent field at the given points.
pub fn run_resolvent_field(
    spec: &EnsembleSpec,
    points: &[Complex64],
    corner: usize,
    trials: usize,
) -> Result<ResolventFieldBatch> {
    spec.validate()?;
    if points.is_empty() {
        return Err(LabError::InvalidRequest("no resolvent points given".into()));
    }
    if corner == 0 || corner > 8 || corner > spec.rows {
        return Err(LabError::InvalidRequest(format!(
            "corner size {corner} outside 1..=min(8, N)"
        )));
    }
    let p = spec.mp_params()?;
    for &z in points {
        let dist = if (0.0..=p.edge_upper()).contains(&z.re) {
            z.im.abs()
        } else {
            let dx = if z.re < 0.0 {
                -z.re
            } else {
                z.re - p.edge_upper()
            };
            (dx * dx + z.im * z.im).sqrt()
        };
        if dist < 0.1 {
            return Err(LabError::InvalidRequest(format!(
                "point {z} within margin 0.1 of the support [0, {}]",
                p.edge_upper()
            )));
        }
    }

    let centers: Vec<Complex64> = points
        .iter()
        .map(|&z| stieltjes_g(z, &p).map_err(LabError::from))
        .collect::<Result<_>>()?;

    let mut targets = Vec::new();
    for pt in 0..points.len() {
        for i in 0..corner {
            for j in i..corner {
                targets.push((pt, i, j));
            }
        }
    }

    let sqrt_n = (spec.rows as f64).sqrt();
    let points_owned = points.to_vec();
    let (per_trial, failed_trials) = collect_trials(trials, |t| {
        let sm = prepared_sample(spec, t)?;
        let m = form_covariance(&sm);
        let mut out = Vec::with_capacity(targets.len());
        for (pt, &z) in points_owned.iter().enumerate() {
            let shifted_m = shifted(&m, z);
            use ndarray_linalg::{Factorize, Solve};
            let lu = shifted_m.factorize()?;
            let n = spec.rows;
            let mut corner_cols: Vec<Array1<Complex64>> = Vec::with_capacity(corner);
            for j in 0..corner {
                let mut e = Array1::from_elem(n, Complex64::new(0.0, 0.0));
                e[j] = Complex64::new(1.0, 0.0);
                corner_cols.push(lu.solve(&e)?);
            }
            for i in 0..corner {
                for j in i..corner {
                    let r_ij = corner_cols[j][i];
                    let center = if i == j {
                        centers[pt]
                    } else {
                        Complex64::new(0.0, 0.0)
                    };
                    out.push((r_ij - center) * sqrt_n);
                }
            }
        }
        Ok(out)
    })?;

    let kept = per_trial.len();
    let mut samples = vec![vec![Complex64::new(0.0, 0.0); kept]; targets.len()];
    for (t, row) in per_trial.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            samples[k][t] = v;
        }
    }

    Ok(ResolventFieldBatch {
        spec: spec.clone(),
        points: points_owned,
        corner,
        trials: kept,
        failed_trials,
        targets,
        samples,
    })
}

/// One row of the resolvent decay table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayRow {
    pub n: usize,
    pub c_n: f64,
    /// `|empirical mean of R_11(z) - g_{σ, c_N}(z)|`.
    pub bias: f64,
    /// `E |R_11 - mean|^2` over trials.
    pub variance: f64,
    pub n_times_variance: f64,
    /// Standard error of the mean estimate (per complex component scale).
    pub standard_error: f64,
}

/// Empirical bias and variance of `R_11(z)` across a family of sizes with
/// the ratio `c` held fixed; rate inspection for the 1/N claims.
pub fn resolvent_decay_probe(
    template: &EnsembleSpec,
    sizes: &[usize],
    z: Complex64,
    trials: usize,
) -> Result<Vec<DecayRow>> {
    if z.im.abs() < 0.5 {
        return Err(LabError::InvalidRequest(
            "decay probe needs Im z >= 0.5".into(),
        ));
    }
    let ratio = template.c_n();
    let mut rows = Vec::with_capacity(sizes.len());
    for (idx, &n) in sizes.iter().enumerate() {
        let mut spec = template.clone();
        spec.rows = n;
        spec.cols = (ratio * n as f64).round() as usize;
        let p = spec.mp_params()?;
        let g = stieltjes_g(z, &p)?;

        let base = (idx as u64) << 40;
        let (vals, _failed) = collect_trials(trials, |t| {
            let sm = prepared_sample(&spec, base | t)?;
            let m = form_covariance(&sm);
            use ndarray_linalg::{Factorize, Solve};
            let lu = shifted(&m, z).factorize()?;
            let mut e = Array1::from_elem(spec.rows, Complex64::new(0.0, 0.0));
            e[0] = Complex64::new(1.0, 0.0);
            Ok(lu.solve(&e)?[0])
        })?;

        let kept = vals.len() as f64;
        let mean = vals.iter().sum::<Complex64>() / kept;
        let variance = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / kept;
        rows.push(DecayRow {
            n,
            c_n: spec.c_n(),
            bias: (mean - g).norm(),
            variance,
            n_times_variance: n as f64 * variance,
            standard_error: (variance / kept).sqrt(),
        });
    }
    Ok(rows)
}

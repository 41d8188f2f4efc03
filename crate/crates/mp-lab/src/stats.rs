//! Estimators and tests confronting Monte-Carlo batches with predictions.
//!
//! Every function here is a pure map from (samples, prediction, config) to a
//! report. Stochastic pass bands are sized so a correct implementation fails
//! spuriously well under 1% of the time at the default trial counts.

use num_complex::Complex64;
use serde::Serialize;

use mp_core::CovBlock2;

use crate::{LabError, Result};

/// Sample variance comparison against a predicted limit.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub id: String,
    pub trials: usize,
    pub estimate: f64,
    /// Normal-approximation 95% interval for the variance estimate.
    pub ci95: (f64, f64),
    pub predicted: f64,
    /// `estimate / predicted` (infinite for zero prediction with signal).
    pub ratio: f64,
    pub pass: bool,
}

/// Unbiased sample variance (mean subtracted).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Sample mean.
pub fn sample_mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Compare a sample variance against its predicted limit.
///
/// The pass band combines the requested relative band with the estimator's
/// own 95% half-width; near-zero predictions are judged in absolute terms
/// (`estimate <= 1e-3 · max(1, |predicted|)`).
pub fn variance_test(
    id: &str,
    samples: &[f64],
    predicted: f64,
    rel_band: f64,
) -> Result<VarianceReport> {
    let trials = samples.len();
    if trials < 100 {
        return Err(LabError::InvalidRequest(format!(
            "variance test needs at least 100 samples, got {trials}"
        )));
    }
    let estimate = sample_variance(samples);
    let half = 1.96 * (2.0 / (trials as f64 - 1.0)).sqrt();
    let ci95 = ((estimate * (1.0 - half)).max(0.0), estimate * (1.0 + half));

    let near_zero = predicted.abs() <= 1e-9;
    let pass = if near_zero {
        estimate.abs() <= 1e-3
    } else {
        let band = rel_band + half;
        predicted >= estimate * (1.0 - band) && predicted <= estimate * (1.0 + band)
    };
    let ratio = if near_zero {
        if estimate.abs() <= 1e-12 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        estimate / predicted
    };
    Ok(VarianceReport {
        id: id.to_string(),
        trials,
        estimate,
        ci95,
        predicted,
        ratio,
        pass,
    })
}

/// One-sample Kolmogorov-Smirnov result against a centered Gaussian.
#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    pub id: String,
    pub n: usize,
    pub ks_statistic: f64,
    pub p_value: f64,
    pub variance_used: f64,
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Kolmogorov-Smirnov statistic of `sorted` against a distribution function.
pub fn ks_statistic_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - k as f64 / n);
        d = d.max((k as f64 + 1.0) / n - f);
    }
    d
}

/// Asymptotic KS tail probability `P(sqrt(n) D > t)` by the alternating
/// series, 20 terms, clamped into `[0, 1]`.
pub fn ks_p_value(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for k in 1..=20 {
        let k = k as f64;
        let term = (-2.0 * k * k * t * t).exp();
        acc += if (k as usize) % 2 == 1 { term } else { -term };
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// KS goodness-of-fit of samples against `N(0, variance)`.
pub fn ks_gaussian_test(id: &str, samples: &[f64], variance: f64) -> Result<GofReport> {
    if !(variance > 0.0) {
        return Err(LabError::InvalidRequest(
            "KS test needs a positive reference variance".into(),
        ));
    }
    if samples.len() < 500 {
        return Err(LabError::InvalidRequest(format!(
            "KS test needs at least 500 samples, got {}",
            samples.len()
        )));
    }
    let sd = variance.sqrt();
    let mut sorted: Vec<f64> = samples.iter().map(|x| x / sd).collect();
    sorted.sort_by(f64::total_cmp);
    let d = ks_statistic_sorted(&sorted, normal_cdf);
    let p = ks_p_value((samples.len() as f64).sqrt() * d);
    Ok(GofReport {
        id: id.to_string(),
        n: samples.len(),
        ks_statistic: d,
        p_value: p,
        variance_used: variance,
    })
}

/// Cross-pair correlation check.
#[derive(Debug, Clone, Serialize)]
pub struct IndependenceReport {
    pub id: String,
    /// Absent when the check does not apply (identical targets or a
    /// zero-variance margin).
    pub correlation: Option<f64>,
    pub threshold: f64,
    pub applicable: bool,
    pub pass: bool,
}

/// Sample correlation between two fluctuation columns; guards degenerate
/// inputs by marking the report not-applicable.
pub fn independence_test(
    id_a: &str,
    id_b: &str,
    a: &[f64],
    b: &[f64],
    threshold: f64,
) -> IndependenceReport {
    let id = format!("{id_a}~{id_b}");
    if id_a == id_b || a.len() != b.len() || a.len() < 3 {
        return IndependenceReport {
            id,
            correlation: None,
            threshold,
            applicable: false,
            pass: true,
        };
    }
    let ma = sample_mean(a);
    let mb = sample_mean(b);
    let mut saa = 0.0;
    let mut sbb = 0.0;
    let mut sab = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = x - ma;
        let dy = y - mb;
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return IndependenceReport {
            id,
            correlation: None,
            threshold,
            applicable: false,
            pass: true,
        };
    }
    let corr = sab / (saa * sbb).sqrt();
    IndependenceReport {
        id,
        correlation: Some(corr),
        threshold,
        applicable: true,
        pass: corr.abs() <= threshold,
    }
}

/// Empirical-vs-predicted 2x2 covariance block comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CovBlockReport {
    pub id: String,
    pub trials: usize,
    pub empirical: CovBlock2,
    pub predicted: CovBlock2,
    /// Largest elementwise deviation in units of its own tolerance.
    pub worst_deviation: f64,
    pub rel_band: f64,
    pub pass: bool,
}

/// Empirical cross-covariance of the `(Re, Im)` coordinates of two complex
/// sample columns (sample means subtracted, `1/(T-1)` normalization).
pub fn empirical_cov_block(u: &[Complex64], v: &[Complex64]) -> CovBlock2 {
    let t = u.len() as f64;
    let mu = u.iter().sum::<Complex64>() / t;
    let mv = v.iter().sum::<Complex64>() / t;
    let mut m = [[0.0f64; 2]; 2];
    for (a, b) in u.iter().zip(v.iter()) {
        let da = a - mu;
        let db = b - mv;
        m[0][0] += da.re * db.re;
        m[0][1] += da.re * db.im;
        m[1][0] += da.im * db.re;
        m[1][1] += da.im * db.im;
    }
    for row in m.iter_mut() {
        for x in row.iter_mut() {
            *x /= t - 1.0;
        }
    }
    CovBlock2(m)
}

/// Compare an empirical block against a prediction, elementwise.
///
/// Each element's tolerance is `rel_band * max(|predicted_el|, 0.5 * scale)`
/// where `scale` is the largest predicted magnitude in the block, so
/// near-zero elements get an absolute band proportional to the block scale.
pub fn covariance_block_test(
    id: &str,
    u: &[Complex64],
    v: &[Complex64],
    predicted: CovBlock2,
    rel_band: f64,
) -> Result<CovBlockReport> {
    let trials = u.len();
    if trials < 1000 {
        return Err(LabError::InvalidRequest(format!(
            "covariance block test needs at least 1000 trials, got {trials}"
        )));
    }
    if u.len() != v.len() {
        return Err(LabError::InvalidRequest(
            "covariance block test needs aligned sample columns".into(),
        ));
    }
    let empirical = empirical_cov_block(u, v);
    let scale = predicted.max_abs();
    let mut worst = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            let tol = if scale > 0.0 {
                rel_band * predicted.get(r, c).abs().max(0.5 * scale)
            } else {
                rel_band
            };
            let dev = (empirical.get(r, c) - predicted.get(r, c)).abs() / tol;
            worst = worst.max(dev);
        }
    }
    Ok(CovBlockReport {
        id: id.to_string(),
        trials,
        empirical,
        predicted,
        worst_deviation: worst,
        rel_band,
        pass: worst <= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::substream_rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_draws(seed: u64, stream: u64, n: usize, sd: f64) -> Vec<f64> {
        let mut rng = substream_rng(seed, stream);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect()
    }

    #[test]
    fn ks_null_calibration() {
        // 100 repetitions of 5000 N(0,1) draws vs variance 1: p > 0.01 in at
        // least 98 of them.
        let mut hits = 0;
        for rep in 0..100 {
            let xs = normal_draws(1234, rep, 5000, 1.0);
            let r = ks_gaussian_test("cal", &xs, 1.0).unwrap();
            if r.p_value > 0.01 {
                hits += 1;
            }
        }
        assert!(hits >= 98, "only {hits}/100 null cases passed");
    }

    #[test]
    fn ks_power_against_wrong_variance() {
        let xs = normal_draws(99, 0, 5000, 1.0);
        let r = ks_gaussian_test("pow", &xs, 4.0).unwrap();
        assert!(r.p_value < 0.01, "p = {}", r.p_value);
    }

    #[test]
    fn ks_point_mass_statistic_is_half() {
        let xs = vec![0.0; 600];
        let r = ks_gaussian_test("pm", &xs, 1.0).unwrap();
        assert_abs_diff_eq!(r.ks_statistic, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ks_rejects_bad_inputs() {
        let xs = vec![0.0; 600];
        assert!(ks_gaussian_test("bad", &xs, 0.0).is_err());
        assert!(ks_gaussian_test("bad", &xs[..100], 1.0).is_err());
    }

    #[test]
    fn variance_ci_coverage_on_synthetic_batches() {
        // 95% CI should contain the truth in at least 90 of 100 repetitions.
        let mut hits = 0;
        for rep in 0..100 {
            let xs = normal_draws(777, rep, 2000, 2.0);
            let r = variance_test("cov", &xs, 4.0, 0.0).unwrap();
            if r.ci95.0 <= 4.0 && 4.0 <= r.ci95.1 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "coverage {hits}/100");
    }

    #[test]
    fn variance_test_pass_and_fail_bands() {
        let xs = normal_draws(42, 0, 4000, 1.0);
        let ok = variance_test("v", &xs, 1.0, 0.1).unwrap();
        assert!(ok.pass, "ratio {}", ok.ratio);
        // A doubled prediction must be rejected at the same band.
        let bad = variance_test("v2", &xs, 2.0, 0.1).unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn variance_test_zero_prediction_branch() {
        let zeros = vec![0.0; 500];
        let r = variance_test("z", &zeros, 0.0, 0.1).unwrap();
        assert!(r.pass);
        // Degenerate samples against a nonzero prediction: a fail report,
        // not an error.
        let r = variance_test("z2", &zeros, 1.0, 0.1).unwrap();
        assert!(!r.pass);
        // Real signal against a zero prediction fails the absolute band.
        let xs = normal_draws(5, 0, 500, 1.0);
        let r = variance_test("z3", &xs, 0.0, 0.1).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn independence_null_calibration_and_guards() {
        let mut hits = 0;
        for rep in 0..100 {
            let a = normal_draws(1000, 2 * rep, 4000, 1.0);
            let b = normal_draws(1000, 2 * rep + 1, 4000, 1.0);
            let r = independence_test("a", "b", &a, &b, 0.1);
            if r.pass {
                hits += 1;
            }
        }
        assert!(hits >= 99, "null independence {hits}/100");

        let a = normal_draws(1, 0, 100, 1.0);
        let same = independence_test("a", "a", &a, &a, 0.1);
        assert!(!same.applicable);
        let flat = vec![1.0; 100];
        let degenerate = independence_test("a", "b", &a, &flat, 0.1);
        assert!(!degenerate.applicable);
    }

    #[test]
    fn independence_detects_strong_coupling() {
        let a = normal_draws(2, 0, 4000, 1.0);
        let b: Vec<f64> = a.iter().map(|x| 0.8 * x).collect();
        let r = independence_test("a", "b", &a, &b, 0.1);
        assert!(r.applicable && !r.pass);
    }

    #[test]
    fn covariance_block_on_synthetic_complex_gaussians() {
        // u with iid re/im of variance 1/2 (so E u ubar = 1), v = u: the
        // (Re, Im) block is diag(1/2, 1/2).
        let t = 4000;
        let mut rng = substream_rng(31, 0);
        let u: Vec<Complex64> = (0..t)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let predicted = CovBlock2([[0.5, 0.0], [0.0, 0.5]]);
        let r = covariance_block_test("self", &u, &u, predicted, 0.15).unwrap();
        assert!(r.pass, "worst deviation {}", r.worst_deviation);

        let wrong = CovBlock2([[1.0, 0.0], [0.0, 1.0]]);
        let r = covariance_block_test("wrong", &u, &u, wrong, 0.15).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn covariance_block_requires_enough_trials() {
        let u = vec![Complex64::new(0.0, 0.0); 10];
        assert!(covariance_block_test("few", &u, &u, CovBlock2([[0.0; 2]; 2]), 0.15).is_err());
    }
}

//! Least squares, rank-size fits and paired tests.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::StatsError;
use crate::num::Real;

/// Simple linear regression of `y` on `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Two-sided p-value of the slope against zero.
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided Student-t tail probability.
fn two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

pub fn ols<S: Real>(x: &[S], y: &[S]) -> Result<OlsFit, StatsError> {
    let n = x.len().min(y.len());
    if n < 3 {
        return Err(StatsError::InsufficientSample { needed: 3, got: n });
    }
    let x: Vec<f64> = x[..n].iter().map(|v| v.as_f64()).collect();
    let y: Vec<f64> = y[..n].iter().map(|v| v.as_f64()).collect();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * nf * mx.abs().max(1.0) {
        return Err(StatsError::DegenerateSample("regressor has no variation"));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let df = nf - 2.0;
    let slope_stderr = (sse / df / sxx).sqrt();
    let t = if slope_stderr > 0.0 { slope / slope_stderr } else { f64::INFINITY.copysign(slope) };
    let p_value = if slope == 0.0 && slope_stderr == 0.0 { 1.0 } else { two_sided_p(t, df) };
    Ok(OlsFit { slope, intercept, slope_stderr, p_value, n })
}

/// Tail exponent from a rank-size regression.
///
/// Sizes are sorted in decreasing order and `ln(rank)` is regressed on
/// `ln(size)` over the upper half of the sample; the exponent is the slope
/// magnitude. A Pareto tail `P(X > x) ~ x^-a` yields `a`.
pub fn zipf_exponent<S: Real>(sizes: &[S]) -> Result<f64, StatsError> {
    const MIN_SAMPLE: usize = 30;
    if sizes.len() < MIN_SAMPLE {
        return Err(StatsError::InsufficientSample { needed: MIN_SAMPLE, got: sizes.len() });
    }
    let mut s: Vec<f64> = sizes.iter().map(|v| v.as_f64()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    if s.first() == s.last() {
        return Err(StatsError::DegenerateSample("all sizes are equal"));
    }
    let upper = &s[..s.len() / 2];
    let (lx, ly): (Vec<f64>, Vec<f64>) = upper
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (v.ln(), ((i + 1) as f64).ln()))
        .unzip();
    let fit = ols(&lx, &ly).map_err(|e| match e {
        StatsError::DegenerateSample(_) => StatsError::DegenerateSample("upper half has a single size"),
        other => other,
    })?;
    Ok(fit.slope.abs())
}

/// Mean, standard error and two-sided p-value of paired differences `a - b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub stderr: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest, StatsError> {
    let n = a.len().min(b.len());
    if n < 2 {
        return Err(StatsError::InsufficientSample { needed: 2, got: n });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, se) = mean_stderr(&d);
    let se = se.unwrap_or(0.0);
    let p_value = if se == 0.0 {
        if mean == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        two_sided_p(mean / se, (n - 1) as f64)
    };
    Ok(PairedTest { mean_diff: mean, stderr: se, p_value, n })
}

/// Sample mean and standard error; the error is undefined below two values.
pub fn mean_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}

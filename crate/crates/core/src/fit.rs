//! Least-squares fits of decay laws on log scales.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayModel {
    /// `y ≈ A e^{-rate t}`; reports `rate`.
    Exponential,
    /// `y ≈ A t^{exponent}`; reports `exponent`.
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub value: f64,
    /// Root-mean-square residual of the log-space fit.
    pub residual: f64,
    /// Standard error of `value`.
    pub stderr: f64,
    pub intercept: f64,
}

pub const MIN_SAMPLES: usize = 8;

/// Ordinary least squares `y = a + b x`; returns `(a, b, rms, stderr_b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Shape { expected: n, got: y.len() });
    }
    if n < 3 {
        return Err(Error::Fit(format!("{n} samples")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let rms = (ssr / nf).sqrt();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok((a, b, rms, stderr))
}

pub fn fit_decay(t: &[f64], y: &[f64], model: DecayModel) -> Result<DecayFit> {
    if t.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!("need at least {MIN_SAMPLES} samples, got {}", t.len())));
    }
    if let Some(v) = y.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Fit(format!("nonpositive or non-finite value {v}")));
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (x, sign) = match model {
        DecayModel::Exponential => (t.to_vec(), -1.0),
        DecayModel::Power => {
            if t.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Fit("power fit needs positive times".into()));
            }
            (t.iter().map(|v| v.ln()).collect(), 1.0)
        }
    };
    let (a, b, rms, se) = linear_fit(&x, &ly)?;
    Ok(DecayFit {
        value: sign * b,
        residual: rms,
        stderr: se,
        intercept: a,
    })
}

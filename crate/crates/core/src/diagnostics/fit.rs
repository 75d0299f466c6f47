//! Least-squares power-law fits in `log(1 + t)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_POINTS: usize = 8;

/// `log(value) ≈ intercept + exponent · log(1 + t)` over `window`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// RMS of the log-log residuals.
    pub residual_rms: f64,
    pub points: usize,
}

/// Fits the samples of `series` whose time lies in `window` (inclusive).
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t0 <= t1) {
        return Err(invalid(format!("empty fit window [{t0}, {t1}]")));
    }
    let tol = 1e-9 * (1.0 + t1.abs());
    let inside: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= t0 - tol && t <= t1 + tol).collect();
    if inside.len() < MIN_FIT_POINTS {
        return Err(invalid(format!("decay fit needs at least {MIN_FIT_POINTS} points in [{t0}, {t1}], found {}", inside.len())));
    }
    if let Some(&(t, v)) = inside.iter().find(|&&(_, v)| !(v > 0.0) || !v.is_finite()) {
        return Err(LabError::Domain(format!("decay fit needs positive values; got {v} at t = {t}")));
    }
    let xs: Vec<f64> = inside.iter().map(|&(t, _)| (1.0 + t).ln()).collect();
    let ys: Vec<f64> = inside.iter().map(|&(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("decay fit needs at least two distinct times"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual_rms = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum::<f64>() / m).sqrt();
    Ok(DecayFit { exponent, intercept, window, residual_rms, points: inside.len() })
}

/// Default window `[t_end/10, t_end]`.
pub fn default_window(t_end: f64) -> (f64, f64) {
    (0.1 * t_end, t_end)
}

/// `max / median` of the values with time in `window`; the boundedness test
/// used wherever an inequality has no explicit constant.
pub fn excursion_ratio(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let tol = 1e-9 * (1.0 + window.1.abs());
    let mut vals: Vec<f64> = series.iter().filter(|&&(t, _)| t >= window.0 - tol && t <= window.1 + tol).map(|&(_, v)| v).collect();
    if vals.is_empty() {
        return Err(invalid("no samples inside the window"));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("excursion series"));
    }
    vals.sort_by(f64::total_cmp);
    let k = vals.len();
    let median = if k % 2 == 1 { vals[k / 2] } else { 0.5 * (vals[k / 2 - 1] + vals[k / 2]) };
    let max = vals[k - 1];
    if median == 0.0 {
        return Ok(if max == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(max / median)
}

//! The kernel-decay integral `I_n(x) = ∫_{ℝⁿ} dy / (|y|^{n−1}(1 + |x + y|)ⁿ)`.
//!
//! In polar coordinates around the origin the `|y|^{n−1}` factor cancels the
//! Jacobian, leaving a smooth radial integral of an angular average. The
//! radial range is split at `|y| = 2|x|/3` and `|y| = 2|x|`: inner, shell and
//! outer contributions are reported separately.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::quadrature::{integrate_to_infinity, integrate_with_breaks, Tolerance};

/// Contributions of the three radial regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayIntegral {
    pub n: usize,
    pub x_norm: f64,
    /// `|y| ≤ 2|x|/3`.
    pub inner: f64,
    /// `2|x|/3 < |y| < 2|x|`.
    pub shell: f64,
    /// `|y| ≥ 2|x|`.
    pub outer: f64,
}

impl DecayIntegral {
    pub fn total(&self) -> f64 {
        self.inner + self.shell + self.outer
    }
}

fn tolerance() -> Tolerance {
    Tolerance { abs: 1e-13, rel: 1e-11, max_intervals: 2000 }
}

/// Angular integral `∫_{S^{n−1}} (1 + |x + rω|)^{−n} dω` for `|x| = a`.
fn angular(n: usize, a: f64, r: f64) -> f64 {
    let tol = tolerance();
    // Distance from −x at polar angle θ measured from −x̂.
    let d = |c: f64| (a * a + r * r - 2.0 * a * r * c).max(0.0).sqrt();
    match n {
        2 => {
            // 2∫₀^π dθ, sharply peaked at θ = 0 when r ≈ a ≫ 1.
            let f = |theta: f64| (1.0 + d(theta.cos())).powi(-2);
            let scale = if a * r > 0.0 { 1.0 / (a * r).sqrt() } else { 1.0 };
            let breaks = [scale, 4.0 * scale, 16.0 * scale, 64.0 * scale];
            2.0 * integrate_with_breaks(f, 0.0, PI, &breaks, tol).value
        }
        3 => {
            // 2π∫_{−1}^{1} dc, peaked at c = 1.
            let f = |c: f64| (1.0 + d(c)).powi(-3);
            let scale = if a * r > 0.0 { 1.0 / (a * r) } else { 1.0 };
            let breaks = [1.0 - 64.0 * scale, 1.0 - 16.0 * scale, 1.0 - 4.0 * scale, 1.0 - scale];
            2.0 * PI * integrate_with_breaks(f, -1.0, 1.0, &breaks, tol).value
        }
        _ => f64::NAN,
    }
}

/// `I_n(x)` for `n ∈ {2, 3}` by nested adaptive quadrature.
pub fn kernel_decay_integral(n: usize, x_norm: f64) -> Result<DecayIntegral> {
    if !(2..=3).contains(&n) {
        return Err(LabError::InvalidDimension { n, reason: "the decay integral is evaluated for n in {2, 3}" });
    }
    if !(x_norm >= 0.0) || !x_norm.is_finite() {
        return Err(LabError::Domain(format!("|x| must be finite and >= 0, got {x_norm}")));
    }
    let tol = tolerance();
    let a = x_norm;
    let radial = |r: f64| angular(n, a, r);
    if a == 0.0 {
        let outer = integrate_to_infinity(radial, 0.0, tol).require(&tol)?;
        return Ok(DecayIntegral { n, x_norm, inner: 0.0, shell: 0.0, outer });
    }
    let inner = integrate_with_breaks(radial, 0.0, 2.0 * a / 3.0, &[], tol).require(&tol)?;
    let near: Vec<f64> = [-16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0].iter().map(|k| a + k).collect();
    let shell = integrate_with_breaks(radial, 2.0 * a / 3.0, 2.0 * a, &near, tol).require(&tol)?;
    let outer = integrate_to_infinity(radial, 2.0 * a, tol).require(&tol)?;
    Ok(DecayIntegral { n, x_norm, inner, shell, outer })
}

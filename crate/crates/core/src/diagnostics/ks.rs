//! Klainerman–Sobolev sup-ratio `sup_x (1+t+|x|)ⁿ ρ(|f|)(x) / E_n[f]`.

use super::energy::energy_n;
use crate::error::Result;
use crate::grid::{velocity_average, PhaseDensity};

/// `sup_x (1+t+|x|)ⁿ ρ(|f|)(x)` over cell centres.
pub fn weighted_density_sup(f: &PhaseDensity, t: f64) -> Result<f64> {
    let rho = velocity_average(f, true)?;
    let n = f.spec.n as i32;
    Ok((0..rho.grid.len()).fold(0.0f64, |m, idx| {
        let x = rho.grid.point(idx);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        m.max((1.0 + t + r).powi(n) * rho.values[idx])
    }))
}

/// The sup-ratio against a given energy; `0` when the energy vanishes.
pub fn ks_ratio_with(f: &PhaseDensity, t: f64, energy: f64) -> Result<f64> {
    if energy == 0.0 {
        return Ok(0.0);
    }
    Ok(weighted_density_sup(f, t)? / energy)
}

/// The sup-ratio with the plain energy `E_n[f]` (`n` the dimension).
pub fn ks_ratio(f: &PhaseDensity, t: f64) -> Result<f64> {
    let n = f.spec.n;
    let energy = energy_n(f, n, t)?.energy(n).unwrap_or(0.0);
    ks_ratio_with(f, t, energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_function, GridSpec};

    #[test]
    fn zero_density_gives_zero() {
        let f = PhaseDensity::zeros(GridSpec::new(2, 4.0, 4.0, 16, 16).unwrap());
        assert_eq!(ks_ratio(&f, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ratio_is_positive_and_homogeneous() {
        let spec = GridSpec::new(2, 6.0, 6.0, 24, 24).unwrap();
        let g = |eps: f64| sample_function(spec, move |x, v| eps * (-(x[0] * x[0] + x[1] * x[1] + v[0] * v[0] + v[1] * v[1])).exp()).unwrap();
        let a = ks_ratio(&g(1.0), 0.0).unwrap();
        let b = ks_ratio(&g(3.0), 0.0).unwrap();
        assert!(a > 0.0 && a.is_finite());
        assert!((a / b - 1.0).abs() < 1e-12);
    }
}

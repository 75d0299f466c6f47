//! Fundamental solutions of `Δ` and `Δ − 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bessel::{bessel_k, k0_fast};
use crate::error::{LabError, Result};
use crate::quadrature::{integrate_to_infinity, integrate_with_breaks, Tolerance};

/// Which field equation the potential solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// `Δφ = ρ`.
    Poisson,
    /// `Δφ − φ = ρ` (unit mass).
    Yukawa,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Poisson => "poisson",
            KernelKind::Yukawa => "yukawa",
        }
    }

    /// Square of the screening mass.
    pub fn mass_squared(self) -> f64 {
        match self {
            KernelKind::Poisson => 0.0,
            KernelKind::Yukawa => 1.0,
        }
    }
}

/// A Green's function: kind and spatial dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub n: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, n: usize) -> Result<Self> {
        match kind {
            KernelKind::Poisson if n < 3 => Err(LabError::InvalidDimension { n, reason: "the Poisson kernel needs n >= 3" }),
            KernelKind::Yukawa if n < 2 => Err(LabError::InvalidDimension { n, reason: "the Yukawa kernel needs n >= 2" }),
            _ => Ok(Self { kind, n }),
        }
    }

    pub fn poisson(n: usize) -> Result<Self> {
        Self::new(KernelKind::Poisson, n)
    }

    pub fn yukawa(n: usize) -> Result<Self> {
        Self::new(KernelKind::Yukawa, n)
    }

    /// Surface area of the unit sphere `S^{n−1}`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.n)
    }
}

/// `|S^{n−1}| = 2π^{n/2}/Γ(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// `Γ(n/2)` for positive integers `n`.
fn gamma_half_integer(n: usize) -> f64 {
    let mut g = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut k = if n.is_multiple_of(2) { 2 } else { 1 };
    while k < n {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(LabError::Domain(format!("kernels are evaluated at r > 0, got {r}")));
    }
    Ok(())
}

/// `G(r)`, normalized so that `ΔG − m²G = δ`; negative for both kinds.
pub fn kernel_value(spec: KernelSpec, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(match (spec.kind, spec.n) {
        (KernelKind::Poisson, 3) => -1.0 / (4.0 * PI * r),
        (KernelKind::Poisson, n) => -r.powi(2 - n as i32) / ((n as f64 - 2.0) * sphere_area(n)),
        (KernelKind::Yukawa, 2) => -k0_fast(r) / (2.0 * PI),
        (KernelKind::Yukawa, 3) => -(-r).exp() / (4.0 * PI * r),
        (KernelKind::Yukawa, n) => {
            let nu = n as f64 / 2.0 - 1.0;
            -(2.0 * PI).powf(-(n as f64) / 2.0) * r.powf(-nu) * bessel_k(nu, r)?
        }
    })
}

/// `|∇G|(r) = |G′(r)|`.
pub fn kernel_gradient_magnitude(spec: KernelSpec, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(match spec.kind {
        KernelKind::Poisson => r.powi(1 - spec.n as i32) / sphere_area(spec.n),
        KernelKind::Yukawa => {
            // d/dr [r^{−ν}K_ν(r)] = −r^{−ν}K_{ν+1}(r), ν = n/2 − 1.
            let nu = spec.n as f64 / 2.0 - 1.0;
            if spec.n == 3 {
                (1.0 + r) * (-r).exp() / (4.0 * PI * r * r)
            } else {
                (2.0 * PI).powf(-(spec.n as f64) / 2.0) * r.powf(-nu) * bessel_k(nu + 1.0, r)?
            }
        }
    })
}

/// `‖G‖_{L¹}` and `‖∇G‖_{L¹}` by radial quadrature; the Poisson kernel is not
/// integrable and is rejected.
pub fn kernel_l1_norms(spec: KernelSpec) -> Result<(f64, f64)> {
    if spec.kind == KernelKind::Poisson {
        return Err(LabError::Domain("the Poisson kernel is not in L¹".into()));
    }
    let area = spec.sphere_area();
    let tol = Tolerance::relative(1e-10).with_abs(1e-15);
    let radial = |g: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        let f = |r: f64| if r <= 0.0 { 0.0 } else { g(r).map(|v| v.abs() * r.powi(spec.n as i32 - 1)).unwrap_or(0.0) };
        let inner = integrate_with_breaks(f, 0.0, 1.0, &[1e-6, 1e-3, 0.1], tol).require(&tol)?;
        let outer = integrate_to_infinity(f, 1.0, tol).require(&tol)?;
        Ok(area * (inner + outer))
    };
    let g = radial(&|r| kernel_value(spec, r))?;
    let dg = radial(&|r| kernel_gradient_magnitude(spec, r))?;
    Ok((g, dg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizations() {
        let p3 = KernelSpec::poisson(3).unwrap();
        let y3 = KernelSpec::yukawa(3).unwrap();
        let y2 = KernelSpec::yukawa(2).unwrap();
        assert!((kernel_value(p3, 1.0).unwrap() + 1.0 / (4.0 * PI)).abs() < 1e-16);
        assert!((kernel_value(y3, 1.0).unwrap() + (-1.0f64).exp() / (4.0 * PI)).abs() < 1e-16);
        // Small-r logarithmic growth of the 2D Yukawa kernel.
        let r = 1e-6;
        let v = -kernel_value(y2, r).unwrap();
        assert!((v / ((1.0 / r).ln() / (2.0 * PI)) - 1.0).abs() < 0.05);
        assert!(KernelSpec::poisson(2).is_err());
        assert!(KernelSpec::yukawa(1).is_err());
        assert!(kernel_value(p3, 0.0).is_err());
    }

    #[test]
    fn general_formula_agrees_with_closed_forms() {
        let y4 = KernelSpec::yukawa(4).unwrap();
        // n = 4: −(2π)^{−2} r^{−1} K₁(r)
        let r = 0.8;
        let expect = -(2.0 * PI).powi(-2) / r * bessel_k(1.0, r).unwrap();
        assert!((kernel_value(y4, r).unwrap() - expect).abs() < 1e-15);
        let p4 = KernelSpec::poisson(4).unwrap();
        assert!((kernel_value(p4, 2.0).unwrap() + 1.0 / (4.0 * PI * PI * 4.0)).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
    }

    #[test]
    fn yukawa_l1_norms() {
        // ∫G = −1/m², ∫|∇G| = π/2 (n = 2), 2 (n = 3).
        let (g2, dg2) = kernel_l1_norms(KernelSpec::yukawa(2).unwrap()).unwrap();
        assert!((g2 - 1.0).abs() < 1e-8 && (dg2 - PI / 2.0).abs() < 1e-8, "{g2} {dg2}");
        let (g3, dg3) = kernel_l1_norms(KernelSpec::yukawa(3).unwrap()).unwrap();
        assert!((g3 - 1.0).abs() < 1e-8 && (dg3 - 2.0).abs() < 1e-8, "{g3} {dg3}");
        assert!(kernel_l1_norms(KernelSpec::poisson(3).unwrap()).is_err());
    }
}

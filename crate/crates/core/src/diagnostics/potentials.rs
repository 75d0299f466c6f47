//! Commuted potentials `Z^γφ` and the bilinear terms `‖∇ₓZ^γφ · Z^βf‖_{L¹}`.
//!
//! `Z^γφ` is obtained from the field equation itself: with `L = Δ − m²`,
//! `[Z, Δ] = c_Z Δ` and `Z ρ(g) = ρ(Zg) + c_ρ ρ(g)`,
//!
//! `L(Zψ) = Z(Lψ) − c_Z (Lψ + m²ψ)`,
//!
//! so every source is a combination of `ρ(Z^w f)` and lower potentials, and
//! each potential is one convolution. Differentiating `φ` on the grid is kept
//! as an independent cross-check.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};
use crate::greens::{FieldSolver, KernelKind};
use crate::grid::{apply_vfield, velocity_average_on, Frame, PhaseDensity, SpatialField};
use crate::interp::Interpolation;
use crate::par;
use crate::vfield::{laplacian_commutation, make_gamma, rho_commutation, MultiIndex, Slot, VectorFieldSymbol};

/// A term of a commuted source.
#[derive(Clone, Debug, PartialEq)]
enum SourceTerm {
    /// `k · ρ(Z^w f)`
    Density(f64, Vec<usize>),
    /// `k · Z^w φ`
    Potential(f64, Vec<usize>),
}

/// Lazily computed `Z^w f`, `ρ(Z^w f)` and `Z^w φ` for one density and time.
pub struct CommutedPotentials<'a> {
    f: &'a PhaseDensity,
    time: f64,
    solver: &'a FieldSolver,
    scheme: Interpolation,
    gamma: Vec<VectorFieldSymbol>,
    laplace_constants: Vec<f64>,
    rho_constants: Vec<f64>,
    phase: HashMap<Vec<usize>, PhaseDensity>,
    potentials: HashMap<Vec<usize>, SpatialField>,
    gradients: HashMap<Vec<usize>, SpatialField>,
}

impl<'a> CommutedPotentials<'a> {
    pub fn new(f: &'a PhaseDensity, time: f64, solver: &'a FieldSolver, scheme: Interpolation) -> Result<Self> {
        if f.frame == Frame::FreeStreaming && (f.time - time).abs() > 1e-12 * (1.0 + time.abs()) {
            return Err(LabError::Desynchronized { expected: f.time, found: time });
        }
        if solver.grid.n != f.spec.n {
            return Err(invalid("solver and density dimensions differ"));
        }
        let gamma = make_gamma(f.spec.n)?;
        let laplace_constants = gamma.iter().map(|z| laplacian_commutation(z).map(|c| c as f64)).collect::<Result<_>>()?;
        let rho_constants = gamma.iter().map(|z| rho_commutation(z).map(|c| c.constant as f64)).collect::<Result<_>>()?;
        Ok(Self {
            f,
            time,
            solver,
            scheme,
            gamma,
            laplace_constants,
            rho_constants,
            phase: HashMap::new(),
            potentials: HashMap::new(),
            gradients: HashMap::new(),
        })
    }

    pub fn gamma(&self) -> &[VectorFieldSymbol] {
        &self.gamma
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn density(&self) -> &PhaseDensity {
        self.f
    }

    /// `Z^w f`, innermost letter last.
    pub fn phase(&mut self, word: &[usize]) -> Result<&PhaseDensity> {
        if word.is_empty() {
            return Ok(self.f);
        }
        if !self.phase.contains_key(word) {
            let inner = self.phase(&word[1..])?.clone();
            let g = apply_vfield(&inner, &self.gamma[word[0]].expression(), self.time)?;
            self.phase.insert(word.to_vec(), g);
        }
        Ok(&self.phase[word])
    }

    fn rho(&mut self, word: &[usize]) -> Result<SpatialField> {
        let grid = self.solver.grid;
        let scheme = self.scheme;
        velocity_average_on(self.phase(word)?, &grid, false, scheme)
    }

    fn source_terms(&self, word: &[usize]) -> Vec<SourceTerm> {
        let Some((&a, rest)) = word.split_first() else {
            return vec![SourceTerm::Density(1.0, Vec::new())];
        };
        let inner = self.source_terms(rest);
        let c = self.laplace_constants[a];
        let m2 = self.solver.spec.kind.mass_squared();
        let mut out = Vec::new();
        for term in &inner {
            match term {
                SourceTerm::Density(k, w) => {
                    let mut longer = vec![a];
                    longer.extend(w);
                    out.push(SourceTerm::Density(*k, longer));
                    let extra = k * (self.rho_constants[a] - c);
                    if extra != 0.0 {
                        out.push(SourceTerm::Density(extra, w.clone()));
                    }
                }
                SourceTerm::Potential(k, w) => {
                    let mut longer = vec![a];
                    longer.extend(w);
                    out.push(SourceTerm::Potential(*k, longer));
                    if c != 0.0 {
                        out.push(SourceTerm::Potential(-c * k, w.clone()));
                    }
                }
            }
        }
        if c != 0.0 && m2 != 0.0 {
            out.push(SourceTerm::Potential(-c * m2, rest.to_vec()));
        }
        out
    }

    /// The source `L(Z^w φ)` on the solver grid.
    pub fn source(&mut self, word: &[usize]) -> Result<SpatialField> {
        let mut acc = SpatialField::zeros(self.solver.grid, 1);
        for term in self.source_terms(word) {
            let (k, field) = match term {
                SourceTerm::Density(k, w) => (k, self.rho(&w)?),
                SourceTerm::Potential(k, w) => (k, self.potential(&w)?.clone()),
            };
            for (a, b) in acc.values.iter_mut().zip(&field.values) {
                *a += k * b;
            }
        }
        Ok(acc)
    }

    /// `Z^w φ` by one convolution of its commuted source.
    pub fn potential(&mut self, word: &[usize]) -> Result<&SpatialField> {
        if !self.potentials.contains_key(word) {
            let src = self.source(word)?;
            let psi = SpatialField::scalar(self.solver.grid, self.solver.convolve(&src.values)?)?;
            self.potentials.insert(word.to_vec(), psi);
        }
        Ok(&self.potentials[word])
    }

    /// `∇ₓZ^w φ` (4th-order differences of the potential).
    pub fn gradient(&mut self, word: &[usize]) -> Result<&SpatialField> {
        if !self.gradients.contains_key(word) {
            let g = self.potential(word)?.gradient()?;
            self.gradients.insert(word.to_vec(), g);
        }
        Ok(&self.gradients[word])
    }

    /// `‖∇ₓZ^γφ · Z^βf‖_{L¹(x,v)}`, evaluating the field at `x` (`= y + vt` in
    /// the free-streaming frame).
    pub fn bilinear(&mut self, gamma_word: &[usize], beta_word: &[usize]) -> Result<f64> {
        let grad = self.gradient(gamma_word)?.clone();
        let t = self.time;
        let g = self.phase(beta_word)?;
        Ok(weighted_l1(g, &grad, t))
    }
}

/// `Σ |F(x(z))| |g(z)| dz` over the phase grid.
pub fn weighted_l1(g: &PhaseDensity, force: &SpatialField, t: f64) -> f64 {
    let n = g.spec.n;
    let streaming = g.frame == Frame::FreeStreaming;
    let on_grid = !streaming && force.grid == g.spec.x_grid();
    let block = g.spec.v_cells();
    let m = force.grid.len();
    par::sum_range(g.values.len(), |idx| {
        let val = g.values[idx];
        if val == 0.0 {
            return 0.0;
        }
        let magnitude = if on_grid {
            let c = idx / block;
            (0..force.components).map(|k| force.values[k * m + c].powi(2)).sum::<f64>().sqrt()
        } else {
            let mut x = [0.0; 3];
            let mut v = [0.0; 3];
            g.coordinates(idx, &mut x[..n], &mut v[..n]);
            if streaming {
                for a in 0..n {
                    x[a] += v[a] * t;
                }
            }
            let e = force.interpolate_all(&x[..n]);
            e[..force.components.min(3)].iter().map(|c| c * c).sum::<f64>().sqrt()
        };
        magnitude * val.abs()
    }) * g.spec.cell_volume()
}

/// `Z^macro ψ` by direct differentiation of a scalar field on its grid.
pub fn apply_macroscopic(phi: &SpatialField, symbol: &VectorFieldSymbol, t: f64) -> Result<SpatialField> {
    if phi.components != 1 || phi.grid.n != symbol.n {
        return Err(invalid("macroscopic fields act on scalar fields of matching dimension"));
    }
    let n = symbol.n;
    let e = symbol.macroscopic();
    let grad = phi.gradient()?;
    let coeffs: Vec<_> = (0..n).map(|i| e.coefficient(Slot::X(i)).compile()).collect();
    let zeroth = e.zeroth().compile();
    let m = phi.grid.len();
    let zero_v = vec![0.0; n];
    let values = par::map_range(m, |idx| {
        let x = phi.grid.point(idx);
        let mut acc = if zeroth.is_zero() { 0.0 } else { zeroth.eval(t, &x, &zero_v) * phi.values[idx] };
        for (i, c) in coeffs.iter().enumerate() {
            if !c.is_zero() {
                acc += c.eval(t, &x, &zero_v) * grad.values[i * m + idx];
            }
        }
        acc
    });
    SpatialField::scalar(phi.grid, values)
}

/// One bilinear measurement and its envelope `E_N² / (1+t)^p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearTerm {
    pub time: f64,
    pub gamma: String,
    pub beta: String,
    pub measured: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// Envelope exponent: `n − 1` for Poisson, `n` for Yukawa.
pub fn envelope_power(kind: KernelKind, n: usize) -> f64 {
    match kind {
        KernelKind::Poisson => n as f64 - 1.0,
        KernelKind::Yukawa => n as f64,
    }
}

/// `‖∇ₓZ^γφ · Z^βf‖_{L¹}` with its envelope; `energy` is `E_N[f]` for `N = |γ| + |β|`.
pub fn bilinear_term(pots: &mut CommutedPotentials<'_>, gamma: &MultiIndex, beta: &MultiIndex, energy: f64) -> Result<BilinearTerm> {
    if gamma.len() > 2 || beta.len() > 2 {
        return Err(LabError::StencilBudget("bilinear terms support |γ|, |β| ≤ 2".into()));
    }
    let measured = pots.bilinear(&gamma.0, &beta.0)?;
    let t = pots.time();
    let power = envelope_power(pots.solver.spec.kind, pots.f.spec.n);
    let envelope = energy * energy / (1.0 + t).powf(power);
    let ratio = if envelope > 0.0 { measured / envelope } else { 0.0 };
    let labels = pots.gamma().to_vec();
    Ok(BilinearTerm { time: t, gamma: gamma.label(&labels), beta: beta.label(&labels), measured, envelope, ratio })
}

/// `(1+t) Σ ‖∇ₓZ^γφ · Z^βf‖_{L¹}` over `|γ| + |β| ≤ order`, `|β| < order`.
pub fn commutator_budget(pots: &mut CommutedPotentials<'_>, order: usize) -> Result<f64> {
    if order == 0 || order > 2 {
        return Err(LabError::StencilBudget(format!("commutator budgets are evaluated for 1 ≤ |α| ≤ 2, got {order}")));
    }
    let count = pots.gamma().len();
    let mut total = 0.0;
    for beta in MultiIndex::all_up_to(count, order - 1) {
        for gamma in MultiIndex::all_up_to(count, order - beta.len()) {
            total += pots.bilinear(&gamma.0, &beta.0)?;
        }
    }
    Ok((1.0 + pots.time()) * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greens::{KernelSpec, SingularCellRule};
    use crate::grid::{sample_function, GridSpec};

    fn setup(eps: f64) -> (PhaseDensity, FieldSolver) {
        let spec = GridSpec::new(2, 6.0, 5.0, 32, 32).unwrap();
        let f =
            sample_function(spec, move |x, v| eps * (-(x[0] - 0.3).powi(2) - 1.5 * x[1] * x[1] - v[0] * v[0] - (v[1] - 0.2).powi(2)).exp()).unwrap();
        let solver = FieldSolver::new(KernelSpec::yukawa(2).unwrap(), spec.x_grid(), SingularCellRule::default()).unwrap();
        (f, solver)
    }

    #[test]
    fn zero_data_gives_zero_terms() {
        let (f, solver) = setup(0.0);
        let mut pots = CommutedPotentials::new(&f, 0.0, &solver, Interpolation::CubicSpline).unwrap();
        let t = bilinear_term(&mut pots, &MultiIndex::empty(), &MultiIndex::empty(), 0.0).unwrap();
        assert_eq!(t.measured, 0.0);
        assert_eq!(commutator_budget(&mut pots, 1).unwrap(), 0.0);
    }

    #[test]
    fn empty_word_is_the_potential() {
        let (f, solver) = setup(1.0);
        let rho = crate::grid::velocity_average(&f, false).unwrap();
        let direct = solver.solve(&rho).unwrap().phi;
        let mut pots = CommutedPotentials::new(&f, 0.0, &solver, Interpolation::CubicSpline).unwrap();
        let psi = pots.potential(&[]).unwrap();
        assert_eq!(psi.values, direct.values);
    }

    #[test]
    fn commuted_source_route_matches_differentiation() {
        let (f, solver) = setup(1.0);
        let t = 0.7;
        let mut pots = CommutedPotentials::new(&f, t, &solver, Interpolation::CubicSpline).unwrap();
        let phi = pots.potential(&[]).unwrap().clone();
        let gamma = pots.gamma().to_vec();
        for (a, z) in gamma.iter().enumerate() {
            let via_source = pots.potential(&[a]).unwrap().clone();
            let via_fd = apply_macroscopic(&phi, z, t).unwrap();
            let scale = via_fd.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
            // Interior comparison (one-sided stencils and far-field truncation at the edges).
            let g = phi.grid;
            let mut worst = 0.0f64;
            for idx in 0..g.len() {
                if g.point(idx).iter().all(|c| c.abs() < 3.0) {
                    worst = worst.max((via_source.values[idx] - via_fd.values[idx]).abs());
                }
            }
            assert!(worst < 2e-2 * scale, "{z}: {worst} vs {scale}");
        }
    }

    #[test]
    fn bilinear_terms_scale_quadratically() {
        let (f1, solver) = setup(1e-3);
        let (f2, _) = setup(2e-3);
        let m1 = CommutedPotentials::new(&f1, 0.0, &solver, Interpolation::CubicSpline).unwrap().bilinear(&[0], &[]).unwrap();
        let m2 = CommutedPotentials::new(&f2, 0.0, &solver, Interpolation::CubicSpline).unwrap().bilinear(&[0], &[]).unwrap();
        assert!((m2 / m1 - 4.0).abs() < 1e-9);
    }
}

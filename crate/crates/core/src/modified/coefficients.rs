//! Coefficient functions `varphi[i][k]` of the modified fields
//! `Yⁱ = Zⁱ − Σ_k varphi[i][k] ∂_{x^k}`, advected with `f` and driven by
//! `T_φ(varphi[i][k]) = μ t ∂_{x^k}(Zⁱφ + cᵢφ)`.

use crate::diagnostics::CommutedPotentials;
use crate::error::{invalid, LabError, Result};
use crate::grid::{apply_vfield, Frame, PhaseDensity, SpatialField};
use crate::par;
use crate::transport::{KickContext, Passenger};
use crate::vfield::{commute_with_tphi_order1, make_gamma, FieldExpression, Slot, VectorFieldSymbol};

/// `varphi[i][k]` on the phase grid of the run; translations carry none.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub gamma: Vec<VectorFieldSymbol>,
    /// `cᵢ` in the source `μ t ∂_k(Zⁱφ + cᵢφ)`.
    pub constants: Vec<i64>,
    /// `varphi[i]` holds `n` components, or `None` for a translation.
    pub varphi: Vec<Option<Vec<PhaseDensity>>>,
}

impl CoefficientField {
    /// Identically zero coefficients on the grid, frame and time of `f`.
    pub fn zeros(f: &PhaseDensity) -> Result<Self> {
        let n = f.spec.n;
        if n != 2 {
            return Err(LabError::Unsupported("modified fields are built on n = 2 grids".into()));
        }
        let gamma = make_gamma(n)?;
        let constants = gamma.iter().map(|z| commute_with_tphi_order1(z).map(|t| t.constant)).collect::<Result<_>>()?;
        let zero = PhaseDensity { values: vec![0.0; f.values.len()], ..f.clone() };
        let varphi = gamma.iter().map(|z| if z.is_translation() { None } else { Some(vec![zero.clone(); n]) }).collect();
        Ok(Self { gamma, constants, varphi })
    }

    pub fn n(&self) -> usize {
        self.gamma[0].n
    }

    /// Time tag shared by every component (`None` if there are no components).
    pub fn time(&self) -> Option<f64> {
        self.varphi.iter().flatten().flatten().map(|d| d.time).next()
    }

    pub fn component(&self, i: usize, k: usize) -> Option<&PhaseDensity> {
        self.varphi.get(i)?.as_ref()?.get(k)
    }

    /// All stored components with their `(i, k)`.
    pub fn components(&self) -> impl Iterator<Item = (usize, usize, &PhaseDensity)> {
        self.varphi
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|c| (i, c)))
            .flat_map(|(i, c)| c.iter().enumerate().map(move |(k, d)| (i, k, d)))
    }

    /// Largest `|varphi[i][k]|` over all components.
    pub fn sup(&self) -> f64 {
        self.components().map(|(_, _, d)| d.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.components().all(|(_, _, d)| d.values.iter().all(|&v| v == 0.0))
    }

    /// Rejects coefficients whose time tag, frame or grid differs from `f`.
    pub fn check_synchronized(&self, f: &PhaseDensity, t: f64) -> Result<()> {
        for (_, _, d) in self.components() {
            if d.spec != f.spec || d.frame != f.frame {
                return Err(invalid("coefficients and density live on different grids or frames"));
            }
            if (d.time - t).abs() > 1e-12 * (1.0 + t.abs()) {
                return Err(LabError::Desynchronized { expected: t, found: d.time });
            }
        }
        Ok(())
    }

    /// `∇ₓ(Zⁱφ + cᵢφ)` on the solver grid for every non-translation `i`.
    pub fn source_gradients(&self, pots: &mut CommutedPotentials<'_>) -> Result<Vec<Option<SpatialField>>> {
        let phi = pots.potential(&[])?.clone();
        (0..self.gamma.len())
            .map(|i| {
                if self.varphi[i].is_none() {
                    return Ok(None);
                }
                let mut psi = pots.potential(&[i])?.clone();
                let c = self.constants[i] as f64;
                if c != 0.0 {
                    for (a, b) in psi.values.iter_mut().zip(&phi.values) {
                        *a += c * b;
                    }
                }
                psi.gradient().map(Some)
            })
            .collect()
    }
}

/// `d += scale · F_k(x)` with `x` the physical position of each phase cell.
pub fn add_broadcast(d: &mut PhaseDensity, field: &SpatialField, k: usize, scale: f64) {
    let spec = d.spec;
    let n = spec.n;
    let block = spec.v_cells();
    let streaming = d.frame == Frame::FreeStreaming;
    let t = d.time;
    let on_grid = !streaming && field.grid == spec.x_grid();
    let m = field.grid.len();
    par::for_each_chunk_mut(&mut d.values, block, |c, chunk| {
        if on_grid {
            let s = scale * field.values[k * m + c];
            chunk.iter_mut().for_each(|v| *v += s);
            return;
        }
        let mut x = [0.0; 3];
        let mut v = [0.0; 3];
        for (j, val) in chunk.iter_mut().enumerate() {
            crate::grid::density::decode(&spec, c * block + j, &mut x[..n], &mut v[..n]);
            if streaming {
                for a in 0..n {
                    x[a] += v[a] * t;
                }
            }
            *val += scale * field.interpolate(k, &x[..n]);
        }
    });
}

impl Passenger for CoefficientField {
    fn densities_mut(&mut self) -> Vec<&mut PhaseDensity> {
        self.varphi.iter_mut().flatten().flatten().collect()
    }

    fn add_source(&mut self, ctx: &KickContext<'_>) -> Result<()> {
        self.check_synchronized(ctx.density, ctx.time)?;
        if !ctx.config.force {
            return Ok(());
        }
        let mut pots = CommutedPotentials::new(ctx.density, ctx.time, ctx.solver, ctx.config.interpolation)?;
        let sources = self.source_gradients(&mut pots)?;
        let scale = ctx.dt * ctx.config.mu * ctx.time;
        for (comps, src) in self.varphi.iter_mut().zip(&sources) {
            if let (Some(comps), Some(src)) = (comps, src) {
                for (k, d) in comps.iter_mut().enumerate() {
                    add_broadcast(d, src, k, scale);
                }
            }
        }
        Ok(())
    }
}

/// `∂_{x^k} g` for every `k`.
pub fn spatial_derivatives(g: &PhaseDensity, t: f64) -> Result<Vec<PhaseDensity>> {
    let n = g.spec.n;
    (0..n).map(|k| apply_vfield(g, &FieldExpression::partial(n, Slot::X(k)), t)).collect()
}

/// `Yⁱg = Zⁱg − Σ_k varphi[i][k] · ∂_{x^k} g` given the derivatives of `g`.
fn modified_image(g: &PhaseDensity, i: usize, coeffs: &CoefficientField, partials: &[PhaseDensity], t: f64) -> Result<PhaseDensity> {
    let z = &coeffs.gamma[i];
    let mut out = match z.kind {
        crate::vfield::SymbolKind::Translation(k) => partials[k].clone(),
        _ => apply_vfield(g, &z.expression(), t)?,
    };
    if let Some(comps) = &coeffs.varphi[i] {
        for (c, d) in comps.iter().zip(partials) {
            par::for_each_chunk_mut(&mut out.values, 4096, |chunk, vals| {
                let base = chunk * 4096;
                for (j, v) in vals.iter_mut().enumerate() {
                    *v -= c.values[base + j] * d.values[base + j];
                }
            });
        }
    }
    Ok(out)
}

/// `Yⁱg` at time `t`.
pub fn apply_modified_field(g: &PhaseDensity, i: usize, coeffs: &CoefficientField, t: f64) -> Result<PhaseDensity> {
    if i >= coeffs.gamma.len() {
        return Err(invalid(format!("symbol index {i} out of range")));
    }
    coeffs.check_synchronized(g, t)?;
    let partials = spatial_derivatives(g, t)?;
    modified_image(g, i, coeffs, &partials, t)
}

/// `Yⁱg` for every `i`, sharing the spatial derivatives of `g`.
pub fn modified_images(g: &PhaseDensity, coeffs: &CoefficientField, t: f64) -> Result<Vec<PhaseDensity>> {
    coeffs.check_synchronized(g, t)?;
    let partials = spatial_derivatives(g, t)?;
    (0..coeffs.gamma.len()).map(|i| modified_image(g, i, coeffs, &partials, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::CommutedPotentials;
    use crate::greens::KernelSpec;
    use crate::grid::{sample_function, GridSpec};
    use crate::transport::{run_with, ObservationSchedule, SolverConfig};

    fn data(eps: f64) -> PhaseDensity {
        let spec = GridSpec::new(2, 6.0, 5.0, 20, 20).unwrap();
        sample_function(spec, move |x, v| eps * (-(x[0] - 0.5).powi(2) - x[1] * x[1] - v[0] * v[0] - (v[1] + 0.3).powi(2)).exp()).unwrap()
    }

    fn config(t_end: f64) -> SolverConfig {
        SolverConfig::new(KernelSpec::yukawa(2).unwrap(), -1.0, t_end)
            .unwrap()
            .with_frame(Frame::FreeStreaming)
            .with_schedule(ObservationSchedule::from_times(vec![t_end]).unwrap())
    }

    #[test]
    fn starts_at_zero_and_translations_carry_nothing() {
        let c = CoefficientField::zeros(&data(1.0)).unwrap();
        assert!(c.is_zero());
        assert_eq!(c.components().count(), 8);
        for (i, z) in c.gamma.iter().enumerate() {
            assert_eq!(c.varphi[i].is_none(), z.is_translation());
        }
        assert_eq!(c.constants, vec![0, 0, 0, 0, 0, -2]);
    }

    #[test]
    fn zero_coefficients_reproduce_the_plain_fields() {
        let f = data(1.0);
        let c = CoefficientField::zeros(&f).unwrap();
        for (i, z) in c.gamma.iter().enumerate() {
            let y = apply_modified_field(&f, i, &c, 0.0).unwrap();
            let plain = apply_vfield(&f, &z.expression(), 0.0).unwrap();
            assert_eq!(y.values, plain.values, "{z}");
        }
    }

    #[test]
    fn unit_coefficients_subtract_spatial_derivatives() {
        let f = data(1.0);
        let mut c = CoefficientField::zeros(&f).unwrap();
        for d in c.densities_mut() {
            d.values.iter_mut().for_each(|v| *v = 1.0);
        }
        let boost = c.gamma.iter().position(|z| matches!(z.kind, crate::vfield::SymbolKind::Boost(0))).unwrap();
        let y = apply_modified_field(&f, boost, &c, 0.0).unwrap();
        let b = apply_vfield(&f, &c.gamma[boost].expression(), 0.0).unwrap();
        let d = spatial_derivatives(&f, 0.0).unwrap();
        for idx in 0..f.values.len() {
            let want = b.values[idx] - d[0].values[idx] - d[1].values[idx];
            assert!((y.values[idx] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn desynchronized_coefficients_are_rejected() {
        let f = data(1.0);
        let c = CoefficientField::zeros(&f).unwrap();
        let g = PhaseDensity { time: 1.0, ..f.clone() };
        assert!(matches!(apply_modified_field(&g, 0, &c, 1.0), Err(LabError::Desynchronized { .. })));
    }

    #[test]
    fn force_free_runs_keep_zero_coefficients() {
        let f = data(1e-3);
        let mut c = CoefficientField::zeros(&f).unwrap();
        run_with(&config(2.0).without_force(), f, &mut c, &mut []).unwrap();
        assert!(c.is_zero());
        assert_eq!(c.time(), Some(2.0));
    }

    #[test]
    fn one_step_matches_the_midpoint_source() {
        let dt = 0.1;
        let f = data(1e-2).with_frame(Frame::FreeStreaming);
        let mut c = CoefficientField::zeros(&f).unwrap();
        let cfg = config(dt);
        run_with(&cfg, f.clone(), &mut c, &mut []).unwrap();
        // Midpoint state: exact free flow of f over dt/2, field on the run's grid.
        let mut cache = crate::transport::FieldCache::new(&cfg);
        // Same field-grid history as the run: sized at t = 0, reused at the midpoint.
        cache.solve(&f).unwrap();
        let mid = PhaseDensity { time: 0.5 * dt, ..f };
        cache.solve(&mid).unwrap();
        let solver = cache.solver().unwrap();
        let mut pots = CommutedPotentials::new(&mid, 0.5 * dt, solver, cfg.interpolation).unwrap();
        let expected = CoefficientField::zeros(&mid).unwrap();
        let grads = expected.source_gradients(&mut pots).unwrap();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (i, k, d) in c.components() {
            let mut want = PhaseDensity { values: vec![0.0; d.values.len()], ..mid.clone() };
            add_broadcast(&mut want, grads[i].as_ref().unwrap(), k, dt * cfg.mu * 0.5 * dt);
            for (a, b) in d.values.iter().zip(&want.values) {
                worst = worst.max((a - b).abs());
                scale = scale.max(b.abs());
            }
        }
        assert!(scale > 0.0);
        assert!(worst <= 1e-12 * scale, "{worst} vs {scale}");
    }
}

//! Phase-space densities: sampling, velocity averages, L¹ norms and the
//! discrete action of vector fields.

use serde::{Deserialize, Serialize};

use super::field::SpatialField;
use super::spec::{GridSpec, SpatialGrid};
use super::stencil::d1;
use crate::error::{invalid, LabError, Result};
use crate::interp::{eval_line, Interpolation, LineInterpolator};
use crate::par;
use crate::vfield::{FieldExpression, Slot};

/// Coordinates in which the grid values are stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Frame {
    /// Values are `f(t, x, v)`.
    #[default]
    Lab,
    /// Values are `g(t, y, v) = f(t, y + vt, v)`; free streaming leaves them unchanged.
    FreeStreaming,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::FreeStreaming => "free-streaming",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lab" => Some(Frame::Lab),
            "free-streaming" | "streaming" => Some(Frame::FreeStreaming),
            _ => None,
        }
    }
}

/// Mass fraction near the box boundary; a run is invalid once it exceeds 1e−10.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub boundary_fraction: f64,
    pub contaminated: bool,
}

/// Threshold on the boundary mass fraction.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

/// `f(t, ·, ·)` sampled at cell centres of a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseDensity {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub time: f64,
    pub frame: Frame,
}

impl PhaseDensity {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![0.0; spec.len()], time: 0.0, frame: Frame::Lab }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>, time: f64, frame: Frame) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(invalid(format!("expected {} values, got {}", spec.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("phase density values"));
        }
        Ok(Self { spec, values, time, frame })
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    /// Decodes a flat index into x and v cell-centre coordinates.
    #[inline]
    pub fn coordinates(&self, idx: usize, x: &mut [f64], v: &mut [f64]) {
        decode(&self.spec, idx, x, v);
    }

    /// Signed integral `Σ f ΔxⁿΔvⁿ`.
    pub fn mass(&self) -> f64 {
        par::sum_slice(&self.values, |v| v) * self.spec.cell_volume()
    }

    pub fn min_value(&self) -> f64 {
        -par::max_range(self.values.len(), |i| -self.values[i])
    }

    pub fn max_abs(&self) -> f64 {
        par::max_range(self.values.len(), |i| self.values[i].abs())
    }

    /// Fraction of `|f|` mass within `cells` cells of any face of the box.
    pub fn boundary_report(&self, cells: usize) -> BoundaryReport {
        let spec = self.spec;
        let shape = spec.shape();
        let strides = spec.strides();
        let near = par::sum_range(self.values.len(), |idx| {
            let close = shape.iter().zip(&strides).any(|(&len, &s)| {
                let p = (idx / s) % len;
                p < cells || p + cells >= len
            });
            if close {
                self.values[idx].abs()
            } else {
                0.0
            }
        });
        let total = par::sum_slice(&self.values, f64::abs);
        let fraction = if total > 0.0 { near / total } else { 0.0 };
        BoundaryReport { boundary_fraction: fraction, contaminated: fraction > BOUNDARY_TOLERANCE }
    }

    /// The spatial grid on which [`velocity_average`] reports ρ: the x grid
    /// in the lab frame; in the free-streaming frame a grid with the same
    /// point count covering `|x| ≤ X + V t`.
    pub fn natural_x_grid(&self) -> SpatialGrid {
        match self.frame {
            Frame::Lab => self.spec.x_grid(),
            Frame::FreeStreaming => SpatialGrid { n: self.spec.n, extent: self.spec.x_extent + self.spec.v_extent * self.time, points: self.spec.nx },
        }
    }
}

#[inline]
pub(crate) fn decode(spec: &GridSpec, mut idx: usize, x: &mut [f64], v: &mut [f64]) {
    let n = spec.n;
    for a in (0..n).rev() {
        v[a] = spec.v_at(idx % spec.nv);
        idx /= spec.nv;
    }
    for a in (0..n).rev() {
        x[a] = spec.x_at(idx % spec.nx);
        idx /= spec.nx;
    }
}

/// Samples `g(x, v)` at cell centres; lab frame, `t = 0`.
pub fn sample_function<G>(spec: GridSpec, g: G) -> Result<PhaseDensity>
where
    G: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
{
    let n = spec.n;
    let values = par::map_range(spec.len(), |idx| {
        let mut x = [0.0; 3];
        let mut v = [0.0; 3];
        decode(&spec, idx, &mut x[..n], &mut v[..n]);
        g(&x[..n], &v[..n])
    });
    if values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite("sampled initial data"));
    }
    Ok(PhaseDensity { spec, values, time: 0.0, frame: Frame::Lab })
}

/// `Σ |f| ΔxⁿΔvⁿ` with compensated, worker-independent summation.
pub fn l1_norm(f: &PhaseDensity) -> f64 {
    par::sum_slice(&f.values, f64::abs) * f.spec.cell_volume()
}

/// `ρ(f)` (or `ρ(|f|)`) by midpoint quadrature in `v`, on [`PhaseDensity::natural_x_grid`].
pub fn velocity_average(f: &PhaseDensity, absolute: bool) -> Result<SpatialField> {
    velocity_average_on(f, &f.natural_x_grid(), absolute, Interpolation::CubicSpline)
}

/// `ρ(f)` on a chosen spatial grid. Lab-frame densities require the grid's own x grid.
pub fn velocity_average_on(f: &PhaseDensity, grid: &SpatialGrid, absolute: bool, scheme: Interpolation) -> Result<SpatialField> {
    match f.frame {
        Frame::Lab => {
            if *grid != f.spec.x_grid() {
                return Err(invalid("lab-frame velocity averages live on the density's own x grid"));
            }
            let block = f.spec.v_cells();
            let dvn = f.spec.dv().powi(f.spec.n as i32);
            let values = par::map_range(f.spec.x_cells(), |c| {
                let chunk = &f.values[c * block..(c + 1) * block];
                let s = if absolute { par::compensated_sum(chunk.iter().map(|v| v.abs())) } else { par::compensated_sum(chunk.iter().copied()) };
                s * dvn
            });
            SpatialField::scalar(*grid, values)
        }
        Frame::FreeStreaming => streaming_average(f, grid, absolute, scheme),
    }
}

/// `ρ(t, x) = ∫ g(x − vt, v) dv` for `n = 2`, integrating one axis at a time.
fn streaming_average(f: &PhaseDensity, grid: &SpatialGrid, absolute: bool, scheme: Interpolation) -> Result<SpatialField> {
    let spec = f.spec;
    if spec.n != 2 || grid.n != 2 {
        return Err(LabError::Unsupported("free-streaming velocity averages are implemented for n = 2".into()));
    }
    let (ny, nv, m) = (spec.nx, spec.nv, grid.points);
    let targets: Vec<f64> = (0..m).map(|a| grid.at(a)).collect();
    let t = f.time;
    let axis = ShearAxis::new(&spec, t, scheme);

    // Pass 1: integrate out v⁰ for every (y¹, v¹): h[X⁰][y¹][v¹].
    let mut partial = vec![0.0; m * ny * nv];
    let writer = par::DisjointWriter::new(&mut partial);
    par::for_each_task_with(
        ny * nv,
        || vec![0.0; ny * nv],
        |plane, task| {
            let (y1, v1) = (task / nv, task % nv);
            for y0 in 0..ny {
                for v0 in 0..nv {
                    let val = f.values[((y0 * ny + y1) * nv + v0) * nv + v1];
                    plane[y0 * nv + v0] = if absolute { val.abs() } else { val };
                }
            }
            let out = axis.integrate_plane(plane, &targets);
            for (a, val) in out.into_iter().enumerate() {
                // SAFETY: each task owns the (y1, v1) column of `partial`.
                unsafe { writer.set((a * ny + y1) * nv + v1, val) };
            }
        },
    );
    // Pass 2: integrate out v¹ for every X⁰.
    let rows = par::map_range(m, |a| {
        let plane = partial[a * ny * nv..(a + 1) * ny * nv].to_vec();
        axis.integrate_plane(&plane, &targets)
    });
    SpatialField::scalar(*grid, rows.into_iter().flatten().collect())
}

/// Line integrals `∫ P(X − vt, v) dv` of a `(y, v)` plane sampled on the grid.
struct ShearAxis {
    t: f64,
    y0: f64,
    dy: f64,
    v0: f64,
    dv: f64,
    ny: usize,
    nv: usize,
    along_y: bool,
    y_interp: LineInterpolator,
    v_interp: LineInterpolator,
    scheme: Interpolation,
}

impl ShearAxis {
    fn new(spec: &GridSpec, t: f64, scheme: Interpolation) -> Self {
        let (dy, dv) = (spec.dx(), spec.dv());
        Self {
            t,
            y0: spec.x_at(0),
            dy,
            v0: spec.v_at(0),
            dv,
            ny: spec.nx,
            nv: spec.nv,
            along_y: t * dv <= dy,
            y_interp: LineInterpolator::new(spec.nx, scheme),
            v_interp: LineInterpolator::new(spec.nv, scheme),
            scheme,
        }
    }

    fn integrate_plane(&self, plane: &[f64], targets: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; targets.len()];
        if self.along_y {
            // Σ_k Δv · P(X − v_k t, v_k), interpolating in y.
            let mut line = vec![0.0; self.ny];
            for k in 0..self.nv {
                for (j, l) in line.iter_mut().enumerate() {
                    *l = plane[j * self.nv + k];
                }
                if line.iter().all(|&v| v == 0.0) {
                    continue;
                }
                self.y_interp.prepare(&mut line);
                let vk = self.v0 + k as f64 * self.dv;
                for (o, &x) in out.iter_mut().zip(targets) {
                    let p = (x - vk * self.t - self.y0) / self.dy;
                    if p > -2.0 && p < self.ny as f64 + 1.0 {
                        *o += self.dv * eval_line(&line, p, self.scheme);
                    }
                }
            }
        } else {
            // (Δy/t) Σ_j P(y_j, (X − y_j)/t), interpolating in v.
            let mut line = vec![0.0; self.nv];
            let w = self.dy / self.t;
            for j in 0..self.ny {
                line.copy_from_slice(&plane[j * self.nv..(j + 1) * self.nv]);
                if line.iter().all(|&v| v == 0.0) {
                    continue;
                }
                self.v_interp.prepare(&mut line);
                let yj = self.y0 + j as f64 * self.dy;
                for (o, &x) in out.iter_mut().zip(targets) {
                    let q = ((x - yj) / self.t - self.v0) / self.dv;
                    if q > -2.0 && q < self.nv as f64 + 1.0 {
                        *o += w * eval_line(&line, q, self.scheme);
                    }
                }
            }
        }
        out
    }
}

/// Applies a first-order operator with polynomial coefficients by 4th-order
/// differences; coefficients are evaluated at `(t, cell centre)`.
///
/// In the free-streaming frame the operator is first rewritten in `(y, v)`
/// coordinates, which requires `t` to equal the density's time tag.
pub fn apply_vfield(f: &PhaseDensity, e: &FieldExpression, t: f64) -> Result<PhaseDensity> {
    if e.has_slot(Slot::T) {
        return Err(invalid("apply_vfield rejects expressions containing ∂_t"));
    }
    if e.dimension() != f.spec.n {
        return Err(invalid("expression and density dimensions differ"));
    }
    let local = match f.frame {
        Frame::Lab => e.clone(),
        Frame::FreeStreaming => {
            if (t - f.time).abs() > 1e-12 * (1.0 + t.abs()) {
                return Err(LabError::Desynchronized { expected: f.time, found: t });
            }
            e.to_free_streaming()
        }
    };
    let spec = f.spec;
    let n = spec.n;
    let shape = spec.shape();
    let strides = spec.strides();
    let terms: Vec<(usize, crate::vfield::CompiledPolynomial)> = local
        .slots()
        .map(|(s, c)| {
            let axis = match *s {
                Slot::X(i) => spec.x_axis(i),
                Slot::V(i) => spec.v_axis(i),
                Slot::T => unreachable!("∂_t rejected above"),
            };
            (axis, c.compile())
        })
        .collect();
    let zeroth = local.zeroth().compile();
    let src = &f.values;
    let values = par::map_range(spec.len(), |idx| {
        let mut x = [0.0; 3];
        let mut v = [0.0; 3];
        decode(&spec, idx, &mut x[..n], &mut v[..n]);
        let mut acc = if zeroth.is_zero() { 0.0 } else { zeroth.eval(t, &x[..n], &v[..n]) * src[idx] };
        for (axis, coeff) in &terms {
            let pos = (idx / strides[*axis]) % shape[*axis];
            let d = d1(src, idx, strides[*axis], pos, shape[*axis], spec.spacing(*axis));
            acc += coeff.eval(t, &x[..n], &v[..n]) * d;
        }
        acc
    });
    Ok(PhaseDensity { spec, values, time: f.time, frame: f.frame })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vfield::{make_gamma, Polynomial, Variable};
    use std::f64::consts::PI;

    fn gaussian(eps: f64) -> impl Fn(&[f64], &[f64]) -> f64 + Sync + Send {
        move |x, v| eps * (-(x.iter().map(|a| a * a).sum::<f64>()) - v.iter().map(|a| a * a).sum::<f64>()).exp()
    }

    #[test]
    fn gaussian_mass_and_density() {
        let spec = GridSpec::new(2, 6.0, 6.0, 48, 48).unwrap();
        let f = sample_function(spec, gaussian(1e-3)).unwrap();
        assert!((f.mass() / (1e-3 * PI * PI) - 1.0).abs() < 1e-6);
        assert!((l1_norm(&f) / (1e-3 * PI * PI) - 1.0).abs() < 1e-6);
        let rho = velocity_average(&f, false).unwrap();
        for (idx, r) in rho.values.iter().enumerate() {
            let x = rho.grid.point(idx);
            let exact = 1e-3 * PI * (-(x[0] * x[0] + x[1] * x[1])).exp();
            assert!((r - exact).abs() < 1e-6 * 1e-3 * PI);
        }
    }

    #[test]
    fn zero_density() {
        let spec = GridSpec::new(2, 2.0, 2.0, 8, 8).unwrap();
        let f = PhaseDensity::zeros(spec);
        assert_eq!(l1_norm(&f), 0.0);
        assert!(velocity_average(&f, true).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_derivative_is_fourth_order() {
        let err = |nx: usize| {
            let spec = GridSpec::new(2, 5.0, 5.0, nx, 16).unwrap();
            let f = sample_function(spec, gaussian(1.0)).unwrap();
            let dx = FieldExpression::partial(2, Slot::X(0));
            let g = apply_vfield(&f, &dx, 0.0).unwrap();
            let mut worst = 0.0f64;
            let mut x = [0.0; 2];
            let mut v = [0.0; 2];
            for (idx, val) in g.values.iter().enumerate() {
                f.coordinates(idx, &mut x, &mut v);
                let exact = -2.0 * x[0] * f.values[idx];
                worst = worst.max((val - exact).abs());
            }
            worst
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 11.0, "ratio {ratio}");
    }

    #[test]
    fn boost_at_time_zero_is_velocity_derivative() {
        let spec = GridSpec::new(2, 4.0, 4.0, 16, 16).unwrap();
        let f = sample_function(spec, gaussian(1.0)).unwrap();
        let gamma = make_gamma(2).unwrap();
        let a = apply_vfield(&f, &gamma[0].expression(), 0.0).unwrap();
        let b = apply_vfield(&f, &FieldExpression::partial(2, Slot::V(0)), 0.0).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn time_slot_rejected() {
        let spec = GridSpec::new(2, 4.0, 4.0, 8, 8).unwrap();
        let f = PhaseDensity::zeros(spec);
        let e = FieldExpression::slot(2, Slot::T, Polynomial::var(2, Variable::X(0)));
        assert!(apply_vfield(&f, &e, 0.0).is_err());
    }

    #[test]
    fn streaming_average_at_time_zero_matches_lab() {
        let spec = GridSpec::new(2, 5.0, 5.0, 32, 32).unwrap();
        let f = sample_function(spec, gaussian(1.0)).unwrap();
        let lab = velocity_average(&f, false).unwrap();
        let g = f.clone().with_frame(Frame::FreeStreaming);
        let fs = velocity_average(&g, false).unwrap();
        for (a, b) in lab.values.iter().zip(&fs.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn streaming_average_matches_free_transport_closed_form() {
        let spec = GridSpec::new(2, 6.0, 5.0, 48, 48).unwrap();
        let mut g = sample_function(spec, gaussian(1.0)).unwrap().with_frame(Frame::FreeStreaming);
        for t in [0.5, 3.0, 12.0] {
            g.time = t;
            let grid = SpatialGrid::new(2, 6.0 + 5.0 * t, 64).unwrap();
            let rho = velocity_average_on(&g, &grid, false, Interpolation::CubicSpline).unwrap();
            let s = 1.0 + t * t;
            let mut worst = 0.0f64;
            for (idx, r) in rho.values.iter().enumerate() {
                let x = grid.point(idx);
                let exact = PI / s * (-(x[0] * x[0] + x[1] * x[1]) / s).exp();
                worst = worst.max((r - exact).abs());
            }
            assert!(worst < 2e-4 * PI / s, "t={t}: {worst}");
        }
    }
}

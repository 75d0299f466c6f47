//! Potentials `φ = G ∗ ρ` on uniform grids by zero-padded FFT convolution,
//! with a direct-sum oracle.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bessel::k0_fast;
use super::fft::PaddedFft;
use super::kernel::{kernel_value, KernelKind, KernelSpec};
use crate::error::{invalid, LabError, Result};
use crate::grid::{SpatialField, SpatialGrid};
use crate::par;
use crate::quadrature::{integrate, Tolerance};

/// `lim_{R→∞} (∫_{|x|<R} d³x/|x| − Σ'_{j∈ℤ³, |j|<R} 1/|j|)`: the constant
/// that makes the simple-cubic lattice sum of `1/|j|` match the integral.
pub const CUBIC_LATTICE_COULOMB: f64 = 2.837_297_479_480_619;

/// Relative residual above which a solve is flagged.
pub const RESIDUAL_WARNING: f64 = 1e-3;

/// Value assigned to the kernel's origin sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum SingularCellRule {
    /// Origin weight chosen so the discrete sum reproduces the continuous
    /// convolution to fourth order (lattice-sum correction).
    #[default]
    LatticeCorrected,
    /// Exact average of the kernel over the origin cell.
    CellAverage,
}

impl SingularCellRule {
    pub fn name(self) -> &'static str {
        match self {
            SingularCellRule::LatticeCorrected => "lattice-corrected",
            SingularCellRule::CellAverage => "cell-average",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lattice-corrected" => Some(SingularCellRule::LatticeCorrected),
            "cell-average" => Some(SingularCellRule::CellAverage),
            _ => None,
        }
    }
}

/// How a potential was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    Fast,
    Direct,
}

/// A potential with its gradient and quality flags.
#[derive(Clone, Debug)]
pub struct FieldSolution {
    pub phi: SpatialField,
    pub grad_phi: SpatialField,
    pub residual_norm: f64,
    pub method: SolveMethod,
    /// Source mass within two cells of the boundary exceeds 1e−10 of the total.
    pub boundary_contaminated: bool,
    pub residual_warning: bool,
}

/// Origin sample of the discrete kernel at spacing `h`.
pub fn origin_weight(spec: KernelSpec, h: f64, rule: SingularCellRule) -> Result<f64> {
    if !(h > 0.0) {
        return Err(invalid("grid spacing must be positive"));
    }
    match rule {
        SingularCellRule::CellAverage => cell_average(spec, h),
        SingularCellRule::LatticeCorrected => match (spec.kind, spec.n) {
            (KernelKind::Poisson, 3) => Ok(-CUBIC_LATTICE_COULOMB / (4.0 * PI * h)),
            (KernelKind::Yukawa, 3) => Ok(-CUBIC_LATTICE_COULOMB / (4.0 * PI * h) + 1.0 / (4.0 * PI)),
            (KernelKind::Yukawa, 2) => Ok(mass_preserving_weight_2d(h)),
            _ => Err(LabError::Unsupported(format!("grid kernels for {} n={}", spec.kind.name(), spec.n))),
        },
    }
}

/// `(∫G − h² Σ'_{j∈ℤ²} G(|j|h))/h²` for the 2D Yukawa kernel (`∫G = −1`).
fn mass_preserving_weight_2d(h: f64) -> f64 {
    let r_max = 42.0;
    let jmax = (r_max / h).ceil() as i64;
    // One quadrant {j₁ ≥ 1, j₂ ≥ 0} times four covers ℤ² \ {0}.
    let rows = par::map_range(jmax as usize, |a| {
        let j1 = (a + 1) as f64;
        par::compensated_sum((0..=jmax).map(|j2| {
            let r = h * (j1 * j1 + (j2 * j2) as f64).sqrt();
            if r > r_max {
                0.0
            } else {
                -k0_fast(r) / (2.0 * PI)
            }
        }))
    });
    let lattice = 4.0 * par::pairwise_sum(&rows);
    (-1.0 - h * h * lattice) / (h * h)
}

/// `h^{−n}∫_{cell} G`, splitting the cell into `2n` pyramids with apex at the
/// origin so the radial singularity is absorbed by the Jacobian.
fn cell_average(spec: KernelSpec, h: f64) -> Result<f64> {
    let n = spec.n;
    let tol = Tolerance::relative(1e-11).with_abs(1e-14);
    let g = |r: f64| kernel_value(spec, r).unwrap_or(0.0);
    // Point on the face: (h/2, u, w); ray parameter s ∈ (0, 1]; Jacobian s^{n−1}·h/2.
    let ray = |p: f64| integrate(|s: f64| if s <= 0.0 { 0.0 } else { g(s * p) * s.powi(n as i32 - 1) }, 0.0, 1.0, tol).value;
    let face = match n {
        2 => {
            // 2 ∫₀^{h/2} du by symmetry.
            2.0 * integrate(|u| ray((0.25 * h * h + u * u).sqrt()), 0.0, 0.5 * h, tol).require(&tol)?
        }
        3 => {
            4.0 * integrate(|u| integrate(|w| ray((0.25 * h * h + u * u + w * w).sqrt()), 0.0, 0.5 * h, tol).value, 0.0, 0.5 * h, tol)
                .require(&tol)?
        }
        _ => return Err(LabError::Unsupported("cell averages for n > 3".into())),
    };
    Ok(2.0 * n as f64 * face * 0.5 * h / h.powi(n as i32))
}

/// Relative L² residual of `Δ_h φ − m²φ − ρ` over points two cells from the boundary.
pub fn residual(spec: KernelSpec, phi: &SpatialField, rho: &SpatialField) -> Result<f64> {
    if phi.grid != rho.grid || phi.components != 1 || rho.components != 1 {
        return Err(invalid("residual needs scalar phi and rho on one grid"));
    }
    let (lap, mask) = phi.laplacian_interior()?;
    let m2 = spec.kind.mass_squared();
    let num = par::sum_range(lap.len(), |i| if mask[i] { (lap[i] - m2 * phi.values[i] - rho.values[i]).powi(2) } else { 0.0 });
    let den = par::sum_range(lap.len(), |i| if mask[i] { rho.values[i].powi(2) } else { 0.0 });
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}

/// Fraction of `|ρ|` within two cells of a face.
fn boundary_fraction(rho: &SpatialField) -> f64 {
    let g = rho.grid;
    let total = par::sum_slice(&rho.values, f64::abs);
    if total == 0.0 {
        return 0.0;
    }
    let near = par::sum_range(g.len(), |idx| {
        let mut m = [0usize; 3];
        g.unflatten(idx, &mut m[..g.n]);
        if m[..g.n].iter().any(|&i| i < 2 || i + 2 >= g.points) {
            rho.values[idx].abs()
        } else {
            0.0
        }
    });
    near / total
}

/// Convolution engine for one kernel on one grid; the kernel spectrum is cached.
#[derive(Clone, Debug)]
pub struct FieldSolver {
    pub spec: KernelSpec,
    pub grid: SpatialGrid,
    pub rule: SingularCellRule,
    origin: f64,
    fft: PaddedFft,
    /// FFT of the padded kernel, pre-multiplied by `hⁿ/Mⁿ`.
    spectrum: Vec<Complex64>,
}

impl FieldSolver {
    pub fn new(spec: KernelSpec, grid: SpatialGrid, rule: SingularCellRule) -> Result<Self> {
        if spec.n != grid.n {
            return Err(invalid("kernel and grid dimensions differ"));
        }
        if !(2..=3).contains(&grid.n) {
            return Err(LabError::InvalidDimension { n: grid.n, reason: "grid solvers support n in {2, 3}" });
        }
        let h = grid.h();
        let origin = origin_weight(spec, h, rule)?;
        let nn = grid.points;
        let m = 2 * nn;
        let fft = PaddedFft::new(grid.n, m, nn);
        let dims = grid.n;
        let mut kernel: Vec<Complex64> = par::map_range(fft.len(), |idx| {
            let mut r2 = 0.0;
            let mut rest = idx;
            for _ in 0..dims {
                let k = rest % m;
                rest /= m;
                if k == nn {
                    return Complex64::default();
                }
                let off = if k < nn { k as f64 } else { k as f64 - m as f64 };
                r2 += off * off;
            }
            let value = if r2 == 0.0 { origin } else { kernel_value(spec, h * r2.sqrt()).unwrap_or(0.0) };
            Complex64::new(value, 0.0)
        });
        fft.forward_full(&mut kernel);
        let scale = h.powi(dims as i32) / fft.len() as f64;
        for k in kernel.iter_mut() {
            *k *= scale;
        }
        Ok(Self { spec, grid, rule, origin, fft, spectrum: kernel })
    }

    /// The same Poisson solver on a grid with identical point count and a
    /// different extent: the kernel and origin weight scale as `1/h`, so the
    /// cached spectrum is rescaled instead of recomputed.
    pub fn rescaled(&self, grid: SpatialGrid) -> Result<Self> {
        if self.spec.kind != KernelKind::Poisson || self.spec.n != 3 || grid.points != self.grid.points || grid.n != 3 {
            return Self::new(self.spec, grid, self.rule);
        }
        let ratio = grid.h() / self.grid.h();
        // Kernel ∝ 1/h, convolution weight ∝ h³: net factor h².
        let factor = ratio * ratio;
        let spectrum = self.spectrum.iter().map(|c| c * factor).collect();
        Ok(Self { grid, origin: self.origin / ratio, spectrum, ..self.clone() })
    }

    pub fn origin_weight(&self) -> f64 {
        self.origin
    }

    /// Discrete kernel sample at integer offset `d` (lattice units).
    pub fn kernel_sample(&self, d: &[isize]) -> f64 {
        let r2: f64 = d.iter().map(|&k| (k * k) as f64).sum();
        if r2 == 0.0 {
            self.origin
        } else {
            kernel_value(self.spec, self.grid.h() * r2.sqrt()).unwrap_or(0.0)
        }
    }

    /// `φ_i = hⁿ Σ_j K_{i−j} ρ_j` by FFT.
    pub fn convolve(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid;
        if rho.len() != g.len() {
            return Err(invalid("density length does not match the solver grid"));
        }
        let (nn, m, dims) = (g.points, self.fft.padded, g.n);
        let mut buf = vec![Complex64::default(); self.fft.len()];
        let mut multi = [0usize; 3];
        for (idx, r) in rho.iter().enumerate() {
            g.unflatten(idx, &mut multi[..dims]);
            let p = multi[..dims].iter().fold(0, |acc, &i| acc * m + i);
            buf[p] = Complex64::new(*r, 0.0);
        }
        self.fft.forward(&mut buf);
        let spec = &self.spectrum;
        par::for_each_chunk_mut(&mut buf, 1 << 14, |c, chunk| {
            let base = c << 14;
            for (k, z) in chunk.iter_mut().enumerate() {
                *z *= spec[base + k];
            }
        });
        self.fft.inverse(&mut buf);
        let out = par::map_range(g.len(), |idx| {
            let mut mi = [0usize; 3];
            g.unflatten(idx, &mut mi[..dims]);
            let p = mi[..dims].iter().fold(0, |acc, &i| acc * m + i);
            buf[p].re
        });
        debug_assert!(nn * 2 == m);
        Ok(out)
    }

    /// Direct `O(M²)` sum with the same kernel samples.
    pub fn convolve_direct(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let g = self.grid;
        if rho.len() != g.len() {
            return Err(invalid("density length does not match the solver grid"));
        }
        let dims = g.n;
        let nn = g.points as isize;
        // Table over offsets in (−N, N)ⁿ.
        let side = (2 * nn - 1) as usize;
        let table = par::map_range(side.pow(dims as u32), |t| {
            let mut d = [0isize; 3];
            let mut rest = t;
            for a in (0..dims).rev() {
                d[a] = (rest % side) as isize - (nn - 1);
                rest /= side;
            }
            self.kernel_sample(&d[..dims])
        });
        let hn = g.cell_volume();
        let sources: Vec<(usize, f64)> = rho.iter().copied().enumerate().filter(|(_, r)| *r != 0.0).collect();
        Ok(par::map_range(g.len(), |i| {
            let mut mi = [0usize; 3];
            g.unflatten(i, &mut mi[..dims]);
            let mut mj = [0usize; 3];
            par::compensated_sum(sources.iter().map(|&(j, r)| {
                g.unflatten(j, &mut mj[..dims]);
                let t = (0..dims).fold(0usize, |acc, a| acc * side + (mi[a] as isize - mj[a] as isize + nn - 1) as usize);
                table[t] * r
            })) * hn
        }))
    }

    fn finish(&self, rho: &SpatialField, phi: Vec<f64>, method: SolveMethod) -> Result<FieldSolution> {
        let phi = SpatialField::scalar(self.grid, phi)?;
        phi.check_finite("potential")?;
        let grad_phi = phi.gradient()?;
        let residual_norm = residual(self.spec, &phi, rho)?;
        Ok(FieldSolution {
            phi,
            grad_phi,
            residual_norm,
            method,
            boundary_contaminated: boundary_fraction(rho) > crate::grid::BOUNDARY_TOLERANCE,
            residual_warning: residual_norm > RESIDUAL_WARNING,
        })
    }

    fn check_source(&self, rho: &SpatialField) -> Result<()> {
        if rho.grid != self.grid || rho.components != 1 {
            return Err(invalid("solve expects a scalar density on the solver grid"));
        }
        rho.check_finite("density")
    }

    /// `φ = G ∗ ρ`, `∇φ`, residual and flags.
    pub fn solve(&self, rho: &SpatialField) -> Result<FieldSolution> {
        self.check_source(rho)?;
        let phi = self.convolve(&rho.values)?;
        self.finish(rho, phi, SolveMethod::Fast)
    }

    pub fn solve_direct(&self, rho: &SpatialField) -> Result<FieldSolution> {
        self.check_source(rho)?;
        let phi = self.convolve_direct(&rho.values)?;
        self.finish(rho, phi, SolveMethod::Direct)
    }

    /// `G ∗ … ∗ G ∗ ρ` (`k` convolutions); `k = 0` returns `ρ`.
    pub fn iterated_convolution(&self, rho: &SpatialField, k: usize) -> Result<SpatialField> {
        self.check_source(rho)?;
        let mut cur = rho.values.clone();
        for _ in 0..k {
            cur = self.convolve(&cur)?;
        }
        SpatialField::scalar(self.grid, cur)
    }
}

/// One-shot fast solve.
pub fn solve_field(spec: KernelSpec, rho: &SpatialField) -> Result<FieldSolution> {
    FieldSolver::new(spec, rho.grid, SingularCellRule::default())?.solve(rho)
}

/// One-shot direct-sum solve.
pub fn solve_field_direct(spec: KernelSpec, rho: &SpatialField) -> Result<FieldSolution> {
    FieldSolver::new(spec, rho.grid, SingularCellRule::default())?.solve_direct(rho)
}

/// `G₁ ∗^{(k)} ρ` for the Yukawa kernel of the grid's dimension.
pub fn iterated_yukawa_convolution(rho: &SpatialField, k: usize) -> Result<SpatialField> {
    if k == 0 {
        return Ok(rho.clone());
    }
    let spec = KernelSpec::yukawa(rho.grid.n)?;
    FieldSolver::new(spec, rho.grid, SingularCellRule::default())?.iterated_convolution(rho, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: SpatialGrid, width: f64) -> SpatialField {
        let n = grid.n as i32;
        let norm = (2.0 * PI * width * width).powf(-(n as f64) / 2.0);
        SpatialField::sample(grid, move |x| norm * (-x.iter().map(|a| a * a).sum::<f64>() / (2.0 * width * width)).exp())
    }

    #[test]
    fn zero_source_gives_zero_potential() {
        let g = SpatialGrid::new(2, 4.0, 16).unwrap();
        let sol = solve_field(KernelSpec::yukawa(2).unwrap(), &SpatialField::zeros(g, 1)).unwrap();
        assert!(sol.phi.values.iter().all(|&v| v == 0.0));
        assert!(sol.grad_phi.values.iter().all(|&v| v == 0.0));
        assert_eq!(sol.residual_norm, 0.0);
    }

    #[test]
    fn fast_matches_direct_2d_and_3d() {
        for (spec, pts) in [(KernelSpec::yukawa(2).unwrap(), 16), (KernelSpec::poisson(3).unwrap(), 12)] {
            let g = SpatialGrid::new(spec.n, 3.0, pts).unwrap();
            let rho = SpatialField::sample(g, |x| (x.iter().sum::<f64>() * 3.1).sin() * (-x.iter().map(|a| a * a).sum::<f64>()).exp());
            let solver = FieldSolver::new(spec, g, SingularCellRule::default()).unwrap();
            let a = solver.convolve(&rho.values).unwrap();
            let b = solver.convolve_direct(&rho.values).unwrap();
            let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-10 * scale, "{spec:?}: {err}");
        }
    }

    #[test]
    fn single_cell_gives_kernel_translate() {
        let g = SpatialGrid::new(2, 2.0, 8).unwrap();
        let mut rho = SpatialField::zeros(g, 1);
        rho.values[3 * 8 + 4] = 1.0 / g.cell_volume();
        let solver = FieldSolver::new(KernelSpec::yukawa(2).unwrap(), g, SingularCellRule::default()).unwrap();
        let phi = solver.convolve(&rho.values).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expect = solver.kernel_sample(&[i as isize - 3, j as isize - 4]);
                assert!((phi[i * 8 + j] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn yukawa_2d_residual_is_fourth_order() {
        let spec = KernelSpec::yukawa(2).unwrap();
        let res: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&pts| {
                let g = SpatialGrid::new(2, 8.0, pts).unwrap();
                solve_field(spec, &gaussian(g, 1.0)).unwrap().residual_norm
            })
            .collect();
        assert!(res[1] < 1e-3, "{res:?}");
        assert!(res[0] / res[1] > 8.0 && res[1] / res[2] > 8.0, "{res:?}");
    }

    #[test]
    fn cell_average_rule_is_second_order() {
        let spec = KernelSpec::yukawa(2).unwrap();
        let res: Vec<f64> = [32, 64]
            .iter()
            .map(|&pts| {
                let g = SpatialGrid::new(2, 8.0, pts).unwrap();
                FieldSolver::new(spec, g, SingularCellRule::CellAverage).unwrap().solve(&gaussian(g, 1.0)).unwrap().residual_norm
            })
            .collect();
        let ratio = res[0] / res[1];
        assert!(ratio > 3.0 && ratio < 6.0, "{res:?}");
    }

    #[test]
    fn cell_average_of_coulomb_kernel() {
        // ∫_{[−1/2,1/2]³} d³x/|x| = 3 ln(2 + √3) − π/2
        let w = cell_average(KernelSpec::poisson(3).unwrap(), 1.0).unwrap();
        assert!((w * -4.0 * PI - (3.0 * (2.0 + 3f64.sqrt()).ln() - PI / 2.0)).abs() < 1e-9, "{}", -4.0 * PI * w);
    }

    #[test]
    fn yukawa_potential_is_negative_and_decays() {
        let g = SpatialGrid::new(2, 8.0, 64).unwrap();
        let sol = solve_field(KernelSpec::yukawa(2).unwrap(), &gaussian(g, 0.5)).unwrap();
        assert!(sol.phi.values.iter().all(|&v| v < 0.0));
        // Far field ∝ K₀(r): compare two radii along an axis.
        let row = |i: usize| sol.phi.values[i * 64 + 32];
        let (x1, x2) = (g.at(50), g.at(58));
        let ratio = row(58) / row(50);
        let expect = k0_fast((x2 * x2 + g.at(32).powi(2)).sqrt()) / k0_fast((x1 * x1 + g.at(32).powi(2)).sqrt());
        assert!((ratio / expect - 1.0).abs() < 0.05);
    }

    #[test]
    fn rescaled_poisson_solver_matches_fresh_one() {
        let g1 = SpatialGrid::new(3, 4.0, 12).unwrap();
        let g2 = SpatialGrid::new(3, 7.0, 12).unwrap();
        let spec = KernelSpec::poisson(3).unwrap();
        let s1 = FieldSolver::new(spec, g1, SingularCellRule::default()).unwrap();
        let a = s1.rescaled(g2).unwrap();
        let b = FieldSolver::new(spec, g2, SingularCellRule::default()).unwrap();
        let rho: Vec<f64> = (0..g2.len()).map(|i| ((i * 37 % 101) as f64).cos()).collect();
        let (pa, pb) = (a.convolve(&rho).unwrap(), b.convolve(&rho).unwrap());
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn iterated_convolution_respects_young() {
        let g = SpatialGrid::new(2, 10.0, 64).unwrap();
        let rho = gaussian(g, 0.7);
        let l1 = rho.l1_norm();
        for k in 0..=3 {
            let out = iterated_yukawa_convolution(&rho, k).unwrap();
            assert!(out.l1_norm() <= l1 * (1.0 + 1e-6), "k={k}");
        }
        let one = iterated_yukawa_convolution(&rho, 1).unwrap();
        assert_eq!(one.values, solve_field(KernelSpec::yukawa(2).unwrap(), &rho).unwrap().phi.values);
    }
}

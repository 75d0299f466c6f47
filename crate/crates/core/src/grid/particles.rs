//! Weighted particle ensembles with cloud-in-cell deposition and gather.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::field::SpatialField;
use super::spec::SpatialGrid;
use crate::error::{invalid, LabError, Result};
use crate::par;

/// Fixed number of partial grids in a deposit; independent of worker count.
pub const DEPOSIT_PARTITIONS: usize = 16;

/// `P` particles in `ℝⁿ × ℝⁿ`, stored as flat `n`-strided arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub n: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub weights: Vec<f64>,
    pub time: f64,
}

/// A deposited density together with the weight that fell outside the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Deposit {
    pub rho: SpatialField,
    pub off_domain_weight: f64,
    pub total_weight: f64,
}

impl Deposit {
    pub fn off_domain_fraction(&self) -> f64 {
        if self.total_weight > 0.0 {
            self.off_domain_weight / self.total_weight
        } else {
            0.0
        }
    }
}

impl ParticleEnsemble {
    pub fn new(n: usize, positions: Vec<f64>, velocities: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 || positions.len() != n * weights.len() || velocities.len() != positions.len() {
            return Err(invalid("particle arrays have inconsistent lengths"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("particle weights must be positive and finite"));
        }
        if positions.iter().chain(&velocities).any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite("particle phase coordinates"));
        }
        Ok(Self { n, positions, velocities, weights, time: 0.0 })
    }

    /// Samples `count` equal-weight particles from `ε·exp(−|x|²−|v|²)` (total mass `ε πⁿ`).
    pub fn sample_gaussian(n: usize, count: usize, eps: f64, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(invalid("particle count must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).map_err(|e| invalid(e.to_string()))?;
        let mut positions = Vec::with_capacity(n * count);
        let mut velocities = Vec::with_capacity(n * count);
        for _ in 0..count {
            for _ in 0..n {
                positions.push(normal.sample(&mut rng));
            }
            for _ in 0..n {
                velocities.push(normal.sample(&mut rng));
            }
        }
        let w = eps * std::f64::consts::PI.powi(n as i32) / count as f64;
        Self::new(n, positions, velocities, vec![w; count])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        par::sum_slice(&self.weights, |w| w)
    }

    /// `x ← x + v·dt`.
    pub fn drift(&mut self, dt: f64) {
        let v = &self.velocities;
        par::for_each_chunk_mut(&mut self.positions, par::REDUCTION_CHUNK, |i, chunk| {
            let start = i * par::REDUCTION_CHUNK;
            for (k, x) in chunk.iter_mut().enumerate() {
                *x += v[start + k] * dt;
            }
        });
        self.time += dt;
    }

    /// `v ← v + scale·F(x)` with `F` gathered from an `n`-component field.
    pub fn kick(&mut self, force: &SpatialField, scale: f64) {
        let n = self.n;
        let x = &self.positions;
        par::for_each_chunk_mut(&mut self.velocities, n * 1024, |i, chunk| {
            let first = i * 1024;
            for (k, vel) in chunk.chunks_mut(n).enumerate() {
                let p = first + k;
                let g = gather(force, &x[p * n..(p + 1) * n]);
                for (c, vc) in vel.iter_mut().enumerate() {
                    *vc += scale * g[c];
                }
            }
        });
    }

    /// Sample spatial variance `Σ w|x − x̄|² / Σ w`.
    pub fn spatial_variance(&self) -> f64 {
        let n = self.n;
        let total = self.total_weight();
        let mean: Vec<f64> = (0..n).map(|c| par::sum_range(self.len(), |p| self.weights[p] * self.positions[p * n + c]) / total).collect();
        par::sum_range(self.len(), |p| self.weights[p] * (0..n).map(|c| (self.positions[p * n + c] - mean[c]).powi(2)).sum::<f64>()) / total
    }
}

/// Multilinear stencil of a coordinate on a cell-centred grid: `Some((base, frac))`
/// when both neighbours exist.
#[inline]
fn cic_axis(grid: &SpatialGrid, x: f64) -> Option<(usize, f64)> {
    let p = grid.position(x);
    let base = p.floor();
    if base < 0.0 || base + 1.0 >= grid.points as f64 || !p.is_finite() {
        return None;
    }
    Some((base as usize, p - base))
}

/// Cloud-in-cell deposit `ρ = Σ w_p S(x − x_p)/hⁿ`. Particles outside the
/// interpolation domain `[−L + h/2, L − h/2)ⁿ` are counted, not deposited.
pub fn deposit(p: &ParticleEnsemble, grid: &SpatialGrid) -> Result<Deposit> {
    if grid.n != p.n {
        return Err(invalid("particle and grid dimensions differ"));
    }
    let n = p.n;
    let count = p.len();
    let per = count.div_ceil(DEPOSIT_PARTITIONS).max(1);
    let parts: Vec<(Vec<f64>, f64)> = par::map_range(DEPOSIT_PARTITIONS, |part| {
        let mut acc = vec![0.0; grid.len()];
        let mut off = 0.0;
        let strides = grid.strides();
        let lo = (part * per).min(count);
        let hi = ((part + 1) * per).min(count);
        let mut stencil = [(0usize, 0.0f64); 3];
        'particles: for q in lo..hi {
            let x = &p.positions[q * n..(q + 1) * n];
            for a in 0..n {
                match cic_axis(grid, x[a]) {
                    Some(s) => stencil[a] = s,
                    None => {
                        off += p.weights[q];
                        continue 'particles;
                    }
                }
            }
            for corner in 0..(1usize << n) {
                let mut w = p.weights[q];
                let mut idx = 0;
                for (a, &(base, frac)) in stencil[..n].iter().enumerate() {
                    let up = (corner >> a) & 1;
                    w *= if up == 1 { frac } else { 1.0 - frac };
                    idx += (base + up) * strides[a];
                }
                acc[idx] += w;
            }
        }
        (acc, off)
    });
    let inv_volume = 1.0 / grid.cell_volume();
    let off_domain_weight = par::pairwise_sum(&parts.iter().map(|(_, o)| *o).collect::<Vec<_>>());
    let grids: Vec<Vec<f64>> = parts.into_iter().map(|(g, _)| g).collect();
    let values = pairwise_grid_sum(grids).into_iter().map(|v| v * inv_volume).collect();
    Ok(Deposit { rho: SpatialField::scalar(*grid, values)?, off_domain_weight, total_weight: p.total_weight() })
}

fn pairwise_grid_sum(mut grids: Vec<Vec<f64>>) -> Vec<f64> {
    while grids.len() > 1 {
        let mut next = Vec::with_capacity(grids.len().div_ceil(2));
        let mut it = grids.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        grids = next;
    }
    grids.pop().unwrap_or_default()
}

/// Multilinear gather of every component of `field` at `x`; zero off-grid.
pub fn gather(field: &SpatialField, x: &[f64]) -> [f64; 3] {
    let grid = &field.grid;
    let n = grid.n;
    let mut out = [0.0; 3];
    let mut stencil = [(0usize, 0.0f64); 3];
    for a in 0..n {
        match cic_axis(grid, x[a]) {
            Some(s) => stencil[a] = s,
            None => return out,
        }
    }
    let strides = grid.strides();
    let m = grid.len();
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut idx = 0;
        for (a, &(base, frac)) in stencil[..n].iter().enumerate() {
            let up = (corner >> a) & 1;
            w *= if up == 1 { frac } else { 1.0 - frac };
            idx += (base + up) * strides[a];
        }
        for (c, o) in out[..field.components].iter_mut().enumerate() {
            *o += w * field.values[c * m + idx];
        }
    }
    out
}

//! Uniform tensor grids for phase space and physical space.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};

/// Default ceiling on phase-space cells (≈ 2.4 GB of `f64`).
pub const DEFAULT_CELL_BUDGET: u128 = 300_000_000;

/// Discretization of `ℝⁿ_x × ℝⁿ_v` on the box `[−X, X]ⁿ × [−V, V]ⁿ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub x_extent: f64,
    pub v_extent: f64,
    pub nx: usize,
    pub nv: usize,
}

impl GridSpec {
    /// Validated constructor under [`DEFAULT_CELL_BUDGET`].
    pub fn new(n: usize, x_extent: f64, v_extent: f64, nx: usize, nv: usize) -> Result<Self> {
        Self::with_budget(n, x_extent, v_extent, nx, nv, DEFAULT_CELL_BUDGET)
    }

    pub fn with_budget(n: usize, x_extent: f64, v_extent: f64, nx: usize, nv: usize, budget: u128) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(LabError::InvalidDimension { n, reason: "phase grids support n in {2, 3}" });
        }
        if nx < 8 || nv < 8 || !nx.is_multiple_of(2) || !nv.is_multiple_of(2) {
            return Err(invalid(format!("points per axis must be even and >= 8 (got Nx={nx}, Nv={nv})")));
        }
        if !(x_extent > 0.0 && v_extent > 0.0 && x_extent.is_finite() && v_extent.is_finite()) {
            return Err(invalid("extents must be positive and finite"));
        }
        let cells = (nx as u128).pow(n as u32) * (nv as u128).pow(n as u32);
        if cells > budget {
            return Err(LabError::MemoryBudget { cells, budget });
        }
        Ok(Self { n, x_extent, v_extent, nx, nv })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.x_extent / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_extent / self.nv as f64
    }

    /// Cell centre of index `i` on the x axis.
    pub fn x_at(&self, i: usize) -> f64 {
        -self.x_extent + (i as f64 + 0.5) * self.dx()
    }

    pub fn v_at(&self, j: usize) -> f64 {
        -self.v_extent + (j as f64 + 0.5) * self.dv()
    }

    pub fn x_cells(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    pub fn v_cells(&self) -> usize {
        self.nv.pow(self.n as u32)
    }

    pub fn len(&self) -> usize {
        self.x_cells() * self.v_cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Phase-space cell volume `ΔxⁿΔvⁿ`.
    pub fn cell_volume(&self) -> f64 {
        (self.dx() * self.dv()).powi(self.n as i32)
    }

    /// Axis lengths in storage order: x axes then v axes.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.nx; self.n];
        s.extend(std::iter::repeat_n(self.nv, self.n));
        s
    }

    /// Row-major strides matching [`GridSpec::shape`].
    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape())
    }

    /// Storage axis of `x^i` (`v` axes follow at `n + i`).
    pub fn x_axis(&self, i: usize) -> usize {
        i
    }

    pub fn v_axis(&self, i: usize) -> usize {
        self.n + i
    }

    /// Spacing of storage axis `a`.
    pub fn spacing(&self, a: usize) -> f64 {
        if a < self.n {
            self.dx()
        } else {
            self.dv()
        }
    }

    /// Cell-centre coordinate along storage axis `a` at index `i`.
    pub fn coordinate(&self, a: usize, i: usize) -> f64 {
        if a < self.n {
            self.x_at(i)
        } else {
            self.v_at(i)
        }
    }

    /// The x part as a spatial grid.
    pub fn x_grid(&self) -> SpatialGrid {
        SpatialGrid { n: self.n, extent: self.x_extent, points: self.nx }
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    strides
}

/// Cubic uniform grid `[−L, L]ⁿ` with `points` cell centres per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub n: usize,
    pub extent: f64,
    pub points: usize,
}

impl SpatialGrid {
    pub fn new(n: usize, extent: f64, points: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(LabError::InvalidDimension { n, reason: "spatial grids support n <= 3" });
        }
        if points < 4 || !(extent > 0.0 && extent.is_finite()) {
            return Err(invalid("spatial grid needs >= 4 points and a positive extent"));
        }
        Ok(Self { n, extent, points })
    }

    pub fn h(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    pub fn at(&self, i: usize) -> f64 {
        -self.extent + (i as f64 + 0.5) * self.h()
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.n as i32)
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&vec![self.points; self.n])
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.n).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
    }

    /// Coordinates of the cell centre at a flat index.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let mut m = vec![0; self.n];
        self.unflatten(idx, &mut m);
        m.iter().map(|&i| self.at(i)).collect()
    }

    /// Continuous index position `(x + L)/h − 1/2` of coordinate `x`.
    pub fn position(&self, x: f64) -> f64 {
        (x + self.extent) / self.h() - 0.5
    }
}

//! Scalar and vector fields on a [`SpatialGrid`].

use super::spec::SpatialGrid;
use super::stencil::{d1, d2_interior};
use crate::error::{invalid, LabError, Result};
use crate::interp::{lagrange_weights, split_position};
use crate::par;

/// A field with `components` values per grid point, stored component-major:
/// `values[c * grid.len() + idx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    pub grid: SpatialGrid,
    pub components: usize,
    pub values: Vec<f64>,
}

impl SpatialField {
    pub fn scalar(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, values)
    }

    pub fn new(grid: SpatialGrid, components: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != components * grid.len() {
            return Err(invalid(format!("field needs {} values, got {}", components * grid.len(), values.len())));
        }
        Ok(Self { grid, components, values })
    }

    pub fn zeros(grid: SpatialGrid, components: usize) -> Self {
        Self { grid, components, values: vec![0.0; components * grid.len()] }
    }

    /// Samples a scalar function at cell centres.
    pub fn sample<F>(grid: SpatialGrid, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let values = par::map_range(grid.len(), |idx| f(&grid.point(idx)));
        Self { grid, components: 1, values }
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let m = self.grid.len();
        &self.values[c * m..(c + 1) * m]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let m = self.grid.len();
        &mut self.values[c * m..(c + 1) * m]
    }

    /// Pointwise Euclidean norm over components.
    pub fn magnitude(&self, idx: usize) -> f64 {
        let m = self.grid.len();
        (0..self.components).map(|c| self.values[c * m + idx].powi(2)).sum::<f64>().sqrt()
    }

    /// `sup_x |F(x)|`.
    pub fn sup_norm(&self) -> f64 {
        par::max_range(self.grid.len(), |idx| self.magnitude(idx))
    }

    /// `∫ |F| dx` by midpoint rule.
    pub fn l1_norm(&self) -> f64 {
        par::sum_range(self.grid.len(), |idx| self.magnitude(idx)) * self.grid.cell_volume()
    }

    /// `∫ F dx` of a scalar field.
    pub fn integral(&self) -> f64 {
        par::sum_slice(self.component(0), |v| v) * self.grid.cell_volume()
    }

    /// 4th-order gradient of a scalar field (one-sided near the boundary).
    pub fn gradient(&self) -> Result<SpatialField> {
        if self.components != 1 {
            return Err(invalid("gradient expects a scalar field"));
        }
        let g = self.grid;
        let strides = g.strides();
        let m = g.len();
        let src = &self.values;
        let values = par::map_range(g.n * m, |k| {
            let (c, idx) = (k / m, k % m);
            let pos = (idx / strides[c]) % g.points;
            d1(src, idx, strides[c], pos, g.points, g.h())
        });
        Ok(SpatialField { grid: g, components: g.n, values })
    }

    /// 4th-order Laplacian of a scalar field at points at least 2 cells from
    /// every face; `None` elsewhere (reported as 0 with a mask).
    pub fn laplacian_interior(&self) -> Result<(Vec<f64>, Vec<bool>)> {
        if self.components != 1 {
            return Err(invalid("laplacian expects a scalar field"));
        }
        let g = self.grid;
        let strides = g.strides();
        let src = &self.values;
        let mut mask = vec![false; g.len()];
        let values = par::map_range(g.len(), |idx| {
            let mut m = [0usize; 3];
            g.unflatten(idx, &mut m[..g.n]);
            if m[..g.n].iter().any(|&i| i < 2 || i + 2 >= g.points) {
                return 0.0;
            }
            (0..g.n).map(|a| d2_interior(src, idx, strides[a], g.h())).sum()
        });
        for (idx, m) in mask.iter_mut().enumerate() {
            let mut mi = [0usize; 3];
            g.unflatten(idx, &mut mi[..g.n]);
            *m = mi[..g.n].iter().all(|&i| i >= 2 && i + 2 < g.points);
        }
        Ok((values, mask))
    }

    /// Tensor-product cubic Lagrange interpolation of component `c` at `x`
    /// (zero outside the grid).
    pub fn interpolate(&self, c: usize, x: &[f64]) -> f64 {
        let g = self.grid;
        let data = self.component(c);
        let mut bases = [0isize; 3];
        let mut weights = [[0.0; 4]; 3];
        for a in 0..g.n {
            let (b, s) = split_position(g.position(x[a]));
            if b < -2 || b > g.points as isize {
                return 0.0;
            }
            bases[a] = b - 1;
            weights[a] = lagrange_weights(s);
        }
        let np = g.points as isize;
        if g.n == 2 && bases[0] >= 0 && bases[0] + 3 < np && bases[1] >= 0 && bases[1] + 3 < np {
            let m = g.points;
            let (i0, j0) = (bases[0] as usize, bases[1] as usize);
            let wj = weights[1];
            let mut acc = 0.0;
            for (a, wa) in weights[0].iter().enumerate() {
                let row = &data[(i0 + a) * m + j0..(i0 + a) * m + j0 + 4];
                acc += wa * (wj[0] * row[0] + wj[1] * row[1] + wj[2] * row[2] + wj[3] * row[3]);
            }
            return acc;
        }
        let strides = g.strides();
        let mut acc = 0.0;
        let combos = 4usize.pow(g.n as u32);
        'outer: for k in 0..combos {
            let mut w = 1.0;
            let mut idx = 0isize;
            let mut r = k;
            for a in 0..g.n {
                let o = r % 4;
                r /= 4;
                let i = bases[a] + o as isize;
                if i < 0 || i >= np {
                    continue 'outer;
                }
                w *= weights[a][o];
                idx += i * strides[a] as isize;
            }
            acc += w * data[idx as usize];
        }
        acc
    }

    /// [`SpatialField::interpolate`] of the first (up to three) components with shared weights.
    pub fn interpolate_all(&self, x: &[f64]) -> [f64; 3] {
        let g = self.grid;
        let mut out = [0.0; 3];
        let comps = self.components.min(3);
        let np = g.points as isize;
        if g.n == 2 {
            let (bi, si) = split_position(g.position(x[0]));
            let (bj, sj) = split_position(g.position(x[1]));
            if bi >= 1 && bi + 2 < np && bj >= 1 && bj + 2 < np {
                let m = g.points;
                let (wi, wj) = (lagrange_weights(si), lagrange_weights(sj));
                let (i0, j0) = (bi as usize - 1, bj as usize - 1);
                for (c, o) in out[..comps].iter_mut().enumerate() {
                    let data = self.component(c);
                    let mut acc = 0.0;
                    for (a, wa) in wi.iter().enumerate() {
                        let row = &data[(i0 + a) * m + j0..(i0 + a) * m + j0 + 4];
                        acc += wa * (wj[0] * row[0] + wj[1] * row[1] + wj[2] * row[2] + wj[3] * row[3]);
                    }
                    *o = acc;
                }
                return out;
            }
        }
        for (c, o) in out[..comps].iter_mut().enumerate() {
            *o = self.interpolate(c, x);
        }
        out
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(LabError::NonFinite(what))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_and_laplacian_of_gaussian() {
        let g = SpatialGrid::new(2, 5.0, 128).unwrap();
        let f = SpatialField::sample(g, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let grad = f.gradient().unwrap();
        let (lap, mask) = f.laplacian_interior().unwrap();
        for idx in 0..g.len() {
            let x = g.point(idx);
            let r2 = x[0] * x[0] + x[1] * x[1];
            let e = (-r2).exp();
            assert!((grad.component(0)[idx] + 2.0 * x[0] * e).abs() < 2e-4);
            if mask[idx] {
                assert!((lap[idx] - (4.0 * r2 - 4.0) * e).abs() < 2e-3);
            }
        }
        assert!((f.integral() - std::f64::consts::PI).abs() < 1e-8);
    }

    #[test]
    fn interpolation_exact_for_cubics() {
        let g = SpatialGrid::new(3, 2.0, 10).unwrap();
        let f = SpatialField::sample(g, |x| x[0].powi(3) - x[1] * x[2] + 0.5);
        let p: [f64; 3] = [0.13, -0.41, 0.77];
        let exact = p[0].powi(3) - p[1] * p[2] + 0.5;
        assert!((f.interpolate(0, &p) - exact).abs() < 1e-12);
        assert_eq!(f.interpolate(0, &[10.0, 0.0, 0.0]), 0.0);
    }
}

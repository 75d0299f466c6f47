//! One- and two-dimensional cubic interpolation on uniform lines.
//!
//! Values outside a line are zero (the box is chosen so the density vanishes
//! there). The B-spline scheme interpolates through prefiltered coefficients;
//! the Lagrange scheme uses the four nearest samples directly.

use serde::{Deserialize, Serialize};

/// Interpolation scheme for semi-Lagrangian traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Interpolation {
    /// Cubic B-spline through prefiltered coefficients (4-point evaluation stencil).
    #[default]
    CubicSpline,
    /// 4-point cubic Lagrange.
    Lagrange4,
}

impl Interpolation {
    pub fn name(self) -> &'static str {
        match self {
            Interpolation::CubicSpline => "cubic-spline",
            Interpolation::Lagrange4 => "lagrange4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cubic-spline" | "spline" => Some(Interpolation::CubicSpline),
            "lagrange4" | "cubic" => Some(Interpolation::Lagrange4),
            _ => None,
        }
    }

    /// Weights for samples at offsets `−1, 0, 1, 2` from the base index, `s ∈ [0, 1)`.
    #[inline]
    pub fn weights(self, s: f64) -> [f64; 4] {
        match self {
            Interpolation::CubicSpline => bspline_weights(s),
            Interpolation::Lagrange4 => lagrange_weights(s),
        }
    }

    pub fn needs_prefilter(self) -> bool {
        matches!(self, Interpolation::CubicSpline)
    }
}

#[inline]
pub fn bspline_weights(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    let u = 1.0 - s;
    [u * u * u / 6.0, (3.0 * s3 - 6.0 * s2 + 4.0) / 6.0, (-3.0 * s3 + 3.0 * s2 + 3.0 * s + 1.0) / 6.0, s3 / 6.0]
}

#[inline]
pub fn lagrange_weights(s: f64) -> [f64; 4] {
    [-s * (s - 1.0) * (s - 2.0) / 6.0, (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0, -(s + 1.0) * s * (s - 2.0) / 2.0, (s + 1.0) * s * (s - 1.0) / 6.0]
}

/// Thomas-algorithm factors for the B-spline system `(c_{i−1} + 4c_i + c_{i+1})/6 = f_i`
/// with zero coefficients outside the line.
#[derive(Clone, Debug)]
pub struct SplinePrefilter {
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl SplinePrefilter {
    pub fn new(len: usize) -> Self {
        let (a, b, c) = (1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0);
        let mut upper = vec![0.0; len];
        let mut inv_pivot = vec![0.0; len];
        let mut prev = 0.0;
        for i in 0..len {
            let pivot = b - a * prev;
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = c / pivot;
            prev = upper[i];
        }
        Self { upper, inv_pivot }
    }

    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    /// In-place prefilter of a contiguous line.
    pub fn apply(&self, line: &mut [f64]) {
        let n = line.len();
        debug_assert_eq!(n, self.len());
        let a = 1.0 / 6.0;
        let mut prev = 0.0;
        for (x, inv) in line.iter_mut().zip(&self.inv_pivot) {
            let d = (*x - a * prev) * inv;
            *x = d;
            prev = d;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            line[i] -= self.upper[i] * line[i + 1];
        }
    }

    /// In-place prefilter of `width` interleaved lines stored row-major as
    /// `block[i * width + col]`, vectorized across columns.
    pub fn apply_columns(&self, block: &mut [f64], width: usize) {
        let n = self.len();
        debug_assert_eq!(block.len(), n * width);
        let a = 1.0 / 6.0;
        for i in 0..n {
            let inv = self.inv_pivot[i];
            if i == 0 {
                for v in &mut block[..width] {
                    *v *= inv;
                }
            } else {
                let (prev, cur) = block[(i - 1) * width..(i + 1) * width].split_at_mut(width);
                for (c, p) in cur.iter_mut().zip(prev.iter()) {
                    *c = (*c - a * p) * inv;
                }
            }
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let up = self.upper[i];
            let (cur, next) = block[i * width..(i + 2) * width].split_at_mut(width);
            for (c, nx) in cur.iter_mut().zip(next.iter()) {
                *c -= up * nx;
            }
        }
    }
}

/// Splits a continuous index position into base index and fraction.
#[inline]
pub fn split_position(p: f64) -> (isize, f64) {
    let base = p.floor();
    (base as isize, p - base)
}

/// Evaluates a (prefiltered if spline) line at continuous index position `p`.
#[inline]
pub fn eval_line(coeffs: &[f64], p: f64, scheme: Interpolation) -> f64 {
    let (base, s) = split_position(p);
    let w = scheme.weights(s);
    let n = coeffs.len() as isize;
    let mut acc = 0.0;
    for (k, wk) in w.iter().enumerate() {
        let i = base - 1 + k as isize;
        if i >= 0 && i < n {
            acc += wk * coeffs[i as usize];
        }
    }
    acc
}

/// Reusable 1D interpolator for a single line.
#[derive(Clone, Debug)]
pub struct LineInterpolator {
    scheme: Interpolation,
    prefilter: Option<SplinePrefilter>,
}

impl LineInterpolator {
    pub fn new(len: usize, scheme: Interpolation) -> Self {
        Self { scheme, prefilter: scheme.needs_prefilter().then(|| SplinePrefilter::new(len)) }
    }

    pub fn scheme(&self) -> Interpolation {
        self.scheme
    }

    /// Turns samples into interpolation coefficients in place.
    pub fn prepare(&self, line: &mut [f64]) {
        if let Some(p) = &self.prefilter {
            p.apply(line);
        }
    }

    pub fn prepare_columns(&self, block: &mut [f64], width: usize) {
        if let Some(p) = &self.prefilter {
            p.apply_columns(block, width);
        }
    }

    /// Backward-trace shift: `out[i] = line(i − shift)`, where `line` holds prepared coefficients.
    pub fn shift_into(&self, coeffs: &[f64], shift: f64, out: &mut [f64]) {
        let (base0, s) = split_position(-shift);
        let w = self.scheme.weights(s);
        let n = coeffs.len() as isize;
        for (i, o) in out.iter_mut().enumerate() {
            let base = i as isize + base0;
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let j = base - 1 + k as isize;
                if j >= 0 && j < n {
                    acc += wk * coeffs[j as usize];
                }
            }
            *o = acc;
        }
    }
}

/// Bicubic evaluation of prepared 2D coefficients `c[i * cols + j]` at continuous position `(p, q)`.
#[inline]
pub fn eval_plane(coeffs: &[f64], rows: usize, cols: usize, p: f64, q: f64, scheme: Interpolation) -> f64 {
    let (bi, si) = split_position(p);
    let (bj, sj) = split_position(q);
    let wi = scheme.weights(si);
    let wj = scheme.weights(sj);
    if bi >= 1 && bi + 2 < rows as isize && bj >= 1 && bj + 2 < cols as isize {
        let (i0, j0) = (bi as usize - 1, bj as usize - 1);
        let mut acc = 0.0;
        for (a, wa) in wi.iter().enumerate() {
            let row = &coeffs[(i0 + a) * cols + j0..(i0 + a) * cols + j0 + 4];
            acc += wa * (wj[0] * row[0] + wj[1] * row[1] + wj[2] * row[2] + wj[3] * row[3]);
        }
        return acc;
    }
    let mut acc = 0.0;
    for (a, wa) in wi.iter().enumerate() {
        let i = bi - 1 + a as isize;
        if i < 0 || i >= rows as isize {
            continue;
        }
        let row = &coeffs[i as usize * cols..(i as usize + 1) * cols];
        let mut r = 0.0;
        for (b, wb) in wj.iter().enumerate() {
            let j = bj - 1 + b as isize;
            if j >= 0 && j < cols as isize {
                r += wb * row[j as usize];
            }
        }
        acc += wa * r;
    }
    acc
}

/// Prepares a row-major `rows × cols` plane in place (prefilter along both axes).
pub fn prepare_plane(plane: &mut [f64], rows: usize, cols: usize, row_filter: &LineInterpolator, col_filter: &LineInterpolator) {
    for r in plane.chunks_mut(cols) {
        col_filter.prepare(r);
    }
    row_filter.prepare_columns(plane, cols);
    debug_assert_eq!(plane.len(), rows * cols);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_line(n: usize, h: f64, c: f64) -> Vec<f64> {
        (0..n).map(|i| (-((i as f64 - c) * h).powi(2)).exp()).collect()
    }

    #[test]
    fn weights_partition_unity() {
        for s in [0.0, 0.25, 0.5, 0.9] {
            for scheme in [Interpolation::CubicSpline, Interpolation::Lagrange4] {
                let w = scheme.weights(s);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn spline_reproduces_nodes() {
        let n = 40;
        let f = gaussian_line(n, 0.3, 20.0);
        let ip = LineInterpolator::new(n, Interpolation::CubicSpline);
        let mut c = f.clone();
        ip.prepare(&mut c);
        for (i, fi) in f.iter().enumerate() {
            assert!((eval_line(&c, i as f64, Interpolation::CubicSpline) - fi).abs() < 1e-13);
        }
    }

    #[test]
    fn column_prefilter_matches_line_prefilter() {
        let n = 16;
        let width = 3;
        let pf = SplinePrefilter::new(n);
        let mut block: Vec<f64> = (0..n * width).map(|k| ((k * 7 % 11) as f64).sin()).collect();
        let mut lines: Vec<Vec<f64>> = (0..width).map(|c| (0..n).map(|i| block[i * width + c]).collect()).collect();
        pf.apply_columns(&mut block, width);
        for (c, line) in lines.iter_mut().enumerate() {
            pf.apply(line);
            for i in 0..n {
                assert!((line[i] - block[i * width + c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn integer_shift_is_exact() {
        let n = 32;
        let f = gaussian_line(n, 0.4, 12.0);
        for scheme in [Interpolation::CubicSpline, Interpolation::Lagrange4] {
            let ip = LineInterpolator::new(n, scheme);
            let mut c = f.clone();
            ip.prepare(&mut c);
            let mut out = vec![0.0; n];
            ip.shift_into(&c, 3.0, &mut out);
            for i in 3..n {
                assert!((out[i] - f[i - 3]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fractional_shift_accuracy_improves_with_resolution() {
        let err = |n: usize, scheme| {
            let h = 12.0 / n as f64;
            let f: Vec<f64> = (0..n).map(|i| (-((i as f64 + 0.5) * h - 6.0).powi(2)).exp()).collect();
            let ip = LineInterpolator::new(n, scheme);
            let mut c = f.clone();
            ip.prepare(&mut c);
            let shift = 0.37;
            let mut out = vec![0.0; n];
            ip.shift_into(&c, shift, &mut out);
            (0..n).map(|i| (out[i] - (-((i as f64 + 0.5 - shift) * h - 6.0).powi(2)).exp()).abs()).fold(0.0, f64::max)
        };
        for scheme in [Interpolation::CubicSpline, Interpolation::Lagrange4] {
            let ratio = err(64, scheme) / err(128, scheme);
            assert!(ratio > 12.0, "{scheme:?}: {ratio}");
        }
    }
}

//! Fourth-order finite differences on uniform grids.

/// First derivative along an axis at position `pos` (of `len`) with stride
/// `stride` around flat index `idx`: central 5-point interior stencil,
/// one-sided stencils of the same order at the two cells next to each end.
#[inline]
pub fn d1(values: &[f64], idx: usize, stride: usize, pos: usize, len: usize, h: f64) -> f64 {
    let at = |k: isize| values[(idx as isize + k * stride as isize) as usize];
    let inv = 1.0 / (12.0 * h);
    if pos >= 2 && pos + 2 < len {
        (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) * inv
    } else if pos == 0 {
        (-25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) * inv
    } else if pos == 1 {
        (-3.0 * at(-1) - 10.0 * at(0) + 18.0 * at(1) - 6.0 * at(2) + at(3)) * inv
    } else if pos + 1 == len {
        (25.0 * at(0) - 48.0 * at(-1) + 36.0 * at(-2) - 16.0 * at(-3) + 3.0 * at(-4)) * inv
    } else {
        (3.0 * at(1) + 10.0 * at(0) - 18.0 * at(-1) + 6.0 * at(-2) - at(-3)) * inv
    }
}

/// Interior 4th-order second-derivative weights `[−1/12, 4/3, −5/2, 4/3, −1/12]`.
pub const D2_WEIGHTS: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

/// Second derivative (interior only; caller guarantees a 2-cell margin).
#[inline]
pub fn d2_interior(values: &[f64], idx: usize, stride: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (k, w) in D2_WEIGHTS.iter().enumerate() {
        acc += w * values[(idx as isize + (k as isize - 2) * stride as isize) as usize];
    }
    acc / (h * h)
}

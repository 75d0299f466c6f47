//! Multidimensional FFTs on zero-padded cubes.
//!
//! Only the first `N` indices of each axis carry data before the forward
//! transform (and are wanted after the inverse), so lines whose
//! not-yet-transformed coordinates fall in the padding are skipped.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par::{self, DisjointWriter};

/// Lines gathered per task along strided axes.
const LINE_BATCH: usize = 16;

/// Plans for an `M`-point transform in both directions.
#[derive(Clone)]
pub struct PaddedFft {
    pub dims: usize,
    pub padded: usize,
    pub active: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PaddedFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PaddedFft").field("dims", &self.dims).field("padded", &self.padded).finish()
    }
}

impl PaddedFft {
    /// Transforms on `padded^dims` cubes whose data occupies `active^dims`.
    pub fn new(dims: usize, padded: usize, active: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { dims, padded, active, forward: planner.plan_fft_forward(padded), inverse: planner.plan_fft_inverse(padded) }
    }

    pub fn len(&self) -> usize {
        self.padded.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// In-place forward transform (input supported on the active block).
    pub fn forward(&self, data: &mut [Complex64]) {
        for axis in (0..self.dims).rev() {
            self.transform_axis(data, axis, &self.forward, true);
        }
    }

    /// In-place unnormalized inverse transform; only the active block of the
    /// result is meaningful.
    pub fn inverse(&self, data: &mut [Complex64]) {
        for axis in 0..self.dims {
            self.transform_axis(data, axis, &self.inverse, true);
        }
    }

    /// Full (unpruned) forward transform, for kernels that fill the cube.
    pub fn forward_full(&self, data: &mut [Complex64]) {
        for axis in (0..self.dims).rev() {
            self.transform_axis(data, axis, &self.forward, false);
        }
    }

    fn transform_axis(&self, data: &mut [Complex64], axis: usize, plan: &Arc<dyn Fft<f64>>, prune: bool) {
        let m = self.padded;
        let stride = m.pow((self.dims - 1 - axis) as u32);
        let outer_count = m.pow(axis as u32);
        // Outer multi-indices (axes before `axis`) that can be non-zero.
        let outer: Vec<usize> = (0..outer_count)
            .filter(|&o| {
                if !prune {
                    return true;
                }
                let mut r = o;
                for _ in 0..axis {
                    if r % m >= self.active {
                        return false;
                    }
                    r /= m;
                }
                true
            })
            .collect();
        let scratch_len = plan.get_inplace_scratch_len();
        if stride == 1 {
            let writer = DisjointWriter::new(data);
            par::for_each_task_with(
                outer.len(),
                || (vec![Complex64::default(); m], vec![Complex64::default(); scratch_len]),
                |(line, scratch), t| {
                    let base = outer[t] * m;
                    for (k, l) in line.iter_mut().enumerate() {
                        // SAFETY: each task owns one contiguous line.
                        *l = unsafe { writer.get(base + k) };
                    }
                    plan.process_with_scratch(line, scratch);
                    for (k, l) in line.iter().enumerate() {
                        unsafe { writer.set(base + k, *l) };
                    }
                },
            );
            return;
        }
        let batches = stride.div_ceil(LINE_BATCH);
        let writer = DisjointWriter::new(data);
        par::for_each_task_with(
            outer.len() * batches,
            || (vec![Complex64::default(); m * LINE_BATCH], vec![Complex64::default(); scratch_len]),
            |(lines, scratch), t| {
                let (o, b) = (outer[t / batches], t % batches);
                let lo = b * LINE_BATCH;
                let width = LINE_BATCH.min(stride - lo);
                let base = o * m * stride + lo;
                for k in 0..m {
                    for w in 0..width {
                        // SAFETY: tasks own disjoint (outer, inner-batch) line sets.
                        lines[w * m + k] = unsafe { writer.get(base + k * stride + w) };
                    }
                }
                plan.process_with_scratch(&mut lines[..width * m], scratch);
                for k in 0..m {
                    for w in 0..width {
                        unsafe { writer.set(base + k * stride + w, lines[w * m + k]) };
                    }
                }
            },
        );
    }
}

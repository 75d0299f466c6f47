//! Execution policy and deterministic reductions.
//!
//! All reductions split the index range into fixed-size chunks (independent of
//! the number of workers), sum each chunk with Neumaier compensation, and fold
//! the partials with a fixed pairwise tree. Sequential and parallel policies
//! therefore produce bit-identical results.

use std::sync::atomic::{AtomicU8, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of terms summed per reduction chunk.
pub const REDUCTION_CHUNK: usize = 4096;

/// Whether grid sweeps and particle loops use the worker pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

impl Parallelism {
    /// The policy actually honoured by this build: `Parallel` degrades to
    /// `Sequential` when the `parallel` feature is off.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Parallelism::Sequential
        }
    }
}

static DEFAULT_POLICY: AtomicU8 = AtomicU8::new(1);

/// Sets the process-wide policy used by every sweep in the crate.
pub fn set_parallelism(policy: Parallelism) {
    DEFAULT_POLICY.store(matches!(policy, Parallelism::Parallel) as u8, Ordering::Relaxed);
}

/// The process-wide policy, after feature gating.
pub fn parallelism() -> Parallelism {
    let p = if DEFAULT_POLICY.load(Ordering::Relaxed) == 1 { Parallelism::Parallel } else { Parallelism::Sequential };
    p.effective()
}

/// Calls `f(chunk_index, chunk)` for consecutive `chunk`-sized pieces of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    match parallelism() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c)),
        _ => data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c)),
    }
}

/// Maps `f` over `0..len`, preserving order.
pub fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match parallelism() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..len).into_par_iter().map(f).collect(),
        _ => (0..len).map(f).collect(),
    }
}

/// Neumaier-compensated sum of a slice, left to right.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pairwise (balanced binary tree) sum with a fixed split rule.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        len => {
            let mid = len.div_ceil(2);
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn sum_range<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(REDUCTION_CHUNK);
    let partials = map_range(chunks, |c| {
        let lo = c * REDUCTION_CHUNK;
        let hi = (lo + REDUCTION_CHUNK).min(len);
        compensated_sum((lo..hi).map(&f))
    });
    pairwise_sum(&partials)
}

/// Deterministic sum of a slice mapped through `f`.
pub fn sum_slice<F>(values: &[f64], f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    sum_range(values.len(), |i| f(values[i]))
}

/// Maximum of `f(i)` over `0..len`; `-inf` for an empty range.
pub fn max_range<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(REDUCTION_CHUNK);
    map_range(chunks, |c| {
        let lo = c * REDUCTION_CHUNK;
        let hi = (lo + REDUCTION_CHUNK).min(len);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// Shared mutable view for sweeps whose tasks write provably disjoint index sets
/// (e.g. interleaved slabs of one array).
pub struct DisjointWriter<'a, T = f64> {
    ptr: *mut T,
    len: usize,
    _marker: std::marker::PhantomData<&'a mut [T]>,
}

// SAFETY: callers guarantee that concurrent tasks touch disjoint indices.
unsafe impl<T: Send> Send for DisjointWriter<'_, T> {}
unsafe impl<T: Send> Sync for DisjointWriter<'_, T> {}

impl<'a, T: Copy> DisjointWriter<'a, T> {
    pub fn new(data: &'a mut [T]) -> Self {
        Self { ptr: data.as_mut_ptr(), len: data.len(), _marker: std::marker::PhantomData }
    }

    /// Reads index `i`.
    ///
    /// # Safety
    /// No other task may write `i` concurrently.
    #[inline]
    pub unsafe fn get(&self, i: usize) -> T {
        assert!(i < self.len);
        *self.ptr.add(i)
    }

    /// Writes index `i`.
    ///
    /// # Safety
    /// No other task may read or write `i` concurrently.
    #[inline]
    pub unsafe fn set(&self, i: usize, v: T) {
        assert!(i < self.len);
        *self.ptr.add(i) = v;
    }

    /// Mutable view of `start..start + len`.
    ///
    /// # Safety
    /// No other task may touch this range while the view is alive.
    #[inline]
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn slice_mut(&self, start: usize, len: usize) -> &mut [T] {
        assert!(start + len <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(start), len)
    }
}

/// Runs `f(task)` for `task in 0..count` under the current policy.
pub fn for_each_task<F>(count: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    match parallelism() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..count).into_par_iter().for_each(f),
        _ => (0..count).for_each(f),
    }
}

/// Like [`for_each_task`], with per-worker scratch state created by `init`.
pub fn for_each_task_with<S, I, F>(count: usize, init: I, f: F)
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) + Sync + Send,
{
    match parallelism() {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => (0..count).into_par_iter().for_each_init(&init, |s, i| f(s, i)),
        _ => {
            let mut s = init();
            (0..count).for_each(|i| f(&mut s, i))
        }
    }
}

//! Semi-Lagrangian sub-flows on `n = 2` phase grids stored as `[x⁰][x¹][v⁰][v¹]`.
//!
//! Every sub-flow is a backward trace `f(z) ← f(z − shift)` along one or two
//! grid axes, evaluated by cubic interpolation. Tasks own disjoint slabs or
//! planes, so sweeps are bit-identical under both execution policies.

use crate::error::{LabError, Result};
use crate::grid::{Frame, PhaseDensity, SpatialField};
use crate::interp::{eval_plane, prepare_plane, split_position, Interpolation, LineInterpolator};
use crate::par::{self, DisjointWriter};

/// Backward-trace stencil for a shift of `s` cells: base offset and weights.
#[inline]
fn stencil(shift: f64, scheme: Interpolation) -> (isize, [f64; 4]) {
    let (base, frac) = split_position(-shift);
    (base - 1, scheme.weights(frac))
}

/// `out[i][k] = Σ_o w_k[o]·c[i + b_k + o][k]`, zero outside the rows.
fn shift_rows(coeffs: &[f64], rows: usize, width: usize, stencils: &[(isize, [f64; 4])], out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..rows {
        let dst = &mut out[i * width..(i + 1) * width];
        for o in 0..4 {
            for (k, (d, (b, w))) in dst.iter_mut().zip(stencils).enumerate() {
                let r = i as isize + b + o as isize;
                if r >= 0 && (r as usize) < rows {
                    *d += w[o] * coeffs[r as usize * width + k];
                }
            }
        }
    }
}

fn require_2d(f: &PhaseDensity) -> Result<()> {
    if f.spec.n != 2 {
        return Err(LabError::Unsupported("semi-Lagrangian sweeps are implemented for n = 2".into()));
    }
    Ok(())
}

/// Columns per cache-sized strip of a free-flow sweep.
const STRIP: usize = 256;

/// Stencils in structure-of-arrays form with runs of equal base offset.
struct ColumnStencils {
    weights: [Vec<f64>; 4],
    /// `(first, end, base)` runs over the columns.
    runs: Vec<(usize, usize, isize)>,
    pad: usize,
}

impl ColumnStencils {
    fn new(stencils: &[(isize, [f64; 4])], strip: usize) -> Self {
        let mut weights: [Vec<f64>; 4] = Default::default();
        for w in weights.iter_mut() {
            w.reserve(stencils.len());
        }
        let mut runs = Vec::new();
        let mut pad = 0;
        for (k, (b, w)) in stencils.iter().enumerate() {
            for o in 0..4 {
                weights[o].push(w[o]);
            }
            pad = pad.max(b.unsigned_abs() + 3);
            // Runs never straddle a strip boundary.
            match runs.last_mut() {
                Some((_, end, base)) if *base == *b && *end == k && k % strip != 0 => *end = k + 1,
                _ => runs.push((k, k + 1, *b)),
            }
        }
        Self { weights, runs, pad }
    }
}

/// Free flow over `tau` in the lab frame: `f(x, v) ← f(x − vτ, v)`.
pub fn free_flow_lab(f: &mut PhaseDensity, tau: f64, scheme: Interpolation) -> Result<()> {
    require_2d(f)?;
    if tau == 0.0 {
        return Ok(());
    }
    let spec = f.spec;
    let (nx, nv) = (spec.nx, spec.nv);
    let width = nv * nv;
    let strip = STRIP.min(width);
    let strips = width.div_ceil(strip);
    let line = LineInterpolator::new(nx, scheme);
    let per_v: Vec<(isize, [f64; 4])> = (0..nv).map(|k| stencil(spec.v_at(k) * tau / spec.dx(), scheme)).collect();
    // Axis x⁰: rows i₀ at stride Nx·Nv² for fixed x¹ = j; shift set by v⁰ (column / Nv).
    // Axis x¹: rows j at stride Nv² inside slab i₀; shift set by v¹ (column % Nv).
    for axis in 0..2 {
        let stencils: Vec<(isize, [f64; 4])> = (0..width).map(|k| per_v[if axis == 0 { k / nv } else { k % nv }]).collect();
        let cols = ColumnStencils::new(&stencils, strip);
        let pad = cols.pad;
        let (row_stride, slab_stride) = if axis == 0 { (nx * width, width) } else { (width, nx * width) };
        let writer = DisjointWriter::new(&mut f.values);
        par::for_each_task_with(
            nx * strips,
            || vec![0.0; (nx + 2 * pad) * strip],
            |block, task| {
                let (slab, s) = (task / strips, task % strips);
                let k0 = s * strip;
                let sw = strip.min(width - k0);
                let base = slab * slab_stride + k0;
                let block = &mut block[..(nx + 2 * pad) * sw];
                block[..pad * sw].fill(0.0);
                block[(nx + pad) * sw..].fill(0.0);
                for r in 0..nx {
                    // SAFETY: task (slab, strip) owns these row segments.
                    let src = unsafe { writer.slice_mut(base + r * row_stride, sw) };
                    block[(r + pad) * sw..(r + pad + 1) * sw].copy_from_slice(src);
                }
                line.prepare_columns(&mut block[pad * sw..(nx + pad) * sw], sw);
                let first = cols.runs.partition_point(|run| run.1 <= k0);
                for r in 0..nx {
                    let dst = unsafe { writer.slice_mut(base + r * row_stride, sw) };
                    dst.fill(0.0);
                    for &(a, b, off) in cols.runs[first..].iter().take_while(|run| run.0 < k0 + sw) {
                        let (a, b) = (a - k0, b - k0);
                        for o in 0..4 {
                            let src_row = (r + pad) as isize + off + o as isize;
                            let src = &block[src_row as usize * sw + a..src_row as usize * sw + b];
                            let w = &cols.weights[o][k0 + a..k0 + b];
                            for ((d, x), wk) in dst[a..b].iter_mut().zip(src).zip(w) {
                                *d += wk * x;
                            }
                        }
                    }
                }
            },
        );
    }
    f.time += tau;
    Ok(())
}

/// Velocity kick in the lab frame: `f(x, v) ← f(x, v − scale·E(x))`.
pub fn kick_lab(f: &mut PhaseDensity, force: &SpatialField, scale: f64, scheme: Interpolation) -> Result<()> {
    require_2d(f)?;
    if force.grid != f.spec.x_grid() || force.components != 2 {
        return Err(crate::error::invalid("lab kicks need a 2-component force on the density's x grid"));
    }
    let spec = f.spec;
    let nv = spec.nv;
    let block = nv * nv;
    let m = force.grid.len();
    let line = LineInterpolator::new(nv, scheme);
    let dv = spec.dv();
    let writer = DisjointWriter::new(&mut f.values);
    par::for_each_task_with(
        spec.x_cells(),
        || (vec![0.0; block], vec![0.0; block]),
        |(buf, out), c| {
            let s0 = scale * force.values[c] / dv;
            let s1 = scale * force.values[m + c] / dv;
            if s0 == 0.0 && s1 == 0.0 {
                return;
            }
            for (k, b) in buf.iter_mut().enumerate() {
                // SAFETY: each task owns one contiguous velocity block.
                *b = unsafe { writer.get(c * block + k) };
            }
            // v⁰: rows of length Nv, uniform shift.
            line.prepare_columns(buf, nv);
            let st0 = vec![stencil(s0, scheme); nv];
            shift_rows(buf, nv, nv, &st0, out);
            // v¹: contiguous lines.
            let st1 = [stencil(s1, scheme)];
            for row in 0..nv {
                let src = &mut out[row * nv..(row + 1) * nv];
                line.prepare(src);
                shift_rows(src, nv, 1, &st1, &mut buf[row * nv..(row + 1) * nv]);
            }
            for (k, b) in buf.iter().enumerate() {
                unsafe { writer.set(c * block + k, *b) };
            }
        },
    );
    Ok(())
}

/// Per-cell kick displacements `δ = scale·E(y + vt)` of a free-streaming density.
pub fn streaming_shifts(f: &PhaseDensity, force: &SpatialField, scale: f64) -> Result<Vec<[f64; 2]>> {
    require_2d(f)?;
    if f.frame != Frame::FreeStreaming || force.components != 2 {
        return Err(crate::error::invalid("streaming kicks need a free-streaming density and a 2-component force"));
    }
    let spec = f.spec;
    let (ny, nv) = (spec.nx, spec.nv);
    let t = f.time;
    let mut shifts = vec![[0.0; 2]; spec.len()];
    // One chunk per (y⁰, y¹, v⁰) line of v¹ values.
    par::for_each_chunk_mut(&mut shifts, nv, |line, out| {
        let (y0, y1, v0) = (spec.x_at(line / (ny * nv)), spec.x_at((line / nv) % ny), spec.v_at(line % nv));
        for (k, o) in out.iter_mut().enumerate() {
            let v1 = spec.v_at(k);
            let x = [y0 + v0 * t, y1 + v1 * t];
            let e = force.interpolate_all(&x);
            *o = [scale * e[0], scale * e[1]];
        }
    });
    Ok(shifts)
}

/// Velocity kick in the free-streaming frame. With `δ = scale·E(y + vt)` the
/// update is `g(y, v) ← g(y + δt, v − δ)`; each component moves along its own
/// `(yⁱ, vⁱ)` plane and leaves `x = y + vt` unchanged, so components commute.
pub fn kick_streaming(f: &mut PhaseDensity, force: &SpatialField, scale: f64, scheme: Interpolation) -> Result<()> {
    let shifts = streaming_shifts(f, force, scale)?;
    kick_streaming_with(f, &shifts, scheme)
}

/// [`kick_streaming`] with precomputed displacements (shared by co-evolved densities).
pub fn kick_streaming_with(f: &mut PhaseDensity, shifts: &[[f64; 2]], scheme: Interpolation) -> Result<()> {
    require_2d(f)?;
    if f.frame != Frame::FreeStreaming || shifts.len() != f.spec.len() {
        return Err(crate::error::invalid("displacements do not match the free-streaming density"));
    }
    let spec = f.spec;
    let (ny, nv) = (spec.nx, spec.nv);
    let row = nv * nv;
    let t = f.time;
    let y_line = LineInterpolator::new(ny, scheme);
    let v_line = LineInterpolator::new(nv, scheme);
    let (dy, dv) = (spec.dx(), spec.dv());
    #[allow(clippy::needless_range_loop)]
    for comp in 0..2 {
        // Task `o` fixes the other position index; rows `p` run over this
        // component's position and hold all `Nv²` velocities.
        let row_start = |o: usize, p: usize| if comp == 0 { (p * ny + o) * row } else { (o * ny + p) * row };
        // Offset inside a row of (this component's velocity q, other velocity k).
        let inner = |q: usize, k: usize| if comp == 0 { q * nv + k } else { k * nv + q };
        let writer = DisjointWriter::new(&mut f.values);
        par::for_each_task_with(
            ny,
            || (vec![0.0; ny * row], vec![0.0; ny * nv]),
            |(block, plane), o| {
                for p in 0..ny {
                    // SAFETY: task `o` owns the rows (o, p) for every p.
                    let src = unsafe { writer.slice_mut(row_start(o, p), row) };
                    block[p * row..(p + 1) * row].copy_from_slice(src);
                }
                for k in 0..nv {
                    let mut any = false;
                    for p in 0..ny {
                        for q in 0..nv {
                            let val = block[p * row + inner(q, k)];
                            any |= val != 0.0;
                            plane[p * nv + q] = val;
                        }
                    }
                    if !any {
                        continue;
                    }
                    prepare_plane(plane, ny, nv, &y_line, &v_line);
                    for p in 0..ny {
                        let start = row_start(o, p);
                        for q in 0..nv {
                            let off = inner(q, k);
                            let d = shifts[start + off][comp];
                            block[p * row + off] = eval_plane(plane, ny, nv, p as f64 + d * t / dy, q as f64 - d / dv, scheme);
                        }
                    }
                }
                for p in 0..ny {
                    let dst = unsafe { writer.slice_mut(row_start(o, p), row) };
                    dst.copy_from_slice(&block[p * row..(p + 1) * row]);
                }
            },
        );
    }
    Ok(())
}

//! Binary snapshots and CSV slices.
//!
//! Snapshot layout (all little-endian): 8-byte magic `VLSNAP01`; five `u64`
//! (kind, n, Nx, Nv, components); three `f64` (x_extent, v_extent, time);
//! one `u64` frame; then the values as `f64` in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::density::{Frame, PhaseDensity};
use super::field::SpatialField;
use super::spec::{GridSpec, SpatialGrid};
use crate::error::{LabError, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"VLSNAP01";
/// Header size in bytes: magic + 5 u64 + 3 f64 + 1 u64.
pub const SNAPSHOT_HEADER_BYTES: usize = 8 + 9 * 8;

const KIND_DENSITY: u64 = 0;
const KIND_FIELD: u64 = 1;

/// Anything a snapshot file can hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot {
    Density(PhaseDensity),
    Field { field: SpatialField, time: f64 },
}

fn frame_code(f: Frame) -> u64 {
    match f {
        Frame::Lab => 0,
        Frame::FreeStreaming => 1,
    }
}

fn encode(kind: u64, dims: [u64; 4], floats: [f64; 3], frame: u64, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER_BYTES + 8 * values.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&kind.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for f in floats {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out.extend_from_slice(&frame.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Serializes a phase density.
pub fn density_bytes(f: &PhaseDensity) -> Vec<u8> {
    let s = f.spec;
    encode(KIND_DENSITY, [s.n as u64, s.nx as u64, s.nv as u64, 1], [s.x_extent, s.v_extent, f.time], frame_code(f.frame), &f.values)
}

/// Serializes a spatial field (`Nv = 0`, `v_extent = 0`).
pub fn field_bytes(field: &SpatialField, time: f64) -> Vec<u8> {
    let g = field.grid;
    encode(KIND_FIELD, [g.n as u64, g.points as u64, 0, field.components as u64], [g.extent, 0.0, time], 0, &field.values)
}

/// Parses a snapshot produced by [`density_bytes`] or [`field_bytes`].
pub fn parse_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    if bytes.len() < SNAPSHOT_HEADER_BYTES || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(LabError::Format("missing VLSNAP01 header".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes"));
    let float = |k: usize| f64::from_le_bytes(bytes[8 + 8 * k..16 + 8 * k].try_into().expect("8 bytes"));
    let (kind, n, nx, nv, comps) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize, word(4) as usize);
    let (x_extent, v_extent, time) = (float(5), float(6), float(7));
    let frame = match word(8) {
        0 => Frame::Lab,
        1 => Frame::FreeStreaming,
        other => return Err(LabError::Format(format!("unknown frame code {other}"))),
    };
    let payload = &bytes[SNAPSHOT_HEADER_BYTES..];
    if !payload.len().is_multiple_of(8) {
        return Err(LabError::Format("payload is not a whole number of f64".into()));
    }
    let values: Vec<f64> = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    match kind {
        KIND_DENSITY => {
            let spec = GridSpec::with_budget(n, x_extent, v_extent, nx, nv, u128::MAX)?;
            Ok(Snapshot::Density(PhaseDensity::from_values(spec, values, time, frame)?))
        }
        KIND_FIELD => {
            let grid = SpatialGrid::new(n, x_extent, nx)?;
            Ok(Snapshot::Field { field: SpatialField::new(grid, comps, values)?, time })
        }
        other => Err(LabError::Format(format!("unknown snapshot kind {other}"))),
    }
}

pub fn write_snapshot(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(bytes)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_snapshot(&bytes)
}

/// CSV of a spatial field: header `x1,…,xn,c0,…`, one row per grid point.
pub fn field_csv(field: &SpatialField) -> String {
    let g = field.grid;
    let mut out = String::new();
    let coords: Vec<String> = (1..=g.n).map(|a| format!("x{a}")).collect();
    let comps: Vec<String> = (0..field.components).map(|c| format!("c{c}")).collect();
    out.push_str(&coords.join(","));
    out.push(',');
    out.push_str(&comps.join(","));
    out.push('\n');
    let m = g.len();
    for idx in 0..m {
        let row: Vec<String> = g
            .point(idx)
            .into_iter()
            .map(|x| format!("{x:.17e}"))
            .chain((0..field.components).map(|c| format!("{:.17e}", field.values[c * m + idx])))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// CSV of the `x`-plane of a density at the velocity cell `v_index` (same
/// index on every velocity axis): header `x1,…,xn,f`.
pub fn density_slice_csv(f: &PhaseDensity, v_index: usize) -> Result<String> {
    let s = f.spec;
    if v_index >= s.nv {
        return Err(crate::error::invalid("velocity index out of range"));
    }
    let vstrides = &s.strides()[s.n..];
    let v_offset: usize = vstrides.iter().map(|st| st * v_index).sum();
    let block = s.v_cells();
    let grid = s.x_grid();
    let mut out = String::new();
    let coords: Vec<String> = (1..=s.n).map(|a| format!("x{a}")).collect();
    out.push_str(&coords.join(","));
    out.push_str(",f\n");
    for c in 0..s.x_cells() {
        let row: Vec<String> =
            grid.point(c).into_iter().chain(std::iter::once(f.values[c * block + v_offset])).map(|x| format!("{x:.17e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample_function;

    #[test]
    fn density_round_trip() {
        let spec = GridSpec::new(2, 3.0, 2.0, 8, 10).unwrap();
        let mut f = sample_function(spec, |x, v| x[0] - 2.0 * v[1]).unwrap();
        f.time = 1.25;
        f.frame = Frame::FreeStreaming;
        let bytes = density_bytes(&f);
        assert_eq!(bytes.len(), SNAPSHOT_HEADER_BYTES + 8 * spec.len());
        assert_eq!(parse_snapshot(&bytes).unwrap(), Snapshot::Density(f));
    }

    #[test]
    fn field_round_trip_and_bad_magic() {
        let g = SpatialGrid::new(2, 1.0, 6).unwrap();
        let field = SpatialField::sample(g, |x| x[0] * x[1]);
        let bytes = field_bytes(&field, 3.0);
        assert_eq!(parse_snapshot(&bytes).unwrap(), Snapshot::Field { field, time: 3.0 });
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(parse_snapshot(&bad), Err(LabError::Format(_))));
    }

    #[test]
    fn csv_shapes() {
        let g = SpatialGrid::new(2, 1.0, 4).unwrap();
        let field = SpatialField::sample(g, |x| x[0]);
        assert_eq!(field_csv(&field).lines().count(), 17);
        let spec = GridSpec::new(2, 1.0, 1.0, 8, 8).unwrap();
        let f = PhaseDensity::zeros(spec);
        assert_eq!(density_slice_csv(&f, 4).unwrap().lines().count(), 65);
    }
}

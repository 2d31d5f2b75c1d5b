//! `.gowdy` snapshots: one line of JSON header, then little-endian `f64`
//! arrays of `G` and `Ã` in `(point, i, j)` order.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::state::{DET_TOL, TRACE_TOL};
use super::GowdyState;
use crate::circle::{CircleGrid, Scheme};
use crate::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "gowdy-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotTolerances {
    pub det: f64,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    #[serde(rename = "N")]
    pub dim: usize,
    pub n_y: usize,
    #[serde(rename = "L_c")]
    pub length: f64,
    pub s: f64,
    pub scheme: Scheme,
    pub tolerances: SnapshotTolerances,
    pub arrays: Vec<String>,
}

pub fn write_snapshot<W: Write>(state: &GowdyState, mut w: W) -> Result<()> {
    let grid = state.grid();
    let header = SnapshotHeader {
        format: SNAPSHOT_FORMAT.into(),
        version: SNAPSHOT_VERSION,
        dim: state.dim(),
        n_y: grid.len(),
        length: grid.length(),
        s: state.s(),
        scheme: grid.scheme(),
        tolerances: SnapshotTolerances { det: DET_TOL, trace: TRACE_TOL },
        arrays: vec!["G".into(), "Atilde".into()],
    };
    let line = serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let n = state.dim();
    for field in [state.g().to_vec(), state.atilde()] {
        let mut buf = Vec::with_capacity(field.len() * n * n * 8);
        for m in &field {
            for i in 0..n {
                for j in 0..n {
                    buf.extend_from_slice(&m[(i, j)].to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(mut r: R) -> Result<GowdyState> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: SnapshotHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(format!("snapshot header: {e}")))?;
    if header.format != SNAPSHOT_FORMAT || header.version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot {} v{}", header.format, header.version)));
    }
    let grid = CircleGrid::new(header.n_y, header.length, header.scheme)?;
    let n = header.dim;
    let mut read_field = || -> Result<Vec<DMatrix<f64>>> {
        let mut bytes = vec![0u8; header.n_y * n * n * 8];
        r.read_exact(&mut bytes)?;
        let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(vals.chunks(n * n).map(|c| DMatrix::from_row_slice(n, n, c)).collect())
    };
    let g = read_field()?;
    let a = read_field()?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after snapshot arrays", rest.len())));
    }
    GowdyState::new(grid, header.s, g, a)
}

//! MCGRAD-GRID v1 files: five ASCII header lines (magic, nx, ny, h, R_dom),
//! a blank line, then nx·ny little-endian f64 values in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::GridField;
use crate::error::{Error, Result};

pub const GRID_MAGIC: &str = "MCGRAD-GRID v1";

/// Serializes the field. Floats in the header use the shortest round-trip
/// representation, so reading back is bit-exact.
pub fn encode_grid(field: &GridField) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * field.u.len());
    write!(
        out,
        "{GRID_MAGIC}\n{}\n{}\n{:?}\n{:?}\n\n",
        field.nx, field.ny, field.h, field.r_dom
    )
    .expect("writing to a Vec cannot fail");
    for v in &field.u {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8], path: &Path) -> Result<GridField> {
    let bad = |reason: String| Error::GridFormat {
        path: path.to_path_buf(),
        reason,
    };
    let mut pos = 0;
    let mut line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated header".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8".into()))
    };
    let magic = line()?;
    if magic != GRID_MAGIC {
        return Err(bad(format!("unexpected magic `{magic}`")));
    }
    let nx: usize = line()?.trim().parse().map_err(|e| bad(format!("nx: {e}")))?;
    let ny: usize = line()?.trim().parse().map_err(|e| bad(format!("ny: {e}")))?;
    let h: f64 = line()?.trim().parse().map_err(|e| bad(format!("h: {e}")))?;
    let r_dom: f64 = line()?.trim().parse().map_err(|e| bad(format!("R_dom: {e}")))?;
    if !line()?.is_empty() {
        return Err(bad("missing blank separator line".into()));
    }
    if nx < 3 || ny < 3 {
        return Err(bad(format!("grid {nx}×{ny} is smaller than 3×3")));
    }
    if !(h > 0.0 && r_dom > 0.0) {
        return Err(bad("h and R_dom must be positive".into()));
    }
    let data = &bytes[pos..];
    let count = nx
        .checked_mul(ny)
        .ok_or_else(|| bad("node count overflows".into()))?;
    if data.len() != 8 * count {
        return Err(bad(format!(
            "expected {} payload bytes, found {}",
            8 * count,
            data.len()
        )));
    }
    let u = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(GridField { r_dom, nx, ny, h, u })
}

/// Writes atomically through a temporary file in the same directory.
pub fn write_grid(path: &Path, field: &GridField) -> Result<()> {
    crate::atomic_write(path, &encode_grid(field))
}

pub fn read_grid(path: &Path) -> Result<GridField> {
    let bytes = fs::read(path)?;
    decode_grid(&bytes, path)
}

//! On-disk formats: the MFE1 binary field container and CSV tables.
//!
//! MFE1 layout, all little-endian:
//!
//! ```text
//!     bytes 0..4    magic "MFE1"
//!     bytes 4..12   N as f64
//!     bytes 12..20  L as f64
//!     bytes 20..    N² field samples as f64, row-major
//! ```
//!
//! CSV output follows RFC 4180 (CRLF row endings, header row first); all
//! numeric cells use Rust's shortest-roundtrip formatting so files are
//! byte-reproducible across runs.

use crate::field::{Field, TorusGrid};
use std::io::{Read, Write};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"MFE1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not an MFE1 file (bad magic)")]
    BadMagic,
    #[error("bad MFE1 header: {0}")]
    BadHeader(String),
}

pub fn write_field(mut w: impl Write, field: &Field) -> Result<(), FormatError> {
    w.write_all(MAGIC)?;
    w.write_all(&(field.grid().n() as f64).to_le_bytes())?;
    w.write_all(&field.grid().side().to_le_bytes())?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field(mut r: impl Read) -> Result<Field, FormatError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let n_raw = f64::from_le_bytes(buf);
    r.read_exact(&mut buf)?;
    let l = f64::from_le_bytes(buf);
    if !n_raw.is_finite() || n_raw.fract() != 0.0 || n_raw < 0.0 {
        return Err(FormatError::BadHeader(format!(
            "resolution {n_raw} is not a whole number"
        )));
    }
    let n = n_raw as usize;
    let grid = TorusGrid::new(l, n).map_err(|e| FormatError::BadHeader(e.to_string()))?;
    let mut values = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Field::from_values(grid, values).map_err(|e| FormatError::BadHeader(e.to_string()))
}

/// Assembles an RFC 4180 table. Cells must already be formatted; none of
/// our tables need quoting.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push_str("\r\n");
    for row in rows {
        out.push_str(&row.join(","));
        out.push_str("\r\n");
    }
    out
}

/// Field samples as `x1,x2,value` rows in row-major order.
pub fn field_to_csv(field: &Field) -> String {
    let g = field.grid();
    let n = g.n();
    let rows = (0..n).flat_map(move |i| {
        (0..n).map(move |j| {
            let (x1, x2) = g.cell_center(i, j);
            vec![format!("{x1}"), format!("{x2}"), format!("{}", field.at(i, j))]
        })
    });
    csv_table(&["x1", "x2", "value"], rows)
}

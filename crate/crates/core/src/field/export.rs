use std::fmt::Write as _;
use std::io::{Read, Write};

use super::extension::ExtensionField;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"AFLD";
const VERSION: u32 = 1;

/// Rows `r,phi,w` over all grid rings and angular nodes.
pub fn field_csv(field: &ExtensionField) -> String {
    let mut out = String::from("r,phi,w\n");
    let nodes = field.grid.angular.nodes();
    for (i, row) in field.values.iter().enumerate() {
        let r = field.grid.radius(i);
        for (phi, w) in nodes.iter().zip(row) {
            let _ = writeln!(out, "{r:.17e},{phi:.17e},{w:.17e}");
        }
    }
    out
}

/// Binary dump: "AFLD", version, rows, cols (little-endian u32) then the
/// table of W(r_i, phi_j) as little-endian f64, row-major.
pub fn write_afld(table: &[Vec<f64>], mut out: impl Write) -> Result<()> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::Domain("ragged table".into()));
    }
    let mut buf = Vec::with_capacity(16 + 8 * rows * cols);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in table.iter().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_afld(mut input: impl Read) -> Result<Vec<Vec<f64>>> {
    let mut header = [0u8; 16];
    input.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::Integrity("not an AFLD stream".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    if word(4) != VERSION {
        return Err(Error::Integrity(format!(
            "unsupported AFLD version {}",
            word(4)
        )));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let mut body = vec![0u8; 8 * rows * cols];
    input.read_exact(&mut body)?;
    Ok(body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect::<Vec<_>>()
        .chunks(cols.max(1))
        .take(rows)
        .map(<[f64]>::to_vec)
        .collect())
}

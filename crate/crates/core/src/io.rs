//! Binary field snapshots and CSV tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::integrator::LedgerRow;
use crate::ou::{OUState, WienerPath};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"CBFSNAP1";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Layout: magic, version, dims (3 x u32), box length (f64), flags (u32),
/// then `re, im` pairs in FFT order for each component, then the SHA-256 of
/// everything before it. Little-endian throughout.
pub fn encode_snapshot(u: &SpectralField) -> Vec<u8> {
    let g = u.grid();
    let mut out = Vec::with_capacity(40 + 48 * g.len() + 32);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    for d in g.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&g.length.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for c in 0..3 {
        for z in u.component(c) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<SpectralField> {
    let bad = |m: &str| Error::Integrity(format!("snapshot {m}"));
    const HEADER: usize = 8 + 4 + 12 + 8 + 4;
    if bytes.len() < HEADER + 32 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("header is missing or not a field snapshot"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != SNAPSHOT_VERSION {
        return Err(bad("version is not supported"));
    }
    let dims = [u32_at(12) as usize, u32_at(16) as usize, u32_at(20) as usize];
    let grid = Grid::new(dims, f64_at(24)).map_err(|_| bad("grid header is invalid"))?;
    let body = HEADER + 48 * grid.len();
    if bytes.len() != body + 32 {
        return Err(bad("length does not match its grid"));
    }
    if Sha256::digest(&bytes[..body]).as_slice() != &bytes[body..] {
        return Err(bad("checksum mismatch"));
    }
    let n = grid.len();
    let comp = |c: usize| -> Vec<Complex64> {
        (0..n).map(|i| {
            let o = HEADER + 16 * (c * n + i);
            Complex64::new(f64_at(o), f64_at(o + 8))
        }).collect()
    };
    SpectralField::from_components(grid, [comp(0), comp(1), comp(2)])
}

pub fn write_snapshot(path: &Path, u: &SpectralField) -> Result<()> {
    Ok(fs::write(path, encode_snapshot(u))?)
}

pub fn read_snapshot(path: &Path) -> Result<SpectralField> {
    let bytes = fs::read(path).map_err(|e| Error::Integrity(format!("cannot read snapshot {}: {e}", path.display())))?;
    decode_snapshot(&bytes)
}

/// Write any serializable row type as an RFC-4180 table with a header.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Integrity(format!("cannot read {}: {e}", path.display())))?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Numeric table with an explicit header.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct LedgerCsvRow {
    t: f64,
    energy: f64,
    grad: f64,
    lr1: f64,
    y: f64,
    residual: Option<f64>,
}

/// `(t, ||u||^2, ||grad u||^2, ||u||^{r+1}_{r+1}, y, residual)`; the residual of
/// the step starting at each row, empty on the last row.
pub fn write_ledger_csv(path: &Path, rows: &[LedgerRow], residuals: &[f64]) -> Result<()> {
    let out: Vec<LedgerCsvRow> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| LedgerCsvRow { t: r.t, energy: r.energy, grad: r.grad, lr1: r.lr1, y: r.y, residual: residuals.get(i).copied() })
        .collect();
    write_rows(path, &out)
}

#[derive(Debug, Serialize)]
struct PathRow {
    t: f64,
    w: f64,
    y: f64,
}

/// `(t, W, y)` on the path nodes.
pub fn write_path_csv(path: &Path, w: &WienerPath, ou: &OUState) -> Result<()> {
    let rows: Vec<PathRow> = (0..w.n_nodes())
        .map(|i| {
            let t = w.node_time(i);
            PathRow { t, w: w.node_value(i), y: ou.y(t) }
        })
        .collect();
    write_rows(path, &rows)
}

/// Write bytes and flush, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

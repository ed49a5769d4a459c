//! CSV snapshots of a field on the grid, and the JSON index tying a run's
//! snapshots together.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! snapshot read back reproduces the field bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::InvariantEntry;
use crate::error::{FilamentError, Result};
use crate::grid::{GridSpec, Vec3, VecField};

const V_HEADER: [&str; 4] = ["s", "v1", "v2", "v3"];
const X_HEADER: [&str; 3] = ["x1", "x2", "x3"];

pub fn write_snapshot<W: Write>(w: W, v: &VecField, x: Option<&VecField>) -> Result<()> {
    if let Some(x) = x {
        v.grid().ensure_same(&x.grid())?;
    }
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = V_HEADER.to_vec();
    if x.is_some() {
        header.extend(X_HEADER);
    }
    wtr.write_record(&header)?;
    for (i, s) in v.grid().nodes().enumerate() {
        let mut row = vec![s.to_string()];
        row.extend(v.data()[i].iter().map(|c| c.to_string()));
        if let Some(x) = x {
            row.extend(x.data()[i].iter().map(|c| c.to_string()));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_snapshot_file(path: &Path, v: &VecField, x: Option<&VecField>) -> Result<()> {
    write_snapshot(std::fs::File::create(path)?, v, x)
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub v: VecField,
    pub x: Option<VecField>,
}

fn malformed(msg: impl Into<String>) -> FilamentError {
    FilamentError::Validation(format!("malformed snapshot: {}", msg.into()))
}

/// Reads a snapshot; the `s` column must be the uniform grid on [0, 1].
pub fn read_snapshot<R: Read>(r: R) -> Result<Snapshot> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let with_x = match header.len() {
        4 => false,
        7 => true,
        n => return Err(malformed(format!("expected 4 or 7 columns, found {n}"))),
    };
    let expected: Vec<&str> = V_HEADER.iter().chain(X_HEADER.iter()).take(header.len()).copied().collect();
    if header != expected {
        return Err(malformed(format!("header {:?}, expected {:?}", header, expected)));
    }
    let mut s = Vec::new();
    let mut v = Vec::new();
    let mut x = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        let vals = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| malformed(format!("row {}: '{f}' is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        s.push(vals[0]);
        v.push(Vec3::new(vals[1], vals[2], vals[3]));
        if with_x {
            x.push(Vec3::new(vals[4], vals[5], vals[6]));
        }
    }
    if s.len() < 2 {
        return Err(malformed("fewer than two rows"));
    }
    let grid = GridSpec::new(s.len() - 1)?;
    for (i, si) in s.iter().enumerate() {
        if (si - grid.node(i)).abs() > 1e-9 {
            return Err(malformed(format!(
                "s column is not the uniform grid with {} cells (row {}: {si})",
                grid.n_cells(),
                i + 1
            )));
        }
    }
    let v = VecField::new(grid, v)?;
    let x = if with_x { Some(VecField::new(grid, x)?) } else { None };
    Ok(Snapshot { v, x })
}

pub fn read_snapshot_file(path: &Path) -> Result<Snapshot> {
    read_snapshot(std::fs::File::open(path)?)
}

/// Index of a run's outputs, with the full configuration echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotIndex {
    pub times: Vec<f64>,
    pub files: Vec<String>,
    pub config: serde_json::Value,
    pub invariants: Vec<InvariantEntry>,
}

impl SnapshotIndex {
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }
}

//! Fields as a flat little-endian f64 array (`.bin`, row-major in z then r)
//! with a JSON header (`.json`) `{nr, nz, h, z_max, n, t}`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::evolve::Event;
use super::field::{Grid, LevelSetField};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHeader {
    pub nr: usize,
    pub nz: usize,
    pub h: f64,
    pub z_max: f64,
    pub n: usize,
    pub t: f64,
}

pub fn write_field(field: &LevelSetField, bin_path: &Path) -> Result<()> {
    let g = field.grid;
    let header = FieldHeader { nr: g.nr, nz: g.nz, h: g.h, z_max: g.z_max, n: field.n, t: field.t };
    let mut bytes = Vec::with_capacity(field.phi.len() * 8);
    for v in &field.phi {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(bin_path, bytes)?;
    std::fs::write(bin_path.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_field(bin_path: &Path) -> Result<LevelSetField> {
    let header: FieldHeader = serde_json::from_str(&std::fs::read_to_string(bin_path.with_extension("json"))?)?;
    let bytes = std::fs::read(bin_path)?;
    if bytes.len() != header.nr * header.nz * 8 {
        return Err(Error::Domain(format!("field file has {} bytes, header expects {}", bytes.len(), header.nr * header.nz * 8)));
    }
    let phi = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let grid = Grid { nr: header.nr, nz: header.nz, h: header.h, z_max: header.z_max };
    LevelSetField::new(grid, phi, header.n, header.t)
}

/// One JSON object per line.
pub fn write_events(events: &[Event], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for e in events {
        writeln!(f, "{}", serde_json::to_string(e)?)?;
    }
    Ok(())
}

/// Zero-level polylines as CSV rows `line,r,z`.
pub fn write_contours(lines: &[Vec<[f64; 2]>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["line", "r", "z"])?;
    for (l, pts) in lines.iter().enumerate() {
        for p in pts {
            w.write_record([l.to_string(), format!("{:.16e}", p[0]), format!("{:.16e}", p[1])])?;
        }
    }
    w.flush()?;
    Ok(())
}

//! Profile curves on disk: a CSV with header `r,z` plus a JSON sidecar
//! `{n, kind, aperture?}` next to it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::curve::{CurveKind, ProfileCurve};
use crate::error::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    pub kind: CurveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture: Option<f64>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

#[derive(Serialize, Deserialize)]
struct Row {
    r: f64,
    z: f64,
}

pub fn write_profile(curve: &ProfileCurve, path: &Path, aperture: Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in curve.points() {
        w.serialize(Row { r: p[0], z: p[1] })?;
    }
    w.flush()?;
    let side = Sidecar { n: curve.n(), kind: curve.kind(), aperture };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_profile(path: &Path) -> Result<(ProfileCurve, Option<f64>)> {
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let mut rd = csv::Reader::from_path(path)?;
    let mut pts = Vec::new();
    for row in rd.deserialize() {
        let row: Row = row?;
        pts.push([row.r, row.z]);
    }
    Ok((ProfileCurve::new(side.n, pts, side.kind)?, side.aperture))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.csv");
        let c = ProfileCurve::sphere(3, 0.7, 37).unwrap();
        write_profile(&c, &path, Some(0.25)).unwrap();
        let (back, ap) = read_profile(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(ap, Some(0.25));
        let head = std::fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("r,z\n"));
    }
}

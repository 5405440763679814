use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{BranchMatch, Certification, MorseLineRecord, MorseOptions, Witness};
use crate::expanders::{BranchLabel, Family};
use crate::geometry::io::write_profile;
use crate::levelset::{write_contours, write_events, write_field, zero_polylines, Event, Side};
use crate::report::{write_json, write_table};
use crate::Result;

#[derive(Serialize)]
struct ProfileSummary {
    family: Family,
    branch: BranchLabel,
    shooting_parameter: f64,
    lambda0: Option<f64>,
}

#[derive(Serialize)]
struct HandoffSummary {
    t: f64,
    s: f64,
    c2: f64,
    neck_radius: Option<f64>,
    residual_range: (f64, f64),
    residual_one_signed: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    n: usize,
    aperture: f64,
    side: Side,
    sigma_minus: ProfileSummary,
    sigma_plus: Option<ProfileSummary>,
    epsilons: Vec<f64>,
    t0_eps: Vec<f64>,
    omega0: f64,
    lookback: f64,
    max_cauchy_per_pair: Vec<f64>,
    warnings: &'a [String],
    handoff: Option<HandoffSummary>,
    levelset_dt: f64,
    levelset_steps: usize,
    events: &'a [Event],
    pinch_count: usize,
    limit: Option<&'a BranchMatch>,
    witness: Option<&'a Witness>,
    options: &'a MorseOptions,
    certification: &'a Certification,
    files: Vec<String>,
}

/// Writes the record under `dir`: manifest.json, per-eps trajectory tables,
/// every `stride`-th level-set snapshot, the event log and the terminal
/// contour. Returns the written paths.
pub fn save_record(record: &MorseLineRecord, dir: &Path, stride: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files: Vec<PathBuf> = Vec::new();

    let p = dir.join("sigma_minus.csv");
    write_profile(&record.sigma_minus.base, &p, Some(record.aperture))?;
    files.push(p);

    for (i, run) in record.ancient.runs.iter().enumerate() {
        let p = dir.join(format!("ancient_eps_{i}.csv"));
        let rows: Vec<Vec<f64>> = run
            .trajectory
            .diagnostics
            .iter()
            .map(|d| vec![d.t, d.t - run.t0, d.w0, d.w1, d.kappa, d.c2_proxy, d.e_rel, d.min_v, d.max_v])
            .collect();
        write_table(&p, &["t", "s", "w0", "w1", "kappa", "c2_proxy", "e_rel", "min_v", "max_v"], &rows)?;
        files.push(p);
    }
    let p = dir.join("ancient_w0.csv");
    let mut header = vec!["s".to_string()];
    header.extend((0..record.ancient.runs.len()).map(|i| format!("w0_eps_{i}")));
    let rows: Vec<Vec<f64>> = record
        .ancient
        .s
        .iter()
        .enumerate()
        .map(|(k, &s)| std::iter::once(s).chain(record.ancient.w0.iter().map(|row| row[k])).collect())
        .collect();
    write_table(&p, &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?;
    files.push(p);

    if let Some(h) = &record.handoff {
        let p = dir.join("handoff_profile.csv");
        write_profile(&h.curve, &p, Some(record.aperture))?;
        files.push(p);
    }

    let ls = dir.join("levelset");
    std::fs::create_dir_all(&ls)?;
    let stride = stride.max(1);
    let snaps = &record.forward.snapshots;
    for (k, s) in snaps.iter().enumerate() {
        if k % stride == 0 || k + 1 == snaps.len() {
            let p = ls.join(format!("snapshot_{k:04}.bin"));
            write_field(s, &p)?;
            files.push(p);
        }
    }
    let p = dir.join("events.jsonl");
    write_events(&record.forward.events, &p)?;
    files.push(p);
    let p = dir.join("terminal_profile.csv");
    write_contours(&zero_polylines(&record.forward.final_field), &p)?;
    files.push(p);

    let rel = |p: &PathBuf| p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned();
    let manifest = Manifest {
        n: record.n,
        aperture: record.aperture,
        side: record.side,
        sigma_minus: ProfileSummary {
            family: record.sigma_minus.family,
            branch: record.sigma_minus.branch,
            shooting_parameter: record.sigma_minus.shooting_parameter,
            lambda0: Some(record.lambda0_minus),
        },
        sigma_plus: record.sigma_plus.as_ref().map(|e| ProfileSummary {
            family: e.family,
            branch: e.branch,
            shooting_parameter: e.shooting_parameter,
            lambda0: record.lambda0_plus,
        }),
        epsilons: record.ancient.epsilons(),
        t0_eps: record.ancient.t0(),
        omega0: record.ancient.omega0,
        lookback: record.ancient.lookback,
        max_cauchy_per_pair: record.ancient.cauchy.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect(),
        warnings: &record.ancient.warnings,
        handoff: record.handoff.as_ref().map(|h| HandoffSummary {
            t: h.t,
            s: h.s,
            c2: h.c2,
            neck_radius: h.neck_radius,
            residual_range: h.residual_range,
            residual_one_signed: h.residual_one_signed,
        }),
        levelset_dt: record.forward.dt,
        levelset_steps: record.forward.steps,
        events: &record.forward.events,
        pinch_count: record.pinch_count(),
        limit: record.limit.as_ref(),
        witness: record.witness.as_ref(),
        options: &record.options,
        certification: &record.certification,
        files: files.iter().map(rel).collect(),
    };
    let p = dir.join("manifest.json");
    write_json(&p, &manifest)?;
    files.push(p);
    Ok(files)
}

use std::path::{Path, PathBuf};

use emflow::expanders::{order_expanders, solve_expander, ExpanderProfile, SolveOptions};
use emflow::geometry::io::write_profile;
use emflow::geometry::{relative_expander_entropy, weighted_norm, Cone};
use emflow::graphical::{check_monotone, run_flow, FlowBase, FlowOptions};
use emflow::levelset::{
    avoidance_test, barrier_constant, barrier_test, evolve, init_from_domain, monotone_violations, read_field,
    smooth_mean_convex, write_contours, write_events, write_field, zero_polylines, EvolveOptions, Grid,
    LevelSetEvolution, LevelSetField, Shape, Side,
};
use emflow::morse::{
    cone_deviation, expander_domain, perturb, run_morse_line, save_record, ClauseStatus, ForwardOptions, MorseOptions,
};
use emflow::report::write_table;
use emflow::spectral::{lowest_eigenpair, verdict_from};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{BallConfig, RunConfig, ShapeConfig};

/// One acceptance assertion of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
}

impl Check {
    fn new(name: &str, passed: bool, value: Option<f64>, threshold: Option<f64>) -> Self {
        Self { name: name.into(), passed, value, threshold }
    }
}

type Writer = Box<dyn FnOnce(&Path) -> emflow::Result<Vec<PathBuf>>>;

/// Everything a subcommand computed; nothing touches the disk until `write`.
pub struct Outcome {
    pub results: Value,
    pub acceptance: Vec<Check>,
    pub write: Writer,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.acceptance.iter().all(|c| c.passed)
    }
}

fn branches(cfg: &RunConfig) -> emflow::Result<Vec<ExpanderProfile>> {
    let cone = Cone::new(cfg.aperture, cfg.nappes)?;
    let (list, _) = order_expanders(solve_expander(cfg.n, &cone, &SolveOptions::default())?, 4.0);
    Ok(list)
}

fn pick_branch(cfg: &RunConfig, list: &[ExpanderProfile]) -> emflow::Result<usize> {
    if let Some(k) = cfg.branch {
        return if k < list.len() {
            Ok(k)
        } else {
            Err(emflow::Error::Config(format!("branch {k} out of range: {} profiles", list.len())))
        };
    }
    if list.len() == 1 {
        return Ok(0);
    }
    for (k, e) in list.iter().enumerate() {
        let base = FlowBase::new(e, cfg.grid.r_trunc, cfg.grid.m)?;
        if lowest_eigenpair(&base.op)?.lambda0 < 0.0 {
            return Ok(k);
        }
    }
    Err(emflow::Error::WrongBranch("no strictly unstable profile; set `branch`".into()))
}

fn profile_summary(k: usize, e: &ExpanderProfile) -> Value {
    json!({
        "index": k,
        "family": e.family,
        "branch": e.branch,
        "shooting_parameter": e.shooting_parameter,
        "achieved_aperture": e.achieved_aperture,
        "residual_sup": e.residual_sup,
        "components": e.components(),
    })
}

pub fn solve(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let cone = Cone::new(cfg.aperture, cfg.nappes)?;
    let (list, warnings) = order_expanders(solve_expander(cfg.n, &cone, &SolveOptions::default())?, 4.0);
    let worst_aperture = list.iter().map(|e| (e.achieved_aperture - cfg.aperture).abs()).fold(0.0, f64::max);
    let tol = SolveOptions::default().tol;
    let acceptance = vec![
        Check::new("profiles_found", !list.is_empty(), Some(list.len() as f64), Some(1.0)),
        Check::new("aperture_error", worst_aperture <= tol, Some(worst_aperture), Some(tol)),
    ];
    let results = json!({
        "profiles": list.iter().enumerate().map(|(k, e)| profile_summary(k, e)).collect::<Vec<_>>(),
        "warnings": warnings,
    });
    let aperture = cfg.aperture;
    let write: Writer = Box::new(move |dir| {
        let mut files = Vec::new();
        for (k, e) in list.iter().enumerate() {
            let p = dir.join(format!("profile_{k}.csv"));
            write_profile(&e.base, &p, Some(aperture))?;
            files.push(p);
        }
        Ok(files)
    });
    Ok(Outcome { results, acceptance, write })
}

pub fn spectrum(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let list = branches(cfg)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut acceptance = Vec::new();
    let selected: Vec<usize> = match cfg.branch {
        Some(k) => vec![pick_branch(cfg, &list).map(|_| k)?],
        None => (0..list.len()).collect(),
    };
    for &k in &selected {
        let base = FlowBase::new(&list[k], cfg.grid.r_trunc, cfg.grid.m)?;
        let sp = lowest_eigenpair(&base.op)?;
        let verdict = verdict_from(sp.lambda0).ok();
        let rel = (sp.rayleigh - sp.lambda0).abs() / sp.lambda0.abs().max(1.0);
        let positive = sp.f.iter().enumerate().all(|(i, &x)| !base.is_free(i) || x > 0.0);
        acceptance.push(Check::new(&format!("branch_{k}_eigenfunction_positive"), positive, None, None));
        acceptance.push(Check::new(&format!("branch_{k}_rayleigh_consistent"), rel <= 1e-6, Some(rel), Some(1e-6)));
        let mut s = profile_summary(k, &list[k]);
        s["lambda0"] = json!(sp.lambda0);
        s["lambda1"] = json!(sp.lambda1);
        s["verdict"] = json!(verdict);
        summaries.push(s);
        let pts = base.curve().points().to_vec();
        rows.push((k, pts, sp.f));
    }
    let results = json!({ "r_trunc": cfg.grid.r_trunc, "m": cfg.grid.m, "spectra": summaries });
    let write: Writer = Box::new(move |dir| {
        let mut files = Vec::new();
        for (k, pts, f) in rows {
            let p = dir.join(format!("eigenfunction_{k}.csv"));
            let table: Vec<Vec<f64>> = pts.iter().zip(&f).map(|(q, v)| vec![q[0], q[1], *v]).collect();
            write_table(&p, &["r", "z", "f"], &table)?;
            files.push(p);
        }
        Ok(files)
    });
    Ok(Outcome { results, acceptance, write })
}

pub fn flow_graphical(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let list = branches(cfg)?;
    let k = pick_branch(cfg, &list)?;
    let base = FlowBase::new(&list[k], cfg.grid.r_trunc, cfg.grid.m)?;
    let sp = lowest_eigenpair(&base.op)?;
    let side = cfg.morse.side;
    let v0 = if sp.lambda0 < 0.0 {
        perturb(&sp, cfg.flow.eps, side)?
    } else {
        let sgn = if side == Side::Normal { 1.0 } else { -1.0 };
        sp.f.iter().map(|x| sgn * cfg.flow.eps * x).collect()
    };
    let opts = FlowOptions {
        dt: cfg.flow.graph_dt,
        eta: cfg.flow.eta,
        sample_dt: cfg.flow.sample_dt,
        ..FlowOptions::default()
    };
    let traj = run_flow(&base, &v0, cfg.flow.t_end, &opts)?;
    let e_rel: Vec<f64> = traj.diagnostics.iter().map(|d| d.e_rel).collect();
    let rises = e_rel.windows(2).filter(|w| w[1] > w[0] + 1e-12 * w[0].abs().max(1e-12)).count();
    let sup = traj.snapshots.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let signed: Vec<Vec<f64>> = match side {
        Side::Normal => traj.snapshots.clone(),
        Side::Opposite => traj.snapshots.iter().map(|v| v.iter().map(|x| -x).collect()).collect(),
    };
    let viol = check_monotone(&traj.snapshot_times, &signed, 1e-9 * sup).len();
    let mut acceptance = vec![
        Check::new("no_breakdown", traj.breakdown.is_none(), traj.breakdown, None),
        Check::new("entropy_nonincreasing", rises == 0, Some(rises as f64), Some(0.0)),
    ];
    if sp.lambda0 < 0.0 {
        acceptance.push(Check::new("monotone", viol == 0, Some(viol as f64), Some(0.0)));
    }
    let last = traj.diagnostics.last().copied();
    let results = json!({
        "branch": profile_summary(k, &list[k]),
        "lambda0": sp.lambda0,
        "eps": cfg.flow.eps,
        "side": side,
        "w0_f": weighted_norm(base.curve(), &sp.f, 0, cfg.grid.r_trunc)?,
        "e_rel_initial": relative_expander_entropy(base.curve(), &v0, cfg.grid.r_trunc)?,
        "final": last,
        "breakdown": traj.breakdown,
        "samples": traj.diagnostics.len(),
    });
    let write: Writer = Box::new(move |dir| {
        let p = dir.join("diagnostics.csv");
        let rows: Vec<Vec<f64>> = traj
            .diagnostics
            .iter()
            .map(|d| vec![d.t, d.w0, d.w1, d.kappa, d.c2_proxy, d.e_rel, d.min_v, d.max_v])
            .collect();
        write_table(&p, &["t", "w0", "w1", "kappa", "c2_proxy", "e_rel", "min_v", "max_v"], &rows)?;
        let q = dir.join("final_profile.csv");
        write_profile(&base.pushed_curve(&traj.final_state.v)?, &q, None)?;
        Ok(vec![p, q])
    });
    Ok(Outcome { results, acceptance, write })
}

fn grid(cfg: &RunConfig) -> emflow::Result<Grid> {
    Grid::new(cfg.grid.h, cfg.grid.r_grid, cfg.grid.z_grid)
}

fn evolve_opts(cfg: &RunConfig) -> EvolveOptions {
    EvolveOptions { dt: cfg.flow.dt, sample_dt: cfg.flow.sample_dt, ..EvolveOptions::default() }
}

fn ball_field(b: &BallConfig, g: Grid, n: usize) -> emflow::Result<LevelSetField> {
    init_from_domain(&Shape::ball(b.z0, b.rho), g, n)
}

fn write_evolution(evo: &LevelSetEvolution, dir: &Path, prefix: &str) -> emflow::Result<Vec<PathBuf>> {
    let sub = dir.join(prefix);
    std::fs::create_dir_all(&sub)?;
    let mut files = Vec::new();
    for (k, s) in evo.snapshots.iter().enumerate() {
        let p = sub.join(format!("snapshot_{k:04}.bin"));
        write_field(s, &p)?;
        files.push(p);
    }
    let p = sub.join("events.jsonl");
    write_events(&evo.events, &p)?;
    files.push(p);
    let p = sub.join("final_contour.csv");
    write_contours(&zero_polylines(&evo.final_field), &p)?;
    files.push(p);
    Ok(files)
}

pub fn flow_levelset(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let g = grid(cfg)?;
    let shape = match &cfg.shape {
        ShapeConfig::Ball { z0, rho } => Shape::ball(*z0, *rho),
        ShapeConfig::HalfSpace { level, below } => Shape::HalfSpace { level: *level, below: *below },
        ShapeConfig::Expander { branch, side } => {
            let list = branches(cfg)?;
            let e = list
                .get(*branch)
                .ok_or_else(|| emflow::Error::Config(format!("branch {branch} out of range: {} profiles", list.len())))?;
            expander_domain(e, *side)
        }
    };
    let field = init_from_domain(&shape, g, cfg.n)?;
    let evo = evolve(&field, cfg.flow.t_end, &evolve_opts(cfg))?;
    let viol = monotone_violations(&evo.snapshots, 1);
    let acceptance = vec![
        Check::new("monotone", viol == 0, Some(viol as f64), Some(0.0)),
        Check::new("no_reentry", evo.reentries == 0, Some(evo.reentries as f64), Some(0.0)),
    ];
    let results = json!({
        "h": g.h,
        "dt": evo.dt,
        "steps": evo.steps,
        "events": evo.events,
        "extinction_time": evo.extinction_time(),
        "final_inside_cells": evo.final_field.inside_count(),
        "snapshots": evo.snapshots.len(),
    });
    let write: Writer = Box::new(move |dir| write_evolution(&evo, dir, "levelset"));
    Ok(Outcome { results, acceptance, write })
}

pub fn avoidance(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let g = grid(cfg)?;
    let a = &cfg.avoidance;
    let opts = evolve_opts(cfg);
    let ea = evolve(&ball_field(&a.a, g, cfg.n)?, cfg.flow.t_end, &opts)?;
    let eb = evolve(&ball_field(&a.b, g, cfg.n)?, cfg.flow.t_end, &opts)?;
    let rep = avoidance_test(&ea, &eb, a.c_grid)?;
    let worst = rep.distance.iter().zip(&rep.bound).map(|(d, b)| d - (b - rep.slack)).fold(f64::INFINITY, f64::min);
    let acceptance = vec![Check::new("avoidance", rep.pass, worst.is_finite().then_some(worst), Some(0.0))];
    let results = serde_json::to_value(&rep)?;
    let write: Writer = Box::new(move |dir| {
        let p = dir.join("avoidance.csv");
        let rows: Vec<Vec<f64>> =
            (0..rep.times.len()).map(|k| vec![rep.times[k], rep.distance[k], rep.bound[k]]).collect();
        write_table(&p, &["t", "distance", "bound"], &rows)?;
        Ok(vec![p])
    });
    Ok(Outcome { results, acceptance, write })
}

pub fn barrier(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let g = grid(cfg)?;
    let b = &cfg.barrier;
    let c0 = barrier_constant(cfg.n, b.p, b.delta);
    let c = b.c.unwrap_or(1.05 * c0);
    let span = b.delta * b.delta / c;
    let opts = EvolveOptions { sample_dt: (span / 20.0).min(cfg.flow.sample_dt), ..evolve_opts(cfg) };
    let evo = evolve(&ball_field(&b.ball, g, cfg.n)?, span, &opts)?;
    let rep = barrier_test(&evo, b.p, b.delta, c)?;
    let worst = rep.margin.iter().copied().fold(f64::INFINITY, f64::min);
    let acceptance = vec![Check::new("barrier", rep.pass, worst.is_finite().then_some(worst), Some(0.0))];
    let results = serde_json::to_value(&rep)?;
    let write: Writer = Box::new(move |dir| {
        let p = dir.join("barrier.csv");
        let rows: Vec<Vec<f64>> = rep.times.iter().zip(&rep.margin).map(|(t, m)| vec![*t, *m]).collect();
        write_table(&p, &["t", "margin"], &rows)?;
        Ok(vec![p])
    });
    Ok(Outcome { results, acceptance, write })
}

pub fn smooth(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let g = grid(cfg)?;
    let s = &cfg.smooth;
    let a = ball_field(&s.a, g, cfg.n)?;
    let b = ball_field(&s.b, g, cfg.n)?;
    let out = smooth_mean_convex(&a, &b, s.eps_s, &evolve_opts(cfg))?;
    let acceptance = vec![
        Check::new("strictly_mean_convex", out.speed.min > 0.0, Some(out.speed.min), Some(0.0)),
        Check::new("inside_both", out.escaped_cells == 0, Some(out.escaped_cells as f64), Some(0.0)),
    ];
    let results = json!({
        "corner_cells": out.corner_cells,
        "max_alignment": out.max_alignment,
        "speed": out.speed,
        "escaped_cells": out.escaped_cells,
        "inside_cells": out.field.inside_count(),
    });
    let write: Writer = Box::new(move |dir| {
        let p = dir.join("smoothed.bin");
        write_field(&out.field, &p)?;
        let q = dir.join("smoothed_contour.csv");
        write_contours(&zero_polylines(&out.field), &q)?;
        Ok(vec![p, q])
    });
    Ok(Outcome { results, acceptance, write })
}

fn morse_options(cfg: &RunConfig) -> MorseOptions {
    let d = MorseOptions::default();
    let mut ancient = d.ancient;
    ancient.flow.dt = cfg.flow.graph_dt;
    ancient.flow.eta = cfg.flow.eta;
    ancient.lookback = cfg.flow.lookback;
    let forward = ForwardOptions {
        h: cfg.grid.h,
        r_box: cfg.grid.r_grid,
        z_box: cfg.grid.z_grid,
        t_end: cfg.morse.t_end,
        ..d.forward
    };
    MorseOptions {
        r_trunc: cfg.grid.r_trunc,
        m: cfg.grid.m,
        eps_list: cfg.flow.eps_list.clone(),
        omega0: cfg.flow.omega0,
        omega0_factor: cfg.flow.omega0_factor,
        side: cfg.morse.side,
        ancient,
        forward,
        witness: cfg.morse.witness.map(|w| (w.z0, w.rho)),
        ..d
    }
}

pub fn morse_line(cfg: &RunConfig) -> emflow::Result<Outcome> {
    let list = branches(cfg)?;
    let k = pick_branch(cfg, &list)?;
    let opts = morse_options(cfg);
    let record = run_morse_line(&list[k], &list, &opts)?;
    let pinches = record.pinch_count();
    let mut acceptance = vec![Check::new("single_pinch", pinches == 1, Some(pinches as f64), Some(1.0))];
    for (name, c) in &record.certification.clauses {
        if c.status != ClauseStatus::NotEvaluated {
            acceptance.push(Check::new(name, c.passed(), c.value, c.threshold));
        }
    }
    let results = json!({
        "sigma_minus": profile_summary(k, &list[k]),
        "lambda0_minus": record.lambda0_minus,
        "t0_eps": record.ancient.t0(),
        "pinch_count": pinches,
        "limit": record.limit,
        "lambda0_plus": record.lambda0_plus,
        "certification": record.certification,
        "warnings": record.ancient.warnings,
    });
    let stride = cfg.morse.snapshot_stride;
    let write: Writer = Box::new(move |dir| save_record(&record, &dir.join("record"), stride));
    Ok(Outcome { results, acceptance, write })
}

/// Re-checks a saved flow-line record from its files alone: containment of
/// the stored level-set snapshots, growth of the ancient samples, the cone
/// asymptotics of the terminal contour and the stored terminal match.
pub fn certify_saved(cfg: &RunConfig, dir: &Path) -> emflow::Result<Outcome> {
    let dir = if dir.join("record").join("manifest.json").exists() { dir.join("record") } else { dir.to_path_buf() };
    let text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Value = serde_json::from_str(&text)?;
    let files: Vec<String> = manifest["files"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default();
    let mut snaps = Vec::new();
    for f in files.iter().filter(|f| f.ends_with(".bin")) {
        snaps.push(read_field(&dir.join(f))?);
    }
    if snaps.is_empty() {
        return Err(emflow::Error::Precondition("record holds no level-set snapshots".into()));
    }
    let viol = monotone_violations(&snaps, 1);

    let mut rdr = csv::ReaderBuilder::new().from_path(dir.join("ancient_w0.csv")).map_err(emflow::Error::from)?;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(emflow::Error::from)?;
        let row: Vec<f64> = rec.iter().skip(1).map(|x| x.parse().unwrap_or(f64::NAN)).collect();
        cols.resize(row.len(), Vec::new());
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let ratio = cols
        .iter()
        .map(|c| match (c.first(), c.last()) {
            (Some(&a), Some(&b)) if a > 0.0 => b / a,
            _ => 0.0,
        })
        .fold(f64::INFINITY, f64::min);
    let opts = &manifest["options"];
    let need = opts["certify"]["backward_ratio"].as_f64().unwrap_or(10.0);
    let eps_asym = opts["certify"]["eps_asym"].as_f64().unwrap_or(0.2);
    let r0 = opts["certify"]["r0"].as_f64().unwrap_or(2.5);
    let bin = opts["certify"]["bin"].as_f64().unwrap_or(0.1);
    let aperture = manifest["aperture"].as_f64().unwrap_or(f64::NAN);
    let last = snaps.last().expect("nonempty");
    let g = last.grid;
    let r1 = (g.r_max() - 3.0 * g.h).min(g.z_max - 3.0 * g.h);
    let dev = cone_deviation(&emflow::levelset::zero_points(last), aperture, r0, r1, bin);
    let cells = manifest["limit"]["distance"].as_f64().map(|d| d / g.h);
    let match_cells = opts["forward"]["match_cells"].as_f64().unwrap_or(10.0);
    let pinches = manifest["pinch_count"].as_u64().unwrap_or(0);
    let stored_pass = manifest["certification"]["clauses"]
        .as_object()
        .map(|m| m.values().all(|c| c["status"] != "fail"))
        .unwrap_or(false);

    let acceptance = vec![
        Check::new("monotone", viol == 0, Some(viol as f64), Some(0.0)),
        Check::new("backward_limit", ratio >= need, Some(ratio), Some(need)),
        Check::new("terminal_asymptotic_to_cone", dev.is_some_and(|d| d <= eps_asym), dev, Some(eps_asym)),
        Check::new("forward_match", cells.is_some_and(|c| c <= match_cells), cells, Some(match_cells)),
        Check::new("single_pinch", pinches == 1, Some(pinches as f64), Some(1.0)),
        Check::new("stored_certification", stored_pass, None, None),
    ];
    let results = json!({
        "record": dir.file_name().map(|s| s.to_string_lossy().into_owned()),
        "snapshots_checked": snaps.len(),
        "seed": cfg.seed,
        "stored_certification": manifest["certification"],
    });
    Ok(Outcome { results, acceptance, write: Box::new(|_| Ok(Vec::new())) })
}

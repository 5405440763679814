//! Flow lines out of a strictly unstable expander.
//!
//! The expander is pushed off itself along its first eigenfunction by
//! eps f, the graphical flow is run until the gauge breaks, and each run is
//! translated in time so that it passes through the weighted size omega0 at
//! s = 0. Shrinking eps gives the ancient solution on s <= 0. The finest run
//! is then handed to the level-set engine, which carries the flow through its
//! singularities to a stable expander.

mod certify;
mod record;

pub use certify::{certify, cone_deviation, Certification, CertifyOptions, Clause, ClauseStatus};
pub use record::save_record;

use serde::{Deserialize, Serialize};

use crate::expanders::{BranchLabel, ExpanderProfile, Family};
use crate::geometry::{c_proxies, weighted_norm, Nappes, ProfileCurve};
use crate::graphical::{run_flow, FlowBase, FlowOptions, GraphFlowTrajectory};
use crate::levelset::{
    densify, evolve, hausdorff, init_from_domain, interface_speed, zero_points, EvolveOptions, Grid,
    InterfaceSpeed, LevelSetEvolution, LevelSetField, Shape, Side,
};
use crate::spectral::{lowest_eigenpair, verdict_from, SpectralResult, Verdict};
use crate::{Error, Result};

/// Initial graph `eps f` (or `-eps f` on the opposite side) over an unstable
/// expander with first eigenfunction `f`.
pub fn perturb(spectrum: &SpectralResult, eps: f64, side: Side) -> Result<Vec<f64>> {
    match verdict_from(spectrum.lambda0) {
        Ok(Verdict::StrictlyUnstable) => {}
        _ => {
            return Err(Error::WrongBranch(format!(
                "lambda0 = {:.6e}: the base is not strictly unstable",
                spectrum.lambda0
            )))
        }
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::Domain(format!("perturbation size {eps} must be finite and non-negative")));
    }
    let sgn = match side {
        Side::Normal => 1.0,
        Side::Opposite => -1.0,
    };
    Ok(spectrum.f.iter().map(|x| sgn * eps * x).collect())
}

/// First time at which the sampled `w0` reaches `omega0`. Within the
/// crossing interval ln w0 is interpolated through the surrounding samples
/// (up to four), which is exact for exponential growth and keeps the
/// calibration error well below the sampling interval.
pub fn calibrate_time_translation(times: &[f64], w0: &[f64], omega0: f64) -> Result<f64> {
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::Precondition(format!("omega0 = {omega0} must be positive")));
    }
    if times.len() != w0.len() || times.is_empty() {
        return Err(Error::Precondition("times and w0 must be non-empty and of equal length".into()));
    }
    if w0[0] >= omega0 {
        return Err(Error::Precondition(format!("w0 starts at {:.3e}, already above omega0 = {omega0:.3e}", w0[0])));
    }
    let Some(k) = (1..w0.len()).find(|&k| w0[k] >= omega0) else {
        let max_w0 = w0.iter().copied().fold(0.0, f64::max);
        return Err(Error::Calibration { omega0, max_w0 });
    };
    let (ta, tb) = (times[k - 1], times[k]);
    if w0[k - 1] <= 0.0 {
        let theta = (omega0 - w0[k - 1]) / (w0[k] - w0[k - 1]);
        return Ok(ta + theta * (tb - ta));
    }
    let lo = k.saturating_sub(2).max(w0[..k].iter().rposition(|&x| x <= 0.0).map_or(0, |z| z + 1));
    let hi = (k + 1).min(w0.len() - 1);
    let idx: Vec<usize> = (lo..=hi).collect();
    let target = omega0.ln();
    let g = |t: f64| -> f64 {
        idx.iter()
            .map(|&a| {
                let l: f64 = idx.iter().filter(|&&b| b != a).map(|&b| (t - times[b]) / (times[a] - times[b])).product();
                l * w0[a].ln()
            })
            .sum::<f64>()
            - target
    };
    let (mut a, mut b) = (ta, tb);
    let (ga, gb) = (g(a), g(b));
    if !(ga <= 0.0 && gb >= 0.0) {
        let theta = (omega0 / w0[k - 1]).ln() / (w0[k] / w0[k - 1]).ln();
        return Ok(ta + theta * (tb - ta));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-15 * (1.0 + b.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

pub fn calibrate_trajectory(traj: &GraphFlowTrajectory, omega0: f64) -> Result<f64> {
    calibrate_time_translation(&traj.times, &traj.w0(), omega0)
}

/// Six-point Lagrange interpolation of stored snapshots at time `t` (fewer
/// points near the ends of short series).
pub fn interpolate_snapshot(times: &[f64], snaps: &[Vec<f64>], t: f64) -> Option<Vec<f64>> {
    let n = times.len();
    if n == 0 || t < times[0] - 1e-12 || t > times[n - 1] + 1e-12 {
        return None;
    }
    let p = n.min(6);
    let k = times.iter().rposition(|&x| x <= t).unwrap_or(0);
    let start = k.saturating_sub(p / 2 - usize::from(p > 1)).min(n - p);
    let idx: Vec<usize> = (start..start + p).collect();
    let mut out = vec![0.0; snaps[0].len()];
    for &a in &idx {
        let mut l = 1.0;
        for &b in &idx {
            if a != b {
                l *= (t - times[b]) / (times[a] - times[b]);
            }
        }
        for (o, v) in out.iter_mut().zip(&snaps[a]) {
            *o += l * v;
        }
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AncientOptions {
    pub flow: FlowOptions,
    /// Horizon of each graphical run; runs end earlier when the gauge breaks.
    pub t_max: f64,
    pub lookback: f64,
    /// Spacing of the translated clock on [-lookback, 0].
    pub ds: f64,
}

impl Default for AncientOptions {
    fn default() -> Self {
        Self { flow: FlowOptions::default(), t_max: 6.0, lookback: 0.6, ds: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AncientRun {
    pub eps: f64,
    pub t0: f64,
    pub trajectory: GraphFlowTrajectory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AncientFamily {
    pub omega0: f64,
    pub lookback: f64,
    pub s: Vec<f64>,
    pub runs: Vec<AncientRun>,
    /// `samples[i][k]` is the run for `eps_i` at translated time `s[k]`.
    pub samples: Vec<Vec<Vec<f64>>>,
    pub w0: Vec<Vec<f64>>,
    /// `cauchy[i][k]`: sup difference of runs i and i+1 at `s[k]`.
    pub cauchy: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl AncientFamily {
    pub fn epsilons(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.eps).collect()
    }

    pub fn t0(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.t0).collect()
    }

    pub fn finest(&self) -> Option<&[Vec<f64>]> {
        self.samples.last().map(|v| v.as_slice())
    }
}

/// Runs the perturbed flows for every eps, calibrates them against `omega0`
/// and samples the translated flows on [-lookback, 0].
pub fn ancient_limit(
    base: &FlowBase,
    spectrum: &SpectralResult,
    eps_list: &[f64],
    omega0: f64,
    side: Side,
    opts: &AncientOptions,
) -> Result<AncientFamily> {
    if eps_list.len() < 3 {
        return Err(Error::Precondition(format!("need at least 3 values of eps, got {}", eps_list.len())));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("eps list must be strictly decreasing".into()));
    }
    if !(opts.lookback > 0.0 && opts.ds > 0.0) {
        return Err(Error::Precondition("lookback and ds must be positive".into()));
    }
    let steps = (opts.lookback / opts.ds).round().max(1.0) as usize;
    let s: Vec<f64> = (0..=steps).map(|k| -opts.lookback + opts.lookback * k as f64 / steps as f64).collect();
    let flow = FlowOptions { keep_every: 1, stop_w0: None, ..opts.flow };
    let mut runs = Vec::new();
    let mut samples = Vec::new();
    let mut w0 = Vec::new();
    for &eps in eps_list {
        let v0 = perturb(spectrum, eps, side)?;
        let trajectory = run_flow(base, &v0, opts.t_max, &flow)?;
        let t0 = calibrate_trajectory(&trajectory, omega0)?;
        if t0 < opts.lookback {
            return Err(Error::Precondition(format!(
                "lookback {} exceeds the calibration time {t0:.4} for eps = {eps:e}",
                opts.lookback
            )));
        }
        let mut row = Vec::with_capacity(s.len());
        let mut wrow = Vec::with_capacity(s.len());
        for &sk in &s {
            let v = interpolate_snapshot(&trajectory.snapshot_times, &trajectory.snapshots, t0 + sk)
                .ok_or_else(|| Error::Precondition(format!("no samples around t = {}", t0 + sk)))?;
            wrow.push(weighted_norm(base.curve(), &v, 0, base.r_trunc())?);
            row.push(v);
        }
        samples.push(row);
        w0.push(wrow);
        runs.push(AncientRun { eps, t0, trajectory });
    }
    let mut warnings = Vec::new();
    if runs.windows(2).any(|w| !(w[1].t0 > w[0].t0)) {
        warnings.push("calibration times are not strictly increasing as eps decreases".into());
    }
    let cauchy: Vec<Vec<f64>> = samples
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
                .collect()
        })
        .collect();
    for (i, pair) in cauchy.windows(2).enumerate() {
        if let Some(k) = (0..s.len()).find(|&k| !(pair[1][k] < pair[0][k])) {
            warnings.push(format!(
                "differences do not decrease from pair {i} to pair {} at s = {:.3}",
                i + 1,
                s[k]
            ));
        }
    }
    Ok(AncientFamily { omega0, lookback: opts.lookback, s, runs, samples, w0, cauchy, warnings })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HandoffOptions {
    /// Switch once the C2 proxy exceeds this fraction of eta.
    pub c2_fraction: f64,
    /// ... or once a neck is thinner than this many level-set cells.
    pub neck_cells: f64,
}

impl Default for HandoffOptions {
    fn default() -> Self {
        Self { c2_fraction: 0.5, neck_cells: 10.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Handoff {
    /// Time on the clock of the graphical run.
    pub t: f64,
    /// Translated time.
    pub s: f64,
    pub v: Vec<f64>,
    pub c2: f64,
    pub neck_radius: Option<f64>,
    /// Range of R(v) - R(0) over interior nodes, oriented so that negative
    /// values move the curve into the set. One-signed allows positive values
    /// up to 1e-8 of the range (round-off).
    pub residual_range: (f64, f64),
    pub residual_one_signed: bool,
    pub curve: ProfileCurve,
}

/// Smallest distance to the axis of a neck-type curve.
pub fn neck_radius(curve: &ProfileCurve) -> f64 {
    curve.points().iter().map(|p| p[0]).fold(f64::INFINITY, f64::min)
}

/// The first sample after calibration at which the graph should be passed to
/// the level-set engine with cell size `h`.
pub fn handoff(base: &FlowBase, run: &AncientRun, side: Side, h: f64, opts: &HandoffOptions) -> Result<Handoff> {
    let traj = &run.trajectory;
    let neck = base.op.family == Family::Neck;
    for (k, &t) in traj.snapshot_times.iter().enumerate() {
        if t < run.t0 {
            continue;
        }
        let v = &traj.snapshots[k];
        let c2 = c_proxies(&base.diff, v).2;
        let curve = base.pushed_curve(v)?;
        let radius = neck.then(|| neck_radius(&curve));
        let thin = radius.is_some_and(|r| r < opts.neck_cells * h);
        if c2 > opts.c2_fraction * traj.eta || thin {
            let (lo, hi) = oriented_residual_range(base, v, side);
            return Ok(Handoff {
                t,
                s: t - run.t0,
                v: v.clone(),
                c2,
                neck_radius: radius,
                residual_range: (lo, hi),
                residual_one_signed: lo < 0.0 && hi <= 1e-8 * lo.abs(),
                curve,
            });
        }
    }
    Err(Error::Precondition(format!(
        "handoff criterion never met before t = {:.4} (breakdown {:?})",
        traj.final_state.t, traj.breakdown
    )))
}

fn oriented_residual_range(base: &FlowBase, v: &[f64], side: Side) -> (f64, f64) {
    let r1 = base.pushed_residual(v);
    let r0 = base.pushed_residual(&vec![0.0; v.len()]);
    let sgn = match side {
        Side::Normal => 1.0,
        Side::Opposite => -1.0,
    };
    let curve = base.curve();
    let reach = base.r_trunc() - 1.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..v.len() {
        let p = curve.points()[i];
        if !base.is_free(i) || p[0].hypot(p[1]) > reach {
            continue;
        }
        let d = sgn * (r1[i] - r0[i]);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ForwardOptions {
    pub h: f64,
    pub r_box: f64,
    pub z_box: f64,
    pub t_end: f64,
    pub evolve: EvolveOptions,
    /// Acceptance radius of the branch match, in cells.
    pub match_cells: f64,
    /// The runner-up must be at least this factor farther away.
    pub ambiguity: f64,
    /// Bound on the mean interface speed of the terminal state.
    pub speed_tol: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            h: 1.0 / 128.0,
            r_box: 3.0,
            z_box: 3.0,
            t_end: 2.5,
            evolve: EvolveOptions { sample_dt: 0.1, ..EvolveOptions::default() },
            match_cells: 10.0,
            ambiguity: 2.0,
            speed_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchMatch {
    pub index: usize,
    pub family: Family,
    pub label: BranchLabel,
    pub shooting_parameter: f64,
    pub distance: f64,
    /// Distances to every candidate, in input order.
    pub distances: Vec<f64>,
    pub speed: InterfaceSpeed,
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub evolution: LevelSetEvolution,
    pub limit: BranchMatch,
}

fn interior(grid: &Grid, margin: f64) -> impl Fn([f64; 2]) -> bool {
    let (rm, zm) = (grid.r_max() - margin, grid.z_max - margin);
    move |p: [f64; 2]| p[0] <= rm && p[1].abs() <= zm
}

/// Every sheet of the revolved expander as profile curves.
pub fn sheets(e: &ExpanderProfile) -> Vec<ProfileCurve> {
    match (e.family, e.cone.nappes) {
        (Family::Disk, Nappes::DoubleSymmetric) => vec![e.base.clone(), e.base.reflected()],
        _ => vec![e.base.clone()],
    }
}

/// The set bounded by an expander on the side its normal points to (for a
/// mirrored disk pair: above the upper disk and below the lower one).
pub fn expander_domain(e: &ExpanderProfile, side: Side) -> Shape {
    let flip = |s: Side| match s {
        Side::Normal => Side::Opposite,
        Side::Opposite => Side::Normal,
    };
    match (e.family, e.cone.nappes) {
        (Family::Disk, Nappes::DoubleSymmetric) => Shape::Union(vec![
            Shape::Profile { curve: e.base.clone(), side },
            Shape::Profile { curve: e.base.reflected(), side: flip(side) },
        ]),
        _ => Shape::Profile { curve: e.base.clone(), side },
    }
}

/// Boundary Hausdorff distance between the zero level of `field` and an
/// expander, both clipped to the grid minus a two-cell margin.
pub fn distance_to_expander(field: &LevelSetField, e: &ExpanderProfile) -> f64 {
    let g = field.grid;
    let keep = interior(&g, 2.0 * g.h);
    let pts: Vec<[f64; 2]> = sheets(e).iter().flat_map(|c| densify(c.points(), 0.5 * g.h, &keep)).collect();
    let zero: Vec<[f64; 2]> = zero_points(field).into_iter().filter(|p| keep(*p)).collect();
    if pts.is_empty() || zero.is_empty() {
        return f64::INFINITY;
    }
    hausdorff(&zero, &pts, 4.0 * g.h)
}

/// Nearest solved expander to the zero level of `field`.
pub fn match_branch(field: &LevelSetField, branches: &[ExpanderProfile], opts: &ForwardOptions) -> Result<BranchMatch> {
    if branches.is_empty() {
        return Err(Error::UnresolvedLimit("no candidate expanders".into()));
    }
    let g = field.grid;
    let distances: Vec<f64> = branches.iter().map(|e| distance_to_expander(field, e)).collect();
    let mut order: Vec<usize> = (0..branches.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let best = order[0];
    let d = distances[best];
    let tol = opts.match_cells * g.h;
    if !(d <= tol) {
        return Err(Error::UnresolvedLimit(format!(
            "nearest expander (index {best}) is {:.2} cells away, above {} (distances {:?})",
            d / g.h,
            opts.match_cells,
            distances
        )));
    }
    if let Some(&second) = order.get(1) {
        if distances[second] < opts.ambiguity * d {
            return Err(Error::UnresolvedLimit(format!(
                "ambiguous limit: expanders {best} and {second} at {:.3e} and {:.3e}",
                d, distances[second]
            )));
        }
    }
    let speed = interface_speed(field, interior(&g, 4.0 * g.h));
    if !(speed.mean_abs <= opts.speed_tol) {
        return Err(Error::UnresolvedLimit(format!(
            "terminal state still moving: mean interface speed {:.3e} above {:.3e}",
            speed.mean_abs, opts.speed_tol
        )));
    }
    let e = &branches[best];
    Ok(BranchMatch {
        index: best,
        family: e.family,
        label: e.branch,
        shooting_parameter: e.shooting_parameter,
        distance: d,
        distances,
        speed,
    })
}

/// Level-set continuation from a profile curve bounding the set on `side`,
/// followed by matching of the terminal state.
pub fn forward_continue(
    curve: &ProfileCurve,
    side: Side,
    branches: &[ExpanderProfile],
    opts: &ForwardOptions,
) -> Result<ForwardResult> {
    let grid = Grid::new(opts.h, opts.r_box, opts.z_box)?;
    let field = init_from_domain(&Shape::Profile { curve: curve.clone(), side }, grid, curve.n())?;
    let evolution = evolve(&field, opts.t_end, &opts.evolve)?;
    let limit = match_branch(&evolution.final_field, branches, opts)?;
    Ok(ForwardResult { evolution, limit })
}

/// Whether every cell within `rho` of (0, z0) lies in the set.
pub fn ball_contained(field: &LevelSetField, z0: f64, rho: f64) -> bool {
    let g = field.grid;
    (0..g.len()).all(|k| {
        let p = g.point(k);
        p[0].hypot(p[1] - z0) > rho || field.phi[k] <= 0.0
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub z0: f64,
    pub rho: f64,
    /// Containment at every stored level-set snapshot.
    pub contained: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseOptions {
    pub r_trunc: f64,
    pub m: usize,
    pub eps_list: Vec<f64>,
    /// Defaults to `omega0_factor` times the weighted norm of f.
    pub omega0: Option<f64>,
    pub omega0_factor: f64,
    pub side: Side,
    pub ancient: AncientOptions,
    pub handoff: HandoffOptions,
    pub forward: ForwardOptions,
    /// Ball (z0, rho) expected to stay inside the flow.
    pub witness: Option<(f64, f64)>,
    pub certify: CertifyOptions,
}

impl Default for MorseOptions {
    fn default() -> Self {
        Self {
            r_trunc: 8.0,
            m: 2000,
            eps_list: vec![1e-3, 1e-4, 1e-5],
            omega0: None,
            omega0_factor: 0.03,
            side: Side::Normal,
            ancient: AncientOptions::default(),
            handoff: HandoffOptions::default(),
            forward: ForwardOptions::default(),
            witness: Some((2.0, 0.5)),
            certify: CertifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MorseLineRecord {
    pub n: usize,
    pub aperture: f64,
    pub sigma_minus: ExpanderProfile,
    pub lambda0_minus: f64,
    pub side: Side,
    pub ancient: AncientFamily,
    /// Pushed curve of the finest run at s = -lookback.
    pub early_curve: Option<ProfileCurve>,
    pub handoff: Option<Handoff>,
    pub forward: LevelSetEvolution,
    pub sigma_plus: Option<ExpanderProfile>,
    pub limit: Option<BranchMatch>,
    pub lambda0_plus: Option<f64>,
    pub witness: Option<Witness>,
    pub options: MorseOptions,
    pub certification: Certification,
}

impl MorseLineRecord {
    pub fn pinch_count(&self) -> usize {
        self.forward.events.iter().filter(|e| e.kind == crate::levelset::EventKind::Pinch).count()
    }
}

/// The whole pipeline: ancient family, handoff, level-set continuation,
/// branch matching and certification.
pub fn run_morse_line(
    sigma_minus: &ExpanderProfile,
    branches: &[ExpanderProfile],
    opts: &MorseOptions,
) -> Result<MorseLineRecord> {
    let base = FlowBase::new(sigma_minus, opts.r_trunc, opts.m)?;
    let spectrum = lowest_eigenpair(&base.op)?;
    let omega0 = match opts.omega0 {
        Some(w) => w,
        None => opts.omega0_factor * weighted_norm(base.curve(), &spectrum.f, 0, opts.r_trunc)?,
    };
    let ancient = ancient_limit(&base, &spectrum, &opts.eps_list, omega0, opts.side, &opts.ancient)?;
    let finest = ancient.runs.last().expect("at least three runs");
    let early_curve = ancient.finest().and_then(|s| s.first()).map(|v| base.pushed_curve(v)).transpose()?;
    let hand = handoff(&base, finest, opts.side, opts.forward.h, &opts.handoff)?;
    let fwd = forward_continue(&hand.curve, opts.side, branches, &opts.forward)?;
    let sigma_plus = branches[fwd.limit.index].clone();
    let lambda0_plus = {
        let b = FlowBase::new(&sigma_plus, opts.r_trunc, opts.m)?;
        lowest_eigenpair(&b.op)?.lambda0
    };
    let witness = opts.witness.map(|(z0, rho)| Witness {
        z0,
        rho,
        contained: fwd.evolution.snapshots.iter().map(|s| ball_contained(s, z0, rho)).collect(),
    });
    let mut record = MorseLineRecord {
        n: sigma_minus.base.n(),
        aperture: sigma_minus.cone.aperture,
        sigma_minus: sigma_minus.clone(),
        lambda0_minus: spectrum.lambda0,
        side: opts.side,
        ancient,
        early_curve,
        handoff: Some(hand),
        forward: fwd.evolution,
        sigma_plus: Some(sigma_plus),
        limit: Some(fwd.limit),
        lambda0_plus: Some(lambda0_plus),
        witness,
        options: opts.clone(),
        certification: Certification::default(),
    };
    record.certification = certify(&record, &opts.certify);
    Ok(record)
}

#[cfg(test)]
mod tests;

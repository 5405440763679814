use serde::{Deserialize, Serialize};

use super::contour::{boundary_hausdorff, zero_points, PointIndex};
use super::evolve::{evolve, normal_speed, EvolveOptions, LevelSetEvolution};
use super::field::{Grid, LevelSetField};
use crate::{Error, Result};

/// Arrival-time field of a monotone run; errors if any cell re-entered.
pub fn arrival_time(evo: &LevelSetEvolution) -> Result<Vec<f64>> {
    if evo.reentries > 0 {
        return Err(Error::Partition(format!("{} cells re-entered the set", evo.reentries)));
    }
    Ok(evo.arrival.clone())
}

fn dilate(grid: &Grid, mask: &[bool], cells: usize) -> Vec<bool> {
    let mut cur = mask.to_vec();
    for _ in 0..cells {
        let mut next = cur.clone();
        for j in 0..grid.nz {
            for i in 0..grid.nr {
                let k = grid.idx(i, j);
                if cur[k] {
                    continue;
                }
                let i0 = i.saturating_sub(1);
                let i1 = (i + 1).min(grid.nr - 1);
                let j0 = j.saturating_sub(1);
                let j1 = (j + 1).min(grid.nz - 1);
                'outer: for b in j0..=j1 {
                    for a in i0..=i1 {
                        if cur[grid.idx(a, b)] {
                            next[k] = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Cells of `later` farther than `slack` cells (Chebyshev) from `earlier`.
pub fn containment_violations(earlier: &LevelSetField, later: &LevelSetField, slack: usize) -> usize {
    let grown = dilate(&earlier.grid, &earlier.mask(), slack);
    later.phi.iter().zip(grown).filter(|(&v, g)| v <= 0.0 && !g).count()
}

/// Violating cells over every ordered pair of stored snapshots.
pub fn monotone_violations(snapshots: &[LevelSetField], slack: usize) -> usize {
    let Some(first) = snapshots.first() else { return 0 };
    let g = first.grid;
    // first snapshot index at which the dilated mask misses the cell, and
    // last snapshot index at which the cell is inside
    let mut first_miss = vec![usize::MAX; g.len()];
    let mut last_in = vec![None; g.len()];
    for (s, snap) in snapshots.iter().enumerate() {
        let mask = snap.mask();
        let grown = dilate(&g, &mask, slack);
        for k in 0..g.len() {
            if !grown[k] && first_miss[k] == usize::MAX {
                first_miss[k] = s;
            }
            if mask[k] {
                last_in[k] = Some(s);
            }
        }
    }
    (0..g.len()).filter(|&k| matches!(last_in[k], Some(l) if first_miss[k] < l)).count()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionReport {
    pub times: Vec<f64>,
    /// Cells lying on two different arrival-time levels.
    pub shared_cells: usize,
    /// Level cells farther than one cell from the snapshot boundary at that time.
    pub off_boundary_cells: usize,
    pub level_sizes: Vec<usize>,
}

/// Cells on the level {u = t}: u >= t with a 4-neighbour below t.
pub fn arrival_level(grid: &Grid, u: &[f64], t: f64) -> Vec<bool> {
    (0..grid.len())
        .map(|k| u[k] >= t && grid.neighbors(k).any(|q| u[q] < t))
        .collect()
}

pub fn partition_check(evo: &LevelSetEvolution, times: &[f64]) -> PartitionReport {
    let g = evo.grid;
    let levels: Vec<Vec<bool>> = times.iter().map(|&t| arrival_level(&g, &evo.arrival, t)).collect();
    let mut shared = 0;
    for k in 0..g.len() {
        if levels.iter().filter(|l| l[k]).count() > 1 {
            shared += 1;
        }
    }
    let mut off = 0;
    for (l, &t) in levels.iter().zip(times) {
        let Some(snap) = evo.snapshots.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())) else {
            continue;
        };
        let iface: Vec<bool> = {
            let mut m = vec![false; g.len()];
            for k in snap.interface_cells() {
                m[k] = true;
            }
            dilate(&g, &m, 1)
        };
        off += (0..g.len()).filter(|&k| l[k] && !iface[k]).count();
    }
    PartitionReport {
        times: times.to_vec(),
        shared_cells: shared,
        off_boundary_cells: off,
        level_sizes: levels.iter().map(|l| l.iter().filter(|&&b| b).count()).collect(),
    }
}

/// Inside cells of any snapshot outside the initial bounding box grown by `slack` cells.
pub fn compactness_violations(evo: &LevelSetEvolution, slack: usize) -> usize {
    let Some(first) = evo.snapshots.first() else { return 0 };
    let g = evo.grid;
    let bbox = |f: &LevelSetField| {
        let mut b = [usize::MAX, 0, usize::MAX, 0];
        for k in 0..g.len() {
            if f.phi[k] <= 0.0 {
                let (i, j) = g.ij(k);
                b = [b[0].min(i), b[1].max(i), b[2].min(j), b[3].max(j)];
            }
        }
        b
    };
    let b0 = bbox(first);
    let mut bad = 0;
    for s in &evo.snapshots[1..] {
        for k in 0..g.len() {
            if s.phi[k] <= 0.0 {
                let (i, j) = g.ij(k);
                if i + slack < b0[0] || i > b0[1] + slack || j + slack < b0[2] || j > b0[3] + slack {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Distance between two sets in the meridian half-plane (0 if they overlap).
pub fn set_distance(a: &LevelSetField, b: &LevelSetField) -> f64 {
    if a.phi.iter().zip(&b.phi).any(|(&x, &y)| x <= 0.0 && y <= 0.0) {
        return 0.0;
    }
    let pa = zero_points(a);
    let idx = PointIndex::new(&zero_points(b), 4.0 * a.grid.h);
    pa.iter().map(|&p| idx.nearest(p)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvoidanceReport {
    pub eta: f64,
    pub lambda: f64,
    pub slack: f64,
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    pub bound: Vec<f64>,
    pub pass: bool,
}

/// Avoidance with rate lambda = -1/2: d(t) >= e^{-t/2} eta - c_grid h at
/// every common sample time before either run goes extinct.
pub fn avoidance_test(a: &LevelSetEvolution, b: &LevelSetEvolution, c_grid: f64) -> Result<AvoidanceReport> {
    if a.grid != b.grid {
        return Err(Error::Precondition("evolutions on different grids".into()));
    }
    let (Some(a0), Some(b0)) = (a.snapshots.first(), b.snapshots.first()) else {
        return Err(Error::Precondition("evolutions without snapshots".into()));
    };
    let eta = set_distance(a0, b0);
    if eta <= 0.0 {
        return Err(Error::Precondition("initial sets overlap".into()));
    }
    let lambda = -0.5;
    let slack = c_grid * a.grid.h;
    let t0 = a0.t;
    let mut rep = AvoidanceReport { eta, lambda, slack, times: vec![], distance: vec![], bound: vec![], pass: true };
    for sa in &a.snapshots {
        let Some(sb) = b.snapshots.iter().find(|s| (s.t - sa.t).abs() < 1e-9) else { continue };
        if sa.inside_count() == 0 || sb.inside_count() == 0 {
            break;
        }
        let d = set_distance(sa, sb);
        let bound = (lambda * (sa.t - t0)).exp() * eta;
        rep.pass &= d >= bound - slack;
        rep.times.push(sa.t);
        rep.distance.push(d);
        rep.bound.push(bound);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BarrierReport {
    pub p: [f64; 2],
    pub delta: f64,
    pub c: f64,
    pub c0: f64,
    pub times: Vec<f64>,
    /// dist(p, Omega(t)) minus the barrier radius.
    pub margin: Vec<f64>,
    pub pass: bool,
}

/// The constant 4n + 2 delta sup_{B_delta(p)} |x|/2.
pub fn barrier_constant(n: usize, p: [f64; 2], delta: f64) -> f64 {
    4.0 * n as f64 + 2.0 * delta * (p[0].hypot(p[1]) + delta) / 2.0
}

pub fn point_distance(field: &LevelSetField, p: [f64; 2]) -> f64 {
    if field.sample(p[0], p[1]) <= 0.0 {
        return 0.0;
    }
    let pts = zero_points(field);
    pts.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).fold(f64::INFINITY, f64::min)
}

/// Shrinking balls of radius sqrt(delta^2 - c t) centred at p stay disjoint
/// from the evolving set on [0, delta^2/c].
pub fn barrier_test(evo: &LevelSetEvolution, p: [f64; 2], delta: f64, c: f64) -> Result<BarrierReport> {
    let c0 = barrier_constant(evo.n, p, delta);
    if !(c > c0) {
        return Err(Error::Precondition(format!("c = {c} does not exceed c0 = {c0}")));
    }
    let Some(first) = evo.snapshots.first() else {
        return Err(Error::Precondition("evolution without snapshots".into()));
    };
    if point_distance(first, p) <= delta {
        return Err(Error::Precondition("barrier ball meets the initial set".into()));
    }
    let t0 = first.t;
    let span = delta * delta / c;
    let mut rep = BarrierReport { p, delta, c, c0, times: vec![], margin: vec![], pass: true };
    for s in &evo.snapshots {
        let tau = s.t - t0;
        if tau > span + 1e-12 {
            break;
        }
        let radius = (delta * delta - c * tau).max(0.0).sqrt();
        let m = point_distance(s, p) - radius;
        rep.pass &= m > 0.0;
        rep.times.push(s.t);
        rep.margin.push(m);
    }
    Ok(rep)
}

/// Boundary discrepancy between the stored state at T + t_probe and a fresh
/// run restarted from the stored state at T.
pub fn restart_check(evo: &LevelSetEvolution, t_restart: f64, t_probe: f64, opts: &EvolveOptions) -> Result<f64> {
    let start = evo
        .snapshot_at(t_restart)
        .ok_or_else(|| Error::Precondition(format!("no snapshot at T = {t_restart}")))?;
    if t_probe == 0.0 {
        return Ok(0.0);
    }
    let target = evo
        .snapshots
        .iter()
        .find(|s| (s.t - t_restart - t_probe).abs() < 1e-9)
        .ok_or_else(|| Error::Precondition(format!("no snapshot at T + t_probe = {}", t_restart + t_probe)))?;
    let o = EvolveOptions { sample_dt: t_probe, ..*opts };
    let rerun = evolve(start, t_probe, &o)?;
    Ok(boundary_hausdorff(&rerun.final_field, target))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterfaceSpeed {
    pub min: f64,
    pub max: f64,
    pub mean_abs: f64,
    pub cells: usize,
}

/// Normal speed (the expander residual toward the interior) over interface
/// cells inside the region `keep`.
pub fn interface_speed(field: &LevelSetField, keep: impl Fn([f64; 2]) -> bool) -> InterfaceSpeed {
    let g = field.grid;
    let mut out = InterfaceSpeed { min: f64::INFINITY, max: f64::NEG_INFINITY, mean_abs: 0.0, cells: 0 };
    for k in field.interface_cells() {
        let (i, j) = g.ij(k);
        if !keep(g.point(k)) {
            continue;
        }
        if let Some(v) = normal_speed(field, i, j) {
            out.min = out.min.min(v);
            out.max = out.max.max(v);
            out.mean_abs += v.abs();
            out.cells += 1;
        }
    }
    if out.cells > 0 {
        out.mean_abs /= out.cells as f64;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Smoothed {
    pub field: LevelSetField,
    pub corner_cells: usize,
    pub max_alignment: f64,
    pub speed: InterfaceSpeed,
    /// Inside cells of the result not strictly inside both inputs.
    pub escaped_cells: usize,
}

/// Intersect two strictly expander-mean-convex sets and round the corner by
/// a short flow of duration `eps_s`.
pub fn smooth_mean_convex(a: &LevelSetField, b: &LevelSetField, eps_s: f64, opts: &EvolveOptions) -> Result<Smoothed> {
    if a.grid != b.grid || a.n != b.n {
        return Err(Error::Precondition("inputs on different grids".into()));
    }
    if !(eps_s > 0.0) {
        return Err(Error::Precondition(format!("smoothing time {eps_s} must be positive")));
    }
    let g = a.grid;
    let h = g.h;
    for (name, f) in [("A", a), ("B", b)] {
        let s = interface_speed(f, |_| true);
        if !(s.min > 0.0) {
            return Err(Error::Precondition(format!("{name} is not strictly expander mean convex (min speed {:e})", s.min)));
        }
    }
    let phi: Vec<f64> = a.phi.iter().zip(&b.phi).map(|(&x, &y)| x.max(y)).collect();
    let meet = LevelSetField::new(g, phi, a.n, a.t)?;
    let mut corner_cells = 0;
    let mut max_alignment: f64 = -1.0;
    for k in 0..g.len() {
        if a.phi[k].abs() >= h || b.phi[k].abs() >= h {
            continue;
        }
        // both boundaries pass through the cell without coinciding
        let distinct = std::iter::once(k).chain(g.neighbors(k)).any(|q| (a.phi[q] - b.phi[q]).abs() > 1e-12);
        if !distinct {
            continue;
        }
        let (i, j) = g.ij(k);
        let (ga, gb) = (a.gradient(i, j), b.gradient(i, j));
        let (na, nb) = (ga[0].hypot(ga[1]), gb[0].hypot(gb[1]));
        if na < 1e-12 || nb < 1e-12 {
            continue;
        }
        let align = (ga[0] * gb[0] + ga[1] * gb[1]) / (na * nb);
        max_alignment = max_alignment.max(align);
        corner_cells += 1;
    }
    if max_alignment > 1.0 - 1e-3 {
        return Err(Error::Transversality(format!("boundary normals align to {max_alignment:.6} at a corner")));
    }
    let count = meet.inside_count();
    if count == 0 {
        return Err(Error::Precondition("the intersection is empty".into()));
    }
    if (0..g.len()).any(|k| {
        let (i, j) = g.ij(k);
        g.is_boundary(i, j) && meet.phi[k] <= 0.0
    }) {
        return Err(Error::Precondition("the intersection touches the grid frame".into()));
    }
    let o = EvolveOptions { sample_dt: eps_s, keep_snapshots: false, ..*opts };
    let run = evolve(&meet, eps_s, &o)?;
    let field = run.final_field;
    let escaped_cells = (0..g.len()).filter(|&k| field.phi[k] <= 0.0 && !(a.phi[k] < 0.0 && b.phi[k] < 0.0)).count();
    let speed = interface_speed(&field, |_| true);
    Ok(Smoothed { field, corner_cells, max_alignment, speed, escaped_cells })
}

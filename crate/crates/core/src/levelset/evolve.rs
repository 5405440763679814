use serde::{Deserialize, Serialize};

use super::field::{Grid, LevelSetField};
use super::reinit::redistance;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Fraction of the explicit stability limit.
    pub cfl: f64,
    /// Explicit step override; rejected if above the stability limit.
    pub dt: Option<f64>,
    pub sample_dt: f64,
    pub reinit_every: usize,
    /// Relaxation sweeps per reinitialisation.
    pub relax_iters: usize,
    /// Half-width of the updated band, in cells.
    pub band_cells: f64,
    /// Steps between connected-component counts (also counted at samples).
    pub component_every: usize,
    pub keep_snapshots: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            cfl: 0.9,
            dt: None,
            sample_dt: 0.01,
            reinit_every: 5,
            relax_iters: 5,
            band_cells: 6.0,
            component_every: 200,
            keep_snapshots: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Pinch,
    ComponentVanish,
    Extinction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone)]
pub struct LevelSetEvolution {
    pub grid: Grid,
    pub n: usize,
    pub snapshots: Vec<LevelSetField>,
    /// Last exit time per cell; 0 outside the initial set, +inf if never left.
    pub arrival: Vec<f64>,
    pub events: Vec<Event>,
    /// Cells that re-entered the set after leaving it.
    pub reentries: usize,
    pub dt: f64,
    pub steps: usize,
    pub final_field: LevelSetField,
}

impl LevelSetEvolution {
    pub fn extinction_time(&self) -> Option<f64> {
        self.events.iter().find(|e| e.kind == EventKind::Extinction).map(|e| e.t)
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&LevelSetField> {
        self.snapshots.iter().find(|s| (s.t - t).abs() < 1e-9)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }
}

/// Stability limit of the explicit scheme: the diffusion part has symbol
/// at most 4n/h^2 at the axis, the transport speed is |x|/2.
pub fn stable_dt(grid: &Grid, n: usize, cfl: f64) -> f64 {
    let h = grid.h;
    let vmax = 0.5 * grid.r_max().hypot(grid.z_max);
    cfl * (h * h / (2.0 * (n as f64 + 1.0))).min(h / vmax.max(1e-12))
}

/// Relaxation reaches this many cells from the front.
const RELAX_WIDTH: f64 = 7.0;
/// Cells this close to the front keep their evolved values through fast marching.
pub const KEEP_CELLS: f64 = 3.0;

fn minmod(a: f64, b: f64) -> f64 {
    if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Right-hand side |grad phi| kappa + (x . grad phi)/2 at an interior cell:
/// central differences for curvature, second-order ENO upwinding for transport.
pub(crate) fn rhs(phi: &[f64], g: &Grid, n: usize, i: usize, j: usize) -> f64 {
    let h = g.h;
    let nr = g.nr;
    let at = |a: isize, b: usize| -> f64 {
        let a = if a < 0 { (-a) as usize } else { a as usize };
        phi[b * nr + a]
    };
    let ii = i as isize;
    let p0 = at(ii, j);
    let pl = at(ii - 1, j);
    let pr = at(ii + 1, j);
    let pd = at(ii, j - 1);
    let pu = at(ii, j + 1);
    let fr = if i == 0 { 0.0 } else { (pr - pl) / (2.0 * h) };
    let fz = (pu - pd) / (2.0 * h);
    let frr = (pr - 2.0 * p0 + pl) / (h * h);
    let fzz = (pu - 2.0 * p0 + pd) / (h * h);
    let frz = if i == 0 {
        0.0
    } else {
        (at(ii + 1, j + 1) - at(ii + 1, j - 1) - at(ii - 1, j + 1) + at(ii - 1, j - 1)) / (4.0 * h * h)
    };
    let g2 = fr * fr + fz * fz;
    let k2 = if g2 > 1e-12 {
        (fz * fz * frr - 2.0 * fr * fz * frz + fr * fr * fzz) / g2
    } else {
        0.5 * (frr + fzz)
    };
    let nm1 = n as f64 - 1.0;
    let axis = if i == 0 { nm1 * frr } else { nm1 * fr / g.r(i) };

    // transport toward the origin: upwind from larger |r| and larger |z|
    let r = g.r(i);
    let z = g.z(j);
    let dr = if i == 0 {
        0.0
    } else {
        let d1 = (pr - p0) / h;
        if i + 2 < nr {
            let c0 = (pr - 2.0 * p0 + pl) / (h * h);
            let c1 = (at(ii + 2, j) - 2.0 * pr + p0) / (h * h);
            d1 - 0.5 * h * minmod(c0, c1)
        } else {
            d1
        }
    };
    let dz = if z > 0.0 {
        let d1 = (pu - p0) / h;
        if j + 2 < g.nz {
            let c0 = (pu - 2.0 * p0 + pd) / (h * h);
            let c1 = (at(ii, j + 2) - 2.0 * pu + p0) / (h * h);
            d1 - 0.5 * h * minmod(c0, c1)
        } else {
            d1
        }
    } else if z < 0.0 {
        let d1 = (p0 - pd) / h;
        if j >= 2 {
            let c0 = (pu - 2.0 * p0 + pd) / (h * h);
            let c1 = (p0 - 2.0 * pd + at(ii, j - 2)) / (h * h);
            d1 + 0.5 * h * minmod(c0, c1)
        } else {
            d1
        }
    } else {
        0.0
    };
    k2 + axis + 0.5 * (r * dr + z * dz)
}

/// Normal velocity of the zero level, positive when the set shrinks:
/// the expander residual toward the interior.
pub fn normal_speed(field: &LevelSetField, i: usize, j: usize) -> Option<f64> {
    let g = &field.grid;
    if g.is_boundary(i, j) || j < 2 || j + 2 >= g.nz {
        return None;
    }
    let grad = field.gradient(i, j);
    let gn = grad[0].hypot(grad[1]);
    if gn < 1e-8 {
        return None;
    }
    let h = g.h;
    let p = |a: isize, b: usize| field.phi[b * g.nr + a.unsigned_abs()];
    let ii = i as isize;
    let (fr, fz) = (grad[0], grad[1]);
    let frr = (p(ii + 1, j) - 2.0 * p(ii, j) + p(ii - 1, j)) / (h * h);
    let fzz = (p(ii, j + 1) - 2.0 * p(ii, j) + p(ii, j - 1)) / (h * h);
    let frz = if i == 0 {
        0.0
    } else {
        (p(ii + 1, j + 1) - p(ii + 1, j - 1) - p(ii - 1, j + 1) + p(ii - 1, j - 1)) / (4.0 * h * h)
    };
    let k2 = (fz * fz * frr - 2.0 * fr * fz * frz + fr * fr * fzz) / (gn * gn);
    let nm1 = field.n as f64 - 1.0;
    let axis = if i == 0 { nm1 * frr } else { nm1 * fr / g.r(i) };
    let drift = 0.5 * (g.r(i) * fr + g.z(j) * fz);
    Some((k2 + axis + drift) / gn)
}

/// 4-connected components of {phi <= 0}; returns the count and per-cell labels
/// (`usize::MAX` outside).
pub fn components(field: &LevelSetField) -> (usize, Vec<usize>) {
    let g = field.grid;
    let mut label = vec![usize::MAX; g.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for k in 0..g.len() {
        if label[k] != usize::MAX || field.phi[k] > 0.0 {
            continue;
        }
        label[k] = count;
        stack.push(k);
        while let Some(c) = stack.pop() {
            let (i, j) = g.ij(c);
            let nb = [
                (i > 0).then(|| c - 1),
                (i + 1 < g.nr).then(|| c + 1),
                (j > 0).then(|| c - g.nr),
                (j + 1 < g.nz).then(|| c + g.nr),
            ];
            for q in nb.into_iter().flatten() {
                if label[q] == usize::MAX && field.phi[q] <= 0.0 {
                    label[q] = count;
                    stack.push(q);
                }
            }
        }
        count += 1;
    }
    (count, label)
}

/// Evolve under the expander flow phi_t = |grad phi| kappa + (x . grad phi)/2
/// to `t_end` (or extinction), holding the outer frame fixed.
pub fn evolve(field: &LevelSetField, t_end: f64, opts: &EvolveOptions) -> Result<LevelSetEvolution> {
    let g = field.grid;
    let n = field.n;
    if !(t_end >= 0.0) || !(opts.sample_dt > 0.0) || opts.reinit_every == 0 || opts.component_every == 0 {
        return Err(Error::StepSize(format!("invalid options t_end={t_end}, sample_dt={}", opts.sample_dt)));
    }
    let limit = stable_dt(&g, n, 1.0);
    let dt = match opts.dt {
        Some(dt) if dt > limit || !(dt > 0.0) => {
            return Err(Error::StepSize(format!("dt = {dt:e} violates the stability limit {limit:e}")));
        }
        Some(dt) => dt,
        None => stable_dt(&g, n, opts.cfl.clamp(1e-3, 1.0)),
    };
    let mut cur = field.clone();
    let t0 = cur.t;
    let mut band = redistance(&mut cur, None, KEEP_CELLS * g.h, RELAX_WIDTH * g.h, opts.relax_iters * 4);
    let width = opts.band_cells * g.h;
    let mut active: Vec<usize> = active_cells(&cur, &band, width);
    let mut arrival: Vec<f64> = cur.phi.iter().map(|&v| if v <= 0.0 { f64::INFINITY } else { 0.0 }).collect();
    let mut inside = cur.inside_count();
    let mut snapshots = Vec::new();
    if opts.keep_snapshots {
        snapshots.push(cur.clone());
    }
    let mut events = Vec::new();
    let (mut ncomp, _) = components(&cur);
    let mut reentries = 0;
    let mut steps = 0usize;
    let mut since_reinit = 0usize;
    let mut next_sample = t0 + opts.sample_dt;
    let mut buf = vec![0.0; active.len()];
    let t_stop = t0 + t_end;
    let mut t = t0;
    let mut last_exit = t0;

    while t < t_stop - 1e-12 && inside > 0 {
        let target = next_sample.min(t_stop);
        let mut step = dt;
        let landing = t + step >= target - 1e-12 * target.abs().max(1.0);
        if landing {
            step = target - t;
        }
        buf.resize(active.len(), 0.0);
        for (slot, &k) in buf.iter_mut().zip(&active) {
            let (i, j) = g.ij(k);
            *slot = cur.phi[k] + step * rhs(&cur.phi, &g, n, i, j);
        }
        for (&k, &new) in active.iter().zip(&buf) {
            let old = cur.phi[k];
            if old <= 0.0 && new > 0.0 {
                arrival[k] = t + step * (-old) / (new - old);
                last_exit = last_exit.max(arrival[k]);
                inside -= 1;
            } else if old > 0.0 && new <= 0.0 {
                arrival[k] = f64::INFINITY;
                inside += 1;
                reentries += 1;
            }
            cur.phi[k] = new;
        }
        t = if landing { target } else { t + step };
        cur.t = t;
        steps += 1;
        since_reinit += 1;

        if inside == 0 {
            events.push(Event { t: last_exit, kind: EventKind::Extinction, before: ncomp, after: 0 });
            break;
        }
        let sample = landing && (target - next_sample).abs() < 1e-12 * target.abs().max(1.0);
        if since_reinit >= opts.reinit_every || sample {
            band = redistance(&mut cur, Some(&band), KEEP_CELLS * g.h, RELAX_WIDTH * g.h, opts.relax_iters);
            active = active_cells(&cur, &band, width);
            since_reinit = 0;
        }
        if steps % opts.component_every == 0 || sample {
            let (c, _) = components(&cur);
            if c != ncomp {
                let kind = if c > ncomp { EventKind::Pinch } else { EventKind::ComponentVanish };
                events.push(Event { t, kind, before: ncomp, after: c });
                ncomp = c;
            }
        }
        if sample {
            if opts.keep_snapshots {
                snapshots.push(cur.clone());
            }
            next_sample += opts.sample_dt;
        }
    }
    if opts.keep_snapshots && snapshots.last().map(|s| s.t) != Some(cur.t) {
        snapshots.push(cur.clone());
    }
    Ok(LevelSetEvolution { grid: g, n, snapshots, arrival, events, reentries, dt, steps, final_field: cur })
}

fn active_cells(field: &LevelSetField, band: &[usize], width: f64) -> Vec<usize> {
    let g = field.grid;
    let mut v: Vec<usize> = band
        .iter()
        .copied()
        .filter(|&k| {
            let (i, j) = g.ij(k);
            !g.is_boundary(i, j) && field.phi[k].abs() < width
        })
        .collect();
    v.sort_unstable();
    v
}

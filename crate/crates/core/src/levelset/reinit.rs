use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::field::{LevelSetField, CLAMP_CELLS};

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

const FAR: u8 = 0;
const TRIAL: u8 = 1;
const KNOWN: u8 = 2;

/// Redistance by fast marching from the frozen interface cells (and the
/// Dirichlet frame), out to `CLAMP_CELLS` cells; beyond that the field is
/// clamped. Cells adjacent to the zero level keep their values so the
/// interface does not move. `band` restricts the work to the previous
/// band; `None` scans the whole grid. Returns the new band (cells with
/// |phi| below the clamp).
pub fn reinitialize(field: &mut LevelSetField, band: Option<&[usize]>) -> Vec<usize> {
    reinitialize_keeping(field, band, 0.0)
}

/// As [`reinitialize`], but cells with |phi| < `keep` are also kept and act
/// as seeds, so only the outer band takes fast-marching values.
pub fn reinitialize_keeping(field: &mut LevelSetField, band: Option<&[usize]>, keep: f64) -> Vec<usize> {
    let g = field.grid;
    let h = g.h;
    let clamp = CLAMP_CELLS * h;
    let all: Vec<usize>;
    let cells: &[usize] = match band {
        Some(b) => b,
        None => {
            all = (0..g.len()).collect();
            &all
        }
    };
    let mut state = vec![FAR; g.len()];
    let mut heap = BinaryHeap::new();
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut touched: Vec<usize> = Vec::with_capacity(cells.len() * 2);
    for &k in cells {
        let s = field.phi[k] <= 0.0;
        let (i, j) = g.ij(k);
        let interface = g.neighbors(k).any(|q| (field.phi[q] <= 0.0) != s);
        if interface || field.phi[k].abs() < keep || (g.is_boundary(i, j) && field.phi[k].abs() < clamp) {
            state[k] = KNOWN;
            dist[k] = field.phi[k].abs();
            touched.push(k);
        }
    }
    let seeds: Vec<usize> = touched.clone();
    for &k in &seeds {
        push_neighbors(field, k, &mut state, &mut dist, &mut heap, &mut touched);
    }
    while let Some(Item(d, k)) = heap.pop() {
        if state[k] == KNOWN || d > dist[k] {
            continue;
        }
        state[k] = KNOWN;
        if d > clamp {
            continue;
        }
        push_neighbors(field, k, &mut state, &mut dist, &mut heap, &mut touched);
    }
    let mut new_band = Vec::new();
    for &k in cells {
        if state[k] != KNOWN {
            field.phi[k] = if field.phi[k] <= 0.0 { -clamp } else { clamp };
        }
    }
    touched.sort_unstable();
    touched.dedup();
    for k in touched {
        if state[k] != KNOWN {
            continue;
        }
        let (i, j) = g.ij(k);
        let s = if field.phi[k] <= 0.0 { -1.0 } else { 1.0 };
        if !g.is_boundary(i, j) {
            field.phi[k] = s * dist[k].min(clamp);
        }
        if field.phi[k].abs() < clamp {
            new_band.push(k);
        }
    }
    new_band
}

fn push_neighbors(
    field: &LevelSetField,
    k: usize,
    state: &mut [u8],
    dist: &mut [f64],
    heap: &mut BinaryHeap<Item>,
    touched: &mut Vec<usize>,
) {
    let g = field.grid;
    let s = field.phi[k] <= 0.0;
    let nb: Vec<usize> = g.neighbors(k).collect();
    for q in nb {
        if state[q] == KNOWN || (field.phi[q] <= 0.0) != s {
            continue;
        }
        let d = eikonal(field, q, state, dist);
        if d < dist[q] {
            dist[q] = d;
            if state[q] == FAR {
                touched.push(q);
            }
            state[q] = TRIAL;
            heap.push(Item(d, q));
        }
    }
}

fn eikonal(field: &LevelSetField, k: usize, state: &[u8], dist: &[f64]) -> f64 {
    let g = field.grid;
    let h = g.h;
    let (i, j) = g.ij(k);
    let known = |q: usize| if state[q] == KNOWN { dist[q] } else { f64::INFINITY };
    let a = {
        let l = if i > 0 { known(g.idx(i - 1, j)) } else { known(g.idx(1, j)) };
        let r = if i + 1 < g.nr { known(g.idx(i + 1, j)) } else { f64::INFINITY };
        l.min(r)
    };
    let b = {
        let d = if j > 0 { known(g.idx(i, j - 1)) } else { f64::INFINITY };
        let u = if j + 1 < g.nz { known(g.idx(i, j + 1)) } else { f64::INFINITY };
        d.min(u)
    };
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if !hi.is_finite() || hi - lo >= h {
        lo + h
    } else {
        0.5 * (lo + hi + (2.0 * h * h - (hi - lo) * (hi - lo)).sqrt())
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// One-sided ENO2 differences (backward, forward) in r and z.
fn one_sided(phi: &[f64], g: &super::field::Grid, i: usize, j: usize) -> [f64; 4] {
    let h = g.h;
    let nr = g.nr;
    let at = |a: isize, b: usize| phi[b * nr + a.unsigned_abs()];
    let ii = i as isize;
    let p0 = at(ii, j);
    let second_r = |a: isize| -> Option<f64> {
        if a + 1 >= nr as isize {
            None
        } else {
            Some((at(a + 1, j) - 2.0 * at(a, j) + at(a - 1, j)) / (h * h))
        }
    };
    let second_z = |b: usize| -> Option<f64> {
        if b == 0 || b + 1 >= g.nz {
            None
        } else {
            Some((at(ii, b + 1) - 2.0 * at(ii, b) + at(ii, b - 1)) / (h * h))
        }
    };
    let c0r = second_r(ii).unwrap_or(0.0);
    let bm = (p0 - at(ii - 1, j)) / h + 0.5 * h * second_r(ii - 1).map_or(0.0, |c| minmod(c, c0r));
    let fp = (at(ii + 1, j) - p0) / h - 0.5 * h * second_r(ii + 1).map_or(0.0, |c| minmod(c, c0r));
    let c0z = second_z(j).unwrap_or(0.0);
    let bz = (p0 - at(ii, j - 1)) / h + 0.5 * h * (if j >= 1 { second_z(j - 1) } else { None }).map_or(0.0, |c| minmod(c, c0z));
    let fz = (at(ii, j + 1) - p0) / h - 0.5 * h * second_z(j + 1).map_or(0.0, |c| minmod(c, c0z));
    [bm, fp, bz, fz]
}

/// Subcell distance estimates phi/|grad phi| on cells adjacent to the front.
pub fn front_targets(field: &LevelSetField, cells: Option<&[usize]>) -> HashMap<usize, f64> {
    let g = field.grid;
    let mut out = HashMap::new();
    let mut visit = |k: usize| {
        let (i, j) = g.ij(k);
        if g.is_boundary(i, j) {
            return;
        }
        let s = field.phi[k] <= 0.0;
        if !g.neighbors(k).any(|q| (field.phi[q] <= 0.0) != s) {
            return;
        }
        let gr = field.gradient(i, j);
        let gn = gr[0].hypot(gr[1]);
        out.insert(k, if gn > 1e-3 { field.phi[k] / gn } else { field.phi[k] });
    };
    match cells {
        Some(c) => c.iter().for_each(|&k| visit(k)),
        None => (0..g.len()).for_each(visit),
    }
    out
}

/// Redistancing relaxation phi_tau + sign(phi)(|grad phi| - 1) = 0 on the
/// given cells: Godunov flux with ENO2 differences away from the front, and
/// the subcell fix (front cells pulled toward their `targets`) so the zero
/// level stays put. Frame cells are never modified.
pub fn relax(field: &mut LevelSetField, cells: &[usize], targets: &HashMap<usize, f64>, iters: usize) {
    let g = field.grid;
    let h = g.h;
    let dtau = 0.45 * h;
    let cells: Vec<usize> = cells
        .iter()
        .copied()
        .filter(|&k| {
            let (i, j) = g.ij(k);
            !g.is_boundary(i, j)
        })
        .collect();
    let sgn: Vec<f64> = cells.iter().map(|&k| if field.phi[k] <= 0.0 { -1.0 } else { 1.0 }).collect();
    let target: Vec<Option<f64>> = cells.iter().map(|k| targets.get(k).copied()).collect();
    let mut buf = vec![0.0; cells.len()];
    for _ in 0..iters {
        for (c, &k) in cells.iter().enumerate() {
            let (i, j) = g.ij(k);
            let p = field.phi[k];
            buf[c] = match target[c] {
                Some(d) => p - (dtau / h) * (sgn[c] * p.abs() - sgn[c] * d.abs()),
                None => {
                    let [a, b, cz, dz] = one_sided(&field.phi, &g, i, j);
                    let gsq = if sgn[c] > 0.0 {
                        a.max(0.0).powi(2).max(b.min(0.0).powi(2)) + cz.max(0.0).powi(2).max(dz.min(0.0).powi(2))
                    } else {
                        a.min(0.0).powi(2).max(b.max(0.0).powi(2)) + cz.min(0.0).powi(2).max(dz.max(0.0).powi(2))
                    };
                    p - dtau * sgn[c] * (gsq.sqrt() - 1.0)
                }
            };
        }
        for (c, &k) in cells.iter().enumerate() {
            field.phi[k] = buf[c];
        }
    }
}

/// Fast-marching band update (cells within `keep` of the front untouched)
/// followed by `iters` relaxation sweeps on cells within `width` of the
/// front. Returns the new band.
pub fn redistance(field: &mut LevelSetField, band: Option<&[usize]>, keep: f64, width: f64, iters: usize) -> Vec<usize> {
    let targets = front_targets(field, band);
    let band = reinitialize_keeping(field, band, keep);
    if iters > 0 {
        let near: Vec<usize> = band.iter().copied().filter(|&k| field.phi[k].abs() < width).collect();
        relax(field, &near, &targets, iters);
    }
    band
}

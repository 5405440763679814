use std::collections::HashMap;

use super::field::LevelSetField;

/// Zero-level segments by marching squares (linear interpolation on edges,
/// saddles resolved by the cell-centre average).
pub fn zero_segments(field: &LevelSetField) -> Vec<[[f64; 2]; 2]> {
    segments_with_edges(field).into_iter().map(|(s, _)| s).collect()
}

type EdgeId = usize;

fn segments_with_edges(field: &LevelSetField) -> Vec<([[f64; 2]; 2], [EdgeId; 2])> {
    let g = field.grid;
    let phi = &field.phi;
    let mut out = Vec::new();
    for j in 0..g.nz - 1 {
        for i in 0..g.nr - 1 {
            let k = g.idx(i, j);
            let v = [phi[k], phi[k + 1], phi[k + 1 + g.nr], phi[k + g.nr]];
            let ins = v.map(|x| x <= 0.0);
            if ins.iter().all(|&b| b) || ins.iter().all(|&b| !b) {
                continue;
            }
            let (r0, z0) = (g.r(i), g.z(j));
            let h = g.h;
            // edges: 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c3-c2), 3 left (c0-c3)
            let edge_pt = |e: usize| -> [f64; 2] {
                let (a, b, pa, pb) = match e {
                    0 => (v[0], v[1], [r0, z0], [r0 + h, z0]),
                    1 => (v[1], v[2], [r0 + h, z0], [r0 + h, z0 + h]),
                    2 => (v[3], v[2], [r0, z0 + h], [r0 + h, z0 + h]),
                    _ => (v[0], v[3], [r0, z0], [r0, z0 + h]),
                };
                let s = (a / (a - b)).clamp(0.0, 1.0);
                [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
            };
            let edge_id = |e: usize| -> EdgeId {
                match e {
                    0 => 2 * k,
                    1 => 2 * (k + 1) + 1,
                    2 => 2 * (k + g.nr),
                    _ => 2 * k + 1,
                }
            };
            let crosses = |e: usize| match e {
                0 => ins[0] != ins[1],
                1 => ins[1] != ins[2],
                2 => ins[3] != ins[2],
                _ => ins[0] != ins[3],
            };
            let es: Vec<usize> = (0..4).filter(|&e| crosses(e)).collect();
            let mut push = |a: usize, b: usize| out.push(([edge_pt(a), edge_pt(b)], [edge_id(a), edge_id(b)]));
            if es.len() == 2 {
                push(es[0], es[1]);
            } else if es.len() == 4 {
                let centre_in = (v.iter().sum::<f64>() / 4.0) <= 0.0;
                // corners 0 and 2 share a state; pair edges around the corners
                // that differ from the centre
                if centre_in == ins[0] {
                    push(0, 1);
                    push(2, 3);
                } else {
                    push(0, 3);
                    push(1, 2);
                }
            }
        }
    }
    out
}

/// Zero-level points (segment endpoints, deduplicated per edge).
pub fn zero_points(field: &LevelSetField) -> Vec<[f64; 2]> {
    let mut seen = HashMap::new();
    for (s, e) in segments_with_edges(field) {
        for q in 0..2 {
            seen.entry(e[q]).or_insert(s[q]);
        }
    }
    let mut v: Vec<(EdgeId, [f64; 2])> = seen.into_iter().collect();
    v.sort_unstable_by_key(|x| x.0);
    v.into_iter().map(|x| x.1).collect()
}

/// Zero level chained into polylines, longest first.
pub fn zero_polylines(field: &LevelSetField) -> Vec<Vec<[f64; 2]>> {
    let segs = segments_with_edges(field);
    let mut by_edge: HashMap<EdgeId, Vec<usize>> = HashMap::new();
    for (s, (_, e)) in segs.iter().enumerate() {
        by_edge.entry(e[0]).or_default().push(s);
        by_edge.entry(e[1]).or_default().push(s);
    }
    let mut used = vec![false; segs.len()];
    let mut lines = Vec::new();
    let start_order: Vec<usize> = {
        // open chains start at edges used once
        let mut ends: Vec<usize> = segs
            .iter()
            .enumerate()
            .filter(|(_, (_, e))| by_edge[&e[0]].len() == 1 || by_edge[&e[1]].len() == 1)
            .map(|(s, _)| s)
            .collect();
        ends.extend(0..segs.len());
        ends
    };
    for s0 in start_order {
        if used[s0] {
            continue;
        }
        used[s0] = true;
        let (p, e) = segs[s0];
        let (mut pts, mut tail) = if by_edge[&e[0]].len() == 1 {
            (vec![p[0], p[1]], e[1])
        } else {
            (vec![p[1], p[0]], e[0])
        };
        // walk forward from the tail edge
        loop {
            let next = by_edge[&tail].iter().copied().find(|&q| !used[q]);
            let Some(q) = next else { break };
            used[q] = true;
            let (qp, qe) = segs[q];
            if qe[0] == tail {
                pts.push(qp[1]);
                tail = qe[1];
            } else {
                pts.push(qp[0]);
                tail = qe[0];
            }
        }
        lines.push(pts);
    }
    lines.sort_by_key(|l| std::cmp::Reverse(l.len()));
    lines
}

/// Bucketed point set for nearest-distance queries.
pub struct PointIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<[f64; 2]>>,
    len: usize,
}

impl PointIndex {
    pub fn new(points: &[[f64; 2]], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<[f64; 2]>> = HashMap::new();
        for &p in points {
            buckets.entry(key(p, cell)).or_default().push(p);
        }
        Self { cell, buckets, len: points.len() }
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nearest(&self, p: [f64; 2]) -> f64 {
        if self.len == 0 {
            return f64::INFINITY;
        }
        let (ci, cj) = key(p, self.cell);
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for di in -ring..=ring {
                for dj in -ring..=ring {
                    if di.abs() != ring && dj.abs() != ring {
                        continue;
                    }
                    if let Some(b) = self.buckets.get(&(ci + di, cj + dj)) {
                        for q in b {
                            best = best.min((p[0] - q[0]).hypot(p[1] - q[1]));
                        }
                    }
                }
            }
            if best <= ring as f64 * self.cell {
                return best;
            }
            ring += 1;
            if ring > 1_000_000 {
                return best;
            }
        }
    }
}

fn key(p: [f64; 2], cell: f64) -> (i64, i64) {
    ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
}

/// Largest distance from a point of `a` to the set `b`.
pub fn directed_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]], cell: f64) -> f64 {
    let idx = PointIndex::new(b, cell);
    a.iter().map(|&p| idx.nearest(p)).fold(0.0, f64::max)
}

pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]], cell: f64) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    directed_hausdorff(a, b, cell).max(directed_hausdorff(b, a, cell))
}

/// Boundary Hausdorff distance between two fields on the same grid.
pub fn boundary_hausdorff(a: &LevelSetField, b: &LevelSetField) -> f64 {
    hausdorff(&zero_points(a), &zero_points(b), 4.0 * a.grid.h)
}

/// Densify a polyline so consecutive points are at most `step` apart,
/// keeping only points inside `keep`.
pub fn densify(points: &[[f64; 2]], step: f64, keep: impl Fn([f64; 2]) -> bool) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let l = (b[0] - a[0]).hypot(b[1] - a[1]);
        let k = (l / step).ceil().max(1.0) as usize;
        for s in 0..k {
            let t = s as f64 / k as f64;
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            if keep(p) {
                out.push(p);
            }
        }
    }
    if let Some(&l) = points.last() {
        if keep(l) {
            out.push(l);
        }
    }
    out
}

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::geometry::ProfileCurve;
use crate::{Error, Result};

/// Uniform lattice on r in [0, r_max], z in [-z_max, z_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nr: usize,
    pub nz: usize,
    pub h: f64,
    pub z_max: f64,
}

impl Grid {
    pub fn new(h: f64, r_max: f64, z_max: f64) -> Result<Self> {
        if !(h > 0.0 && r_max > 0.0 && z_max > 0.0) || !(h.is_finite() && r_max.is_finite() && z_max.is_finite()) {
            return Err(Error::Domain(format!("invalid grid h={h}, R={r_max}, Z={z_max}")));
        }
        let nr = (r_max / h).round() as usize + 1;
        let nz = (2.0 * z_max / h).round() as usize + 1;
        if nr < 8 || nz < 8 {
            return Err(Error::Domain(format!("grid too coarse: {nr} x {nz}")));
        }
        Ok(Self { nr, nz, h, z_max })
    }

    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nr + i
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nr, k / self.nr)
    }

    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn z(&self, j: usize) -> f64 {
        -self.z_max + j as f64 * self.h
    }

    pub fn r_max(&self) -> f64 {
        self.r(self.nr - 1)
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.r(i), self.z(j)]
    }

    /// Dirichlet frame: outer radius and both z ends. The axis is not a boundary.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == self.nr - 1 || j == 0 || j == self.nz - 1
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= -1e-12 && p[0] <= self.r_max() + 1e-12 && p[1].abs() <= self.z_max + 1e-12
    }

    /// 4-neighbours with the axis reflected (the ghost at i = -1 is i = 1).
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.ij(k);
        let left = if i > 0 { Some(self.idx(i - 1, j)) } else { None };
        let right = if i + 1 < self.nr { Some(self.idx(i + 1, j)) } else { None };
        let down = if j > 0 { Some(self.idx(i, j - 1)) } else { None };
        let up = if j + 1 < self.nz { Some(self.idx(i, j + 1)) } else { None };
        [left, right, down, up].into_iter().flatten()
    }
}

/// Signed field on a grid; the set is {phi <= 0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetField {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub n: usize,
    pub t: f64,
}

impl LevelSetField {
    pub fn new(grid: Grid, phi: Vec<f64>, n: usize, t: f64) -> Result<Self> {
        if phi.len() != grid.len() {
            return Err(Error::Domain(format!("field has {} values for a {} cell grid", phi.len(), grid.len())));
        }
        if n == 0 {
            return Err(Error::Domain("rotational dimension must be positive".into()));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite field value".into()));
        }
        Ok(Self { grid, phi, n, t })
    }

    pub fn inside(&self, k: usize) -> bool {
        self.phi[k] <= 0.0
    }

    pub fn inside_count(&self) -> usize {
        self.phi.iter().filter(|&&v| v <= 0.0).count()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.phi.iter().map(|&v| v <= 0.0).collect()
    }

    /// Bilinear interpolation; points outside the grid are clamped.
    pub fn sample(&self, r: f64, z: f64) -> f64 {
        let g = &self.grid;
        let x = (r.abs() / g.h).clamp(0.0, (g.nr - 1) as f64);
        let y = ((z + g.z_max) / g.h).clamp(0.0, (g.nz - 1) as f64);
        let i = (x.floor() as usize).min(g.nr - 2);
        let j = (y.floor() as usize).min(g.nz - 2);
        let (fx, fy) = (x - i as f64, y - j as f64);
        let p = |a, b| self.phi[g.idx(a, b)];
        (1.0 - fx) * (1.0 - fy) * p(i, j) + fx * (1.0 - fy) * p(i + 1, j) + (1.0 - fx) * fy * p(i, j + 1) + fx * fy * p(i + 1, j + 1)
    }

    /// Central gradient with the axis reflected.
    pub fn gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let g = &self.grid;
        let p = |a: usize, b: usize| self.phi[g.idx(a, b)];
        let h = g.h;
        let pr = if i == 0 {
            0.0
        } else if i + 1 < g.nr {
            (p(i + 1, j) - p(i - 1, j)) / (2.0 * h)
        } else {
            (p(i, j) - p(i - 1, j)) / h
        };
        let pz = if j == 0 {
            (p(i, 1) - p(i, 0)) / h
        } else if j + 1 == g.nz {
            (p(i, j) - p(i, j - 1)) / h
        } else {
            (p(i, j + 1) - p(i, j - 1)) / (2.0 * h)
        };
        [pr, pz]
    }

    /// Cells with a 4-neighbour on the other side of the zero level.
    pub fn interface_cells(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&k| {
                let s = self.inside(k);
                self.grid.neighbors(k).any(|q| self.inside(q) != s)
            })
            .collect()
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.phi {
            *v = -*v;
        }
        out
    }
}

/// Which side of an oriented profile belongs to the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// The side the normal (-T_z, T_r) points into.
    Normal,
    Opposite,
}

/// Shape descriptions accepted by [`init_from_domain`].
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Ball { z0: f64, rho: f64 },
    /// {z <= level} or, with `below = false`, {z >= level}.
    HalfSpace { level: f64, below: bool },
    Profile { curve: ProfileCurve, side: Side },
    Complement(Box<Shape>),
    Union(Vec<Shape>),
    Intersection(Vec<Shape>),
}

impl Shape {
    pub fn ball(z0: f64, rho: f64) -> Self {
        Shape::Ball { z0, rho }
    }

    fn is_bounded_by_curve(&self) -> bool {
        match self {
            Shape::Profile { .. } => true,
            Shape::Complement(s) => s.is_bounded_by_curve(),
            Shape::Union(v) | Shape::Intersection(v) => v.iter().any(|s| s.is_bounded_by_curve()),
            _ => false,
        }
    }
}

/// Distances are exact within this many cells of the zero level and clamped beyond.
pub const CLAMP_CELLS: f64 = 9.0;

fn clamp(v: f64, c: f64) -> f64 {
    v.clamp(-c, c)
}

/// Approximate signed distance of a shape on the grid, reinitialised.
pub fn init_from_domain(shape: &Shape, grid: Grid, n: usize) -> Result<LevelSetField> {
    check_shape(shape, &grid)?;
    let c = CLAMP_CELLS * grid.h;
    let phi = eval_shape(shape, &grid, c)?;
    let mut field = LevelSetField::new(grid, phi, n, 0.0)?;
    if field.inside_count() == 0 {
        return Err(Error::Domain("shape does not meet the grid".into()));
    }
    if shape.is_bounded_by_curve() || matches!(shape, Shape::Union(_) | Shape::Intersection(_)) {
        super::reinit::redistance(&mut field, None, 0.0, 7.0 * grid.h, 20);
    } else {
        for v in &mut field.phi {
            *v = clamp(*v, c);
        }
    }
    Ok(field)
}

fn check_shape(shape: &Shape, grid: &Grid) -> Result<()> {
    match shape {
        Shape::Ball { z0, rho } => {
            if !(*rho > 0.0) || !rho.is_finite() || !z0.is_finite() {
                return Err(Error::Domain(format!("invalid ball radius {rho}")));
            }
            if *rho >= grid.r_max() || z0 - rho <= -grid.z_max || z0 + rho >= grid.z_max {
                return Err(Error::Domain(format!("ball (z0={z0}, rho={rho}) leaves the grid")));
            }
            Ok(())
        }
        Shape::HalfSpace { level, .. } => {
            if level.abs() >= grid.z_max {
                return Err(Error::Domain(format!("half-space level {level} outside the grid")));
            }
            Ok(())
        }
        Shape::Profile { curve, .. } => {
            if curve.len() < 2 {
                return Err(Error::Domain("profile needs at least two points".into()));
            }
            Ok(())
        }
        Shape::Complement(s) => check_shape(s, grid),
        Shape::Union(v) | Shape::Intersection(v) => {
            if v.is_empty() {
                return Err(Error::Domain("empty shape list".into()));
            }
            v.iter().try_for_each(|s| check_shape(s, grid))
        }
    }
}

fn eval_shape(shape: &Shape, grid: &Grid, c: f64) -> Result<Vec<f64>> {
    Ok(match shape {
        Shape::Ball { z0, rho } => (0..grid.len())
            .map(|k| {
                let [r, z] = grid.point(k);
                clamp((r * r + (z - z0) * (z - z0)).sqrt() - rho, c)
            })
            .collect(),
        Shape::HalfSpace { level, below } => (0..grid.len())
            .map(|k| {
                let z = grid.point(k)[1];
                clamp(if *below { z - level } else { level - z }, c)
            })
            .collect(),
        Shape::Profile { curve, side } => profile_distance(curve, *side, grid, c)?,
        Shape::Complement(s) => eval_shape(s, grid, c)?.into_iter().map(|v| -v).collect(),
        Shape::Union(v) => combine(v, grid, c, f64::min)?,
        Shape::Intersection(v) => combine(v, grid, c, f64::max)?,
    })
}

fn combine(v: &[Shape], grid: &Grid, c: f64, op: fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    let mut acc = eval_shape(&v[0], grid, c)?;
    for s in &v[1..] {
        let other = eval_shape(s, grid, c)?;
        for (a, b) in acc.iter_mut().zip(other) {
            *a = op(*a, b);
        }
    }
    Ok(acc)
}

/// Signed distance to a polyline within `c`, sign by the angle-weighted
/// pseudo-normal of the nearest feature; far cells take their sign by flood fill.
fn profile_distance(curve: &ProfileCurve, side: Side, grid: &Grid, c: f64) -> Result<Vec<f64>> {
    let pts = curve.points();
    let sgn = match side {
        Side::Normal => -1.0,
        Side::Opposite => 1.0,
    };
    let nseg = pts.len() - 1;
    let seg_normal = |s: usize| {
        let (a, b) = (pts[s], pts[s + 1]);
        let (dr, dz) = (b[0] - a[0], b[1] - a[1]);
        let l = dr.hypot(dz).max(1e-300);
        [-dz / l, dr / l]
    };
    let normals: Vec<[f64; 2]> = (0..nseg).map(seg_normal).collect();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut val = vec![f64::NAN; grid.len()];
    let h = grid.h;
    for s in 0..nseg {
        let (a, b) = (pts[s], pts[s + 1]);
        let lo_r = a[0].min(b[0]) - c;
        let hi_r = a[0].max(b[0]) + c;
        let lo_z = a[1].min(b[1]) - c;
        let hi_z = a[1].max(b[1]) + c;
        if hi_r < 0.0 || lo_r > grid.r_max() || hi_z < -grid.z_max || lo_z > grid.z_max {
            continue;
        }
        let i0 = (lo_r / h).floor().max(0.0) as usize;
        let i1 = ((hi_r / h).ceil() as usize).min(grid.nr - 1);
        let j0 = ((lo_z + grid.z_max) / h).floor().max(0.0) as usize;
        let j1 = (((hi_z + grid.z_max) / h).ceil() as usize).min(grid.nz - 1);
        let (dr, dz) = (b[0] - a[0], b[1] - a[1]);
        let l2 = (dr * dr + dz * dz).max(1e-300);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = grid.idx(i, j);
                let p = [grid.r(i), grid.z(j)];
                let tpar = (((p[0] - a[0]) * dr + (p[1] - a[1]) * dz) / l2).clamp(0.0, 1.0);
                let q = [a[0] + tpar * dr, a[1] + tpar * dz];
                let d = (p[0] - q[0]).hypot(p[1] - q[1]);
                if d < dist[k] - 1e-15 {
                    dist[k] = d;
                    let nrm = if tpar <= 0.0 && s > 0 {
                        avg(normals[s - 1], normals[s])
                    } else if tpar >= 1.0 && s + 1 < nseg {
                        avg(normals[s], normals[s + 1])
                    } else {
                        normals[s]
                    };
                    let side_dot = (p[0] - q[0]) * nrm[0] + (p[1] - q[1]) * nrm[1];
                    let sign = if side_dot > 0.0 { sgn } else { -sgn };
                    val[k] = sign * d;
                }
            }
        }
    }
    let mut queue: VecDeque<usize> = VecDeque::new();
    let mut out = vec![f64::NAN; grid.len()];
    for k in 0..grid.len() {
        if dist[k] <= c {
            out[k] = val[k];
            queue.push_back(k);
        }
    }
    if queue.is_empty() {
        return Err(Error::Domain("profile does not meet the grid".into()));
    }
    while let Some(k) = queue.pop_front() {
        let s = if out[k] <= 0.0 { -c } else { c };
        let nb: Vec<usize> = grid.neighbors(k).collect();
        for q in nb {
            if out[q].is_nan() {
                out[q] = s;
                queue.push_back(q);
            }
        }
    }
    Ok(out)
}

fn avg(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

//! Rotationally symmetric self-expanders asymptotic to a given cone, found by
//! shooting the profile ODE
//!
//! r' = cos(theta), z' = sin(theta),
//! theta' = (z cos(theta) - r sin(theta))/2 - (n-1) sin(theta)/r
//!
//! in arclength. For a graph z = u(r) this is
//! u'' = (1 + u'^2) [(u - r u')/2 - (n-1) u'/r], with u(0) = h, u'(0) = 0.
//! Disk-type solutions start on the axis, connected (neck) solutions cross
//! z = 0 vertically at r0 and are reflected.

mod shoot;

pub use shoot::{
    neck_step, profile_curvature, profile_rhs, resample, shoot, shoot_disk, shoot_neck, shoot_profile, Family,
    ShootOptions, Shot,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{expander_residual, Cone, Nappes, ProfileCurve};
use crate::ode::Dopri5;

/// Position of a profile within the ordered family of expanders of a cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchLabel {
    Innermost,
    Outermost,
    /// The only profile: innermost and outermost at once.
    InnermostAndOutermost,
    /// Between the extremes and strictly unstable.
    MiddleUnstable,
    Unclassified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpanderProfile {
    pub base: ProfileCurve,
    pub family: Family,
    pub cone: Cone,
    pub aperture_target: f64,
    /// Axis height for disks, neck radius for necks.
    pub shooting_parameter: f64,
    pub achieved_aperture: f64,
    pub branch: BranchLabel,
    pub residual_sup: f64,
}

impl ExpanderProfile {
    /// Number of connected components of the revolved surface: disks over a
    /// double cone come as a mirror pair.
    pub fn components(&self) -> usize {
        match (self.family, self.cone.nappes) {
            (Family::Disk, Nappes::DoubleSymmetric) => 2,
            _ => 1,
        }
    }

    /// Profile resampled on `m` points uniformly spaced in arclength up to
    /// |x| = r_trunc.
    pub fn resample(&self, r_trunc: f64, m: usize) -> Result<Shot> {
        resample(self.family, self.base.n(), self.shooting_parameter, r_trunc, m, &Dopri5::default())
    }

    /// |z| of the upper sheet at radius r, if the profile reaches it.
    pub fn height_at(&self, r: f64) -> Option<f64> {
        let pts: Vec<[f64; 2]> = match self.family {
            Family::Disk => self.base.points().to_vec(),
            Family::Neck => self.base.points().iter().copied().filter(|p| p[1] >= 0.0).collect(),
        };
        let k = pts.iter().position(|p| p[0] >= r)?;
        if k == 0 {
            return if pts[0][0] == r { Some(pts[0][1].abs()) } else { None };
        }
        let (a, b) = (pts[k - 1], pts[k]);
        let w = (r - a[0]) / (b[0] - a[0]);
        Some((a[1] + w * (b[1] - a[1])).abs())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Search window for the axis height of disk-type profiles.
    pub h_window: (f64, f64),
    /// Search window for the neck radius of connected profiles (double cones).
    pub neck_window: (f64, f64),
    /// Sweep points per window.
    pub samples: usize,
    pub max_roots: usize,
    /// Required |achieved - target| aperture.
    pub tol: f64,
    pub shoot: ShootOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            h_window: (-2.0, 2.0),
            neck_window: (0.05, 4.0),
            samples: 81,
            max_roots: 8,
            tol: 1e-8,
            shoot: ShootOptions::default(),
        }
    }
}

/// Matching function p -> achieved aperture - target on a uniform sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sweep {
    pub family: Family,
    pub params: Vec<f64>,
    pub mismatch: Vec<f64>,
}

impl Sweep {
    /// Brackets of sign changes (and exact zeros, as degenerate brackets).
    pub fn brackets(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let g = &self.mismatch;
        let p = &self.params;
        for i in 0..g.len() {
            if g[i] == 0.0 {
                out.push((p[i], p[i]));
            } else if i + 1 < g.len() && g[i].is_finite() && g[i + 1].is_finite() && g[i] * g[i + 1] < 0.0 {
                out.push((p[i], p[i + 1]));
            }
        }
        out
    }
}

fn window_for(family: Family, cone: &Cone, opts: &SolveOptions) -> Option<(f64, f64)> {
    match (family, cone.nappes) {
        (Family::Disk, Nappes::Single) => Some(opts.h_window),
        (Family::Disk, Nappes::DoubleSymmetric) => {
            // The upper disk of a symmetric pair sits above the origin.
            let lo = opts.h_window.0.max(1e-3 * opts.h_window.1.abs());
            (opts.h_window.1 > lo).then_some((lo, opts.h_window.1))
        }
        (Family::Neck, Nappes::DoubleSymmetric) => Some(opts.neck_window),
        (Family::Neck, Nappes::Single) => None,
    }
}

pub fn sweep(n: usize, family: Family, cone: &Cone, window: (f64, f64), opts: &SolveOptions) -> Result<Sweep> {
    let k = opts.samples.max(2);
    let params: Vec<f64> = (0..k).map(|i| window.0 + (window.1 - window.0) * i as f64 / (k - 1) as f64).collect();
    let mut mismatch = Vec::with_capacity(k);
    for &p in &params {
        let shot = shoot(family, n, p, &opts.shoot)?;
        mismatch.push(shot.aperture - cone.aperture);
    }
    Ok(Sweep { family, params, mismatch })
}

fn polish(n: usize, family: Family, cone: &Cone, lo: f64, hi: f64, opts: &SolveOptions) -> Result<(f64, Shot)> {
    let eval = |p: f64| -> Result<(f64, Shot)> {
        let s = shoot(family, n, p, &opts.shoot)?;
        Ok((s.aperture - cone.aperture, s))
    };
    if lo == hi {
        return Ok((lo, eval(lo)?.1));
    }
    let (mut a, mut b) = (lo, hi);
    let (mut ga, _) = eval(a)?;
    let mut best: Option<(f64, f64, Shot)> = None;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let (gm, shot) = eval(m)?;
        if !gm.is_finite() {
            return Err(Error::RootPolish { lo, hi });
        }
        if best.as_ref().map_or(true, |x| gm.abs() < x.1.abs()) {
            best = Some((m, gm, shot));
        }
        if gm.abs() <= 1e-3 * opts.tol || (b - a) <= 1e-15 * (1.0 + m.abs()) {
            break;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    match best {
        Some((p, g, shot)) if g.abs() <= opts.tol => Ok((p, shot)),
        _ => Err(Error::RootPolish { lo, hi }),
    }
}

fn build(family: Family, cone: &Cone, p: f64, shot: Shot) -> Result<ExpanderProfile> {
    let res = expander_residual(&shot.curve)?;
    let residual_sup = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ExpanderProfile {
        base: shot.curve,
        family,
        cone: *cone,
        aperture_target: cone.aperture,
        shooting_parameter: p,
        achieved_aperture: shot.aperture,
        branch: BranchLabel::Unclassified,
        residual_sup,
    })
}

/// All expanders asymptotic to `cone` found by sign changes of the matching
/// function on the sweep grids, polished by bisection. Disks come first, then
/// necks, each sorted by parameter; roots closer than 1e-6 are merged.
pub fn solve_expander(n: usize, cone: &Cone, opts: &SolveOptions) -> Result<Vec<ExpanderProfile>> {
    let mut out = Vec::new();
    for family in [Family::Disk, Family::Neck] {
        let Some(window) = window_for(family, cone, opts) else { continue };
        let sw = sweep(n, family, cone, window, opts)?;
        let mut last: Option<f64> = None;
        for (lo, hi) in sw.brackets() {
            if out.len() >= opts.max_roots {
                break;
            }
            let (p, shot) = polish(n, family, cone, lo, hi, opts)?;
            if last.is_some_and(|q| (p - q).abs() < 1e-6) {
                continue;
            }
            last = Some(p);
            out.push(build(family, cone, p, shot)?);
        }
    }
    Ok(out)
}

/// Sort profiles of a common cone from innermost to outermost by the height
/// of the upper sheet on [r_cmp/2, r_cmp], and label the extremes. Returns
/// warnings for pairs that cross on that range; those fall back to ordering
/// by the height at r_cmp.
pub fn order_expanders(mut list: Vec<ExpanderProfile>, r_cmp: f64) -> (Vec<ExpanderProfile>, Vec<String>) {
    let mut warnings = Vec::new();
    let radii: Vec<f64> = (0..=20).map(|i| r_cmp * (0.5 + 0.5 * i as f64 / 20.0)).collect();
    let key = |e: &ExpanderProfile| e.height_at(r_cmp).unwrap_or(f64::INFINITY);
    list.sort_by(|a, b| key(a).total_cmp(&key(b)));
    for w in list.windows(2) {
        let below = radii.iter().all(|&r| match (w[0].height_at(r), w[1].height_at(r)) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        });
        if !below {
            warnings.push(format!(
                "profiles with parameters {} and {} are not comparable on [{}, {}]",
                w[0].shooting_parameter,
                w[1].shooting_parameter,
                0.5 * r_cmp,
                r_cmp
            ));
        }
    }
    let k = list.len();
    for (i, e) in list.iter_mut().enumerate() {
        e.branch = match (i, k) {
            (_, 1) => BranchLabel::InnermostAndOutermost,
            (0, _) => BranchLabel::Innermost,
            (i, k) if i == k - 1 => BranchLabel::Outermost,
            _ => BranchLabel::Unclassified,
        };
    }
    (list, warnings)
}

#[cfg(test)]
mod tests;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CurveKind, ProfileCurve};
use crate::ode::{integrate, Dopri5};

/// Which ODE family a profile comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Leaves the axis horizontally at height h: a disk-type graph.
    Disk,
    /// Crosses z = 0 vertically at radius r0 and is symmetric under z -> -z.
    Neck,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    /// Output spacing in arclength (refined automatically for thin necks).
    pub ds: f64,
    pub r_max: f64,
    pub ode: Dopri5,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { ds: 0.01, r_max: 20.0, ode: Dopri5::default() }
    }
}

/// Result of integrating one profile.
#[derive(Debug, Clone)]
pub struct Shot {
    pub curve: ProfileCurve,
    /// Tangent angle at every sample.
    pub theta: Vec<f64>,
    /// Arclength at every sample (negative on the lower half of a neck).
    pub s: Vec<f64>,
    /// Slope at infinity, Richardson-extrapolated; NaN after a blow-up.
    pub aperture: f64,
    /// The profile stopped being a graph (or ran out of length) before r_max.
    pub blow_up: bool,
}

/// d/ds of (r, z, theta) for the expander equation in arclength form.
#[inline]
pub fn profile_rhs(n: usize, y: &[f64; 3]) -> [f64; 3] {
    let [r, z, th] = *y;
    let (sn, cs) = th.sin_cos();
    let nm1 = n as f64 - 1.0;
    let dth = if r <= 0.0 {
        // sin(theta)/r -> theta' on the axis
        z * cs / (2.0 * n as f64)
    } else {
        0.5 * (z * cs - r * sn) - nm1 * sn / r
    };
    [cs, sn, dth]
}

/// Curvature theta' at a state.
pub fn profile_curvature(n: usize, y: &[f64; 3]) -> f64 {
    profile_rhs(n, y)[2]
}

struct HalfTrace {
    states: Vec<[f64; 3]>,
    s: Vec<f64>,
    blow_up: bool,
}

fn trace(n: usize, y0: [f64; 3], outputs: &[f64], r_stop: f64, opts: &Dopri5) -> Result<HalfTrace> {
    let mut blow_up = false;
    let states = integrate(
        |_, y: &[f64; 3]| profile_rhs(n, y),
        0.0,
        y0,
        outputs,
        opts,
        |s, y| {
            if s > 0.0 && !(y[2] > -FRAC_PI_2 && y[2] < FRAC_PI_2) {
                blow_up = true;
                return false;
            }
            y[0] < r_stop
        },
    )?;
    let s = outputs[..states.len()].to_vec();
    let reached = states.last().is_some_and(|y| y[0] >= r_stop);
    Ok(HalfTrace { states, s, blow_up: blow_up || !reached })
}

fn slope_at(tr: &HalfTrace, r: f64) -> Option<f64> {
    let st = &tr.states;
    let k = st.iter().position(|y| y[0] >= r)?;
    if k == 0 {
        return Some(st[0][2].tan());
    }
    let (a, b) = (st[k - 1], st[k]);
    let w = (r - a[0]) / (b[0] - a[0]);
    Some((a[2] + w * (b[2] - a[2])).tan())
}

/// Slope at infinity from slopes at r_max/2 and r_max, eliminating the
/// leading r^{-2} correction.
fn extrapolated_aperture(tr: &HalfTrace, r_max: f64) -> f64 {
    if tr.blow_up {
        return f64::NAN;
    }
    let (r1, r2) = (0.5 * r_max, r_max);
    match (slope_at(tr, r1), slope_at(tr, r2)) {
        (Some(s1), Some(s2)) => (r2 * r2 * s2 - r1 * r1 * s1) / (r2 * r2 - r1 * r1),
        _ => f64::NAN,
    }
}

fn check_args(n: usize, opts: &ShootOptions) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("rotational dimension {n} must be at least 2")));
    }
    if !(opts.ds > 0.0) || !(opts.r_max > 0.0) {
        return Err(Error::Domain("shooting step and radius must be positive".into()));
    }
    Ok(())
}

/// Uniform outputs 0, ds, 2ds, ... covering roughly `cap` of arclength.
fn grid(ds: f64, cap: f64) -> Vec<f64> {
    let m = (cap / ds).ceil() as usize;
    (0..=m).map(|i| i as f64 * ds).collect()
}

/// Disk-type profile leaving the axis at height `h`.
pub fn shoot_disk(n: usize, h: f64, opts: &ShootOptions) -> Result<Shot> {
    check_args(n, opts)?;
    if !h.is_finite() {
        return Err(Error::Domain("axis height must be finite".into()));
    }
    let outs = grid(opts.ds, 4.0 * opts.r_max + 10.0);
    let tr = trace(n, [0.0, h, 0.0], &outs, opts.r_max, &opts.ode)?;
    let aperture = extrapolated_aperture(&tr, opts.r_max);
    let points = tr.states.iter().map(|y| [y[0], y[1]]).collect();
    Ok(Shot {
        curve: ProfileCurve::new(n, points, CurveKind::AxisToInfinity)?,
        theta: tr.states.iter().map(|y| y[2]).collect(),
        s: tr.s,
        aperture,
        blow_up: tr.blow_up,
    })
}

/// Thin necks need finer sampling to keep the residual of the sampled curve
/// small.
pub fn neck_step(ds: f64, r0: f64) -> f64 {
    ds.min(r0 / 50.0)
}

/// Connected profile crossing z = 0 vertically at radius `r0`, mirrored to a
/// full curve traversed bottom to top.
pub fn shoot_neck(n: usize, r0: f64, opts: &ShootOptions) -> Result<Shot> {
    check_args(n, opts)?;
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(Error::Domain(format!("neck radius {r0} must be positive")));
    }
    let ds = neck_step(opts.ds, r0);
    let outs = grid(ds, 4.0 * opts.r_max + 10.0);
    let tr = trace(n, [r0, 0.0, FRAC_PI_2], &outs, opts.r_max, &opts.ode)?;
    let aperture = extrapolated_aperture(&tr, opts.r_max);
    let (points, theta, s) = mirror_neck(&tr.states, &tr.s);
    Ok(Shot {
        curve: ProfileCurve::new(n, points, CurveKind::InfinityToInfinity)?,
        theta,
        s,
        aperture,
        blow_up: tr.blow_up,
    })
}

/// Assemble a full neck from its upper half. If the half starts at s = 0 the
/// neck sample is shared.
fn mirror_neck(half: &[[f64; 3]], s: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>, Vec<f64>) {
    let skip = usize::from(s.first() == Some(&0.0));
    let mut pts = Vec::with_capacity(2 * half.len());
    let mut th = Vec::with_capacity(2 * half.len());
    let mut ss = Vec::with_capacity(2 * half.len());
    for k in (skip..half.len()).rev() {
        let y = half[k];
        pts.push([y[0], -y[1]]);
        th.push(std::f64::consts::PI - y[2]);
        ss.push(-s[k]);
    }
    for (k, y) in half.iter().enumerate() {
        pts.push([y[0], y[1]]);
        th.push(y[2]);
        ss.push(s[k]);
    }
    (pts, th, ss)
}

/// Shoot the profile of `family` with parameter `p` (axis height or neck
/// radius).
pub fn shoot(family: Family, n: usize, p: f64, opts: &ShootOptions) -> Result<Shot> {
    match family {
        Family::Disk => shoot_disk(n, p, opts),
        Family::Neck => shoot_neck(n, p, opts),
    }
}

/// Graph-type profile over [0, r_max] from axis height `h`, with its slope at
/// infinity. Requires n >= 2 and r_max >= 20.
pub fn shoot_profile(n: usize, h: f64, r_max: f64) -> Result<(Shot, f64)> {
    if r_max < 20.0 {
        return Err(Error::Domain(format!("r_max = {r_max} is below 20")));
    }
    let shot = shoot_disk(n, h, &ShootOptions { r_max, ..Default::default() })?;
    let a = shot.aperture;
    Ok((shot, a))
}

/// Re-integrate a profile on `m` samples uniformly spaced in arclength, ending
/// where |x| first reaches `r_trunc` (both ends for necks).
pub fn resample(
    family: Family,
    n: usize,
    p: f64,
    r_trunc: f64,
    m: usize,
    ode: &Dopri5,
) -> Result<Shot> {
    if m < 5 {
        return Err(Error::Domain("need at least 5 samples".into()));
    }
    let start = match family {
        Family::Disk => [0.0, p, 0.0],
        Family::Neck => [p, 0.0, FRAC_PI_2],
    };
    if start[0].hypot(start[1]) >= r_trunc {
        return Err(Error::Truncation { requested: r_trunc, available: start[0].hypot(start[1]) });
    }
    // Locate the arclength of the truncation sphere on a fine pass.
    let fine = match family {
        Family::Disk => 1e-3,
        Family::Neck => neck_step(1e-3, p),
    };
    let outs = grid(fine, 4.0 * r_trunc + 10.0);
    let mut hit = None;
    let mut prev = (0.0, start[0].hypot(start[1]));
    integrate(
        |_, y: &[f64; 3]| profile_rhs(n, y),
        0.0,
        start,
        &outs,
        ode,
        |s, y| {
            let rho = y[0].hypot(y[1]);
            if rho >= r_trunc && hit.is_none() {
                let w = (r_trunc - prev.1) / (rho - prev.1);
                hit = Some(prev.0 + w * (s - prev.0));
                return false;
            }
            prev = (s, rho);
            true
        },
    )?;
    let mut big_s = hit.ok_or(Error::Truncation { requested: r_trunc, available: prev.1 })?;
    // Newton on |x(S)| = r_trunc so the end samples sit on the sphere.
    for _ in 0..4 {
        let y = integrate(|_, y: &[f64; 3]| profile_rhs(n, y), 0.0, start, &[big_s], ode, |_, _| true)?[0];
        let rho = y[0].hypot(y[1]);
        let drho = (y[0] * y[2].cos() + y[1] * y[2].sin()) / rho;
        if !(drho > 0.0) {
            break;
        }
        big_s += (r_trunc - rho) / drho;
    }
    match family {
        Family::Disk => {
            let outs: Vec<f64> = (0..m).map(|k| big_s * k as f64 / (m - 1) as f64).collect();
            let st = integrate(|_, y: &[f64; 3]| profile_rhs(n, y), 0.0, start, &outs, ode, |_, _| true)?;
            let points = st.iter().map(|y| [y[0], y[1]]).collect();
            Ok(Shot {
                curve: ProfileCurve::new(n, points, CurveKind::AxisToInfinity)?,
                theta: st.iter().map(|y| y[2]).collect(),
                s: outs,
                aperture: f64::NAN,
                blow_up: false,
            })
        }
        Family::Neck => {
            let sym: Vec<f64> = (0..m)
                .map(|k| big_s * (2.0 * k as f64 - (m - 1) as f64) / (m - 1) as f64)
                .collect();
            let outs: Vec<f64> = sym.iter().copied().filter(|&s| s >= 0.0).collect();
            let st = integrate(|_, y: &[f64; 3]| profile_rhs(n, y), 0.0, start, &outs, ode, |_, _| true)?;
            let (points, theta, s) = mirror_neck(&st, &outs);
            Ok(Shot {
                curve: ProfileCurve::new(n, points, CurveKind::InfinityToInfinity)?,
                theta,
                s,
                aperture: f64::NAN,
                blow_up: false,
            })
        }
    }
}

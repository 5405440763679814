//! Profile curves of hypersurfaces of revolution and the quantities built on
//! them: the expander residual, weighted Sobolev-type norms, the expander
//! energy and the change of variables to ordinary mean curvature flow.
//!
//! Conventions: the unit normal of a profile traversed with unit tangent
//! T = (T_r, T_z) is N = (-T_z, T_r). With this choice the residual
//!
//! R = div N + (x . N) / 2
//!   = -kappa - (n-1) T_z / r + (z T_r - r T_z) / 2
//!
//! vanishes exactly on self-expanders, and the expander flow moves the
//! surface with normal velocity -R along N.

mod curve;
mod diff;
pub mod io;
mod norms;

pub use curve::{unit_sphere_area, Cone, CurveKind, Nappes, ProfileCurve, AXIS_SLOPE_TOL, AXIS_TOL};
pub use diff::CurveDiff;
pub use norms::{
    check_extent, expander_energy, relative_expander_entropy, relative_expander_entropy_with,
    rotational_weight, trapezoid, weighted_norm, weighted_norms, WeightedNorms, GRAPH_GAUGE_LIMIT,
};

use crate::error::{Error, Result};

/// Residual from first and second derivatives of (r, z) in any regular
/// parameter.
#[inline]
pub fn residual_from_derivatives(n: usize, r: f64, z: f64, d1: [f64; 2], d2: [f64; 2]) -> f64 {
    let speed = d1[0].hypot(d1[1]);
    let kappa = (d1[0] * d2[1] - d1[1] * d2[0]) / (speed * speed * speed);
    let (tr, tz) = (d1[0] / speed, d1[1] / speed);
    // On the axis T_z / r tends to kappa.
    let rot = if r <= AXIS_TOL { kappa } else { tz / r };
    -kappa - (n as f64 - 1.0) * rot + 0.5 * (z * tr - r * tz)
}

fn require_regular(curve: &ProfileCurve, min_len: usize) -> Result<()> {
    if curve.len() < min_len {
        return Err(Error::MalformedCurve(format!(
            "need at least {min_len} samples, got {}",
            curve.len()
        )));
    }
    Ok(())
}

/// Expander residual R = div N + (x . N)/2 at every sample, with N the
/// left-rotated tangent (see module docs). R > 0 everywhere means the curve is
/// strictly expander mean convex towards -N.
pub fn expander_residual(curve: &ProfileCurve) -> Result<Vec<f64>> {
    require_regular(curve, 5)?;
    let d = CurveDiff::new(curve);
    Ok(residual_over(curve.n(), &d, &curve.r(), &curve.z()))
}

/// Residual of the curve with samples (r, z) differentiated by `d`.
pub fn residual_over(n: usize, d: &CurveDiff, r: &[f64], z: &[f64]) -> Vec<f64> {
    (0..r.len())
        .map(|i| {
            let (r1, r2) = d.at(i, r, true);
            let (z1, z2) = d.at(i, z, false);
            residual_from_derivatives(n, r[i], z[i], [r1, z1], [r2, z2])
        })
        .collect()
}

/// Unit tangents and normals N = (-T_z, T_r) at every sample.
pub fn frame(curve: &ProfileCurve) -> Result<Vec<([f64; 2], [f64; 2])>> {
    require_regular(curve, 3)?;
    let d = CurveDiff::new(curve);
    Ok(frame_over(&d, &curve.r(), &curve.z()))
}

pub fn frame_over(d: &CurveDiff, r: &[f64], z: &[f64]) -> Vec<([f64; 2], [f64; 2])> {
    (0..r.len())
        .map(|i| {
            let (r1, _) = d.at(i, r, true);
            let (z1, _) = d.at(i, z, false);
            let sp = r1.hypot(z1);
            let t = [r1 / sp, z1 / sp];
            (t, [-t[1], t[0]])
        })
        .collect()
}

/// Squared second fundamental form |A|^2 = kappa^2 + (n-1)(T_z/r)^2.
pub fn second_fundamental_form_sq(curve: &ProfileCurve) -> Result<Vec<f64>> {
    require_regular(curve, 5)?;
    let d = CurveDiff::new(curve);
    let (r, z) = (curve.r(), curve.z());
    let nm1 = curve.n() as f64 - 1.0;
    Ok((0..r.len())
        .map(|i| {
            let (r1, r2) = d.at(i, &r, true);
            let (z1, z2) = d.at(i, &z, false);
            let sp = r1.hypot(z1);
            let kappa = (r1 * z2 - z1 * r2) / (sp * sp * sp);
            let rot = if r[i] <= AXIS_TOL { kappa } else { z1 / sp / r[i] };
            kappa * kappa + nm1 * rot * rot
        })
        .collect())
}

/// Discrete sup-norm proxies of a function sampled over a curve: returns
/// (sup|u|, sup|u|+|u_s|, sup|u|+|u_s|+|u_ss|).
pub fn c_proxies(d: &CurveDiff, u: &[f64]) -> (f64, f64, f64) {
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for i in 0..u.len() {
        let (a, b) = d.at(i, u, false);
        c0 = c0.max(u[i].abs());
        c1 = c1.max(u[i].abs() + a.abs());
        c2 = c2.max(u[i].abs() + a.abs() + b.abs());
    }
    (c0, c1, c2)
}

pub fn c2_proxy(curve: &ProfileCurve, u: &[f64]) -> f64 {
    c_proxies(&CurveDiff::new(curve), u).2
}

/// Rescale a time-t slice of an expander flow to the corresponding slice of
/// mean curvature flow: x -> e^{t/2} x at time s = e^t.
pub fn dictionary_map(curve: &ProfileCurve, t: f64) -> (ProfileCurve, f64) {
    let scale = (0.5 * t).exp();
    let pts = curve.points().iter().map(|p| [scale * p[0], scale * p[1]]).collect();
    // Scaling preserves every curve invariant.
    let mapped = curve.with_points(pts).expect("scaling preserves validity");
    (mapped, t.exp())
}

/// Inverse of [`dictionary_map`]: an MCF slice at time s > 0 to the expander
/// slice at t = ln s.
pub fn dictionary_unmap(curve: &ProfileCurve, s: f64) -> (ProfileCurve, f64) {
    let scale = s.sqrt().recip();
    let pts = curve.points().iter().map(|p| [scale * p[0], scale * p[1]]).collect();
    let mapped = curve.with_points(pts).expect("scaling preserves validity");
    (mapped, s.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperplane_residual_vanishes() {
        let c = ProfileCurve::hyperplane(3, 5.0, 100).unwrap();
        for r in expander_residual(&c).unwrap() {
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn sphere_residual_matches_closed_form() {
        for (n, rho) in [(2usize, 1.0), (3, 0.7), (1, 2.0)] {
            let c = ProfileCurve::sphere(n, rho, 400).unwrap();
            let want = n as f64 / rho + rho / 2.0;
            for (i, r) in expander_residual(&c).unwrap().iter().enumerate() {
                assert!((r - want).abs() < 1e-6, "n={n} sample {i}: {r} vs {want}");
            }
        }
    }

    #[test]
    fn off_centre_sphere_residual() {
        // Normal outward, x.N = rho + z0 cos(polar angle).
        let (n, rho, z0) = (2usize, 0.5, 1.5);
        let m = 400;
        let c = ProfileCurve::sphere_at(n, z0, rho, m).unwrap();
        for (i, r) in expander_residual(&c).unwrap().iter().enumerate() {
            let a = std::f64::consts::PI * i as f64 / m as f64;
            let want = n as f64 / rho + 0.5 * (rho + z0 * a.cos());
            assert!((r - want).abs() < 1e-6);
        }
    }

    #[test]
    fn torus_loop_is_periodic() {
        // Circle of radius 0.5 about (2, 0), counter-clockwise: N points inward.
        let m = 400;
        let pts: Vec<[f64; 2]> = (0..m)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                [2.0 + 0.5 * a.cos(), 0.5 * a.sin()]
            })
            .collect();
        let c = ProfileCurve::new(2, pts.clone(), CurveKind::ClosedLoop).unwrap();
        let res = expander_residual(&c).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            // inward normal (-cos a, -sin a)
            let kappa = 2.0; // counter-clockwise circle
            let tz = a.cos();
            let want = -kappa - tz / p[0] + 0.5 * (-(p[0] * a.cos()) - p[1] * a.sin());
            assert!((res[i] - want).abs() < 1e-6, "{i}: {} vs {want}", res[i]);
        }
    }

    #[test]
    fn dictionary_round_trip() {
        let c = ProfileCurve::sphere(2, 1.0, 50).unwrap();
        let (m, s) = dictionary_map(&c, 0.0);
        assert_eq!(s, 1.0);
        assert_eq!(m, c);
        let (m, s) = dictionary_map(&c, 0.3);
        let (back, t) = dictionary_unmap(&m, s);
        assert!((t - 0.3).abs() < 1e-15);
        for (p, q) in back.points().iter().zip(c.points()) {
            assert!((p[0] - q[0]).abs() <= 4.0 * f64::EPSILON * q[0].abs().max(1.0));
            assert!((p[1] - q[1]).abs() <= 4.0 * f64::EPSILON * q[1].abs().max(1.0));
        }
    }

    #[test]
    fn emcf_sphere_maps_to_mcf_sphere() {
        let (n, rho0) = (2.0, 1.0);
        for t in [0.0, 0.05, 0.1, 0.2] {
            let rho = ((rho0 * rho0 + 2.0 * n) * f64::exp(-t) - 2.0 * n).sqrt();
            let c = ProfileCurve::sphere(2, rho, 20).unwrap();
            let (m, s) = dictionary_map(&c, t);
            let want = (rho0 * rho0 + 2.0 * n - 2.0 * n * s).sqrt();
            assert!((m.max_radius() - want).abs() < 1e-12);
        }
    }
}

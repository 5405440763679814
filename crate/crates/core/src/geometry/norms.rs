use serde::{Deserialize, Serialize};

use super::curve::{unit_sphere_area, CurveKind, ProfileCurve, AXIS_TOL};
use super::diff::CurveDiff;
use super::{c_proxies, frame_over};
use crate::error::{Error, Result};

/// Largest C2 proxy of a normal graph accepted by the relative entropy; past
/// it the pushed-forward curve is no longer guaranteed to embed.
pub const GRAPH_GAUGE_LIMIT: f64 = 0.5;

/// Truncated weighted norms of a rotationally symmetric function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    pub w0: f64,
    pub w1: f64,
    pub w2: f64,
    pub r_trunc: f64,
}

impl WeightedNorms {
    pub fn get(&self, k: usize) -> f64 {
        match k {
            0 => self.w0,
            1 => self.w1,
            _ => self.w2,
        }
    }
}

/// e^{|x|^2/4} r^{n-1}: the expander weight times the rotational area factor.
#[inline]
pub fn rotational_weight(n: usize, r: f64, z: f64) -> f64 {
    (0.25 * (r * r + z * z)).exp() * r.powi(n as i32 - 1)
}

/// Fails when a non-compact curve stops short of the truncation sphere.
pub fn check_extent(curve: &ProfileCurve, r_trunc: f64) -> Result<()> {
    if !(r_trunc > 0.0) {
        return Err(Error::Domain(format!("truncation radius {r_trunc} must be positive")));
    }
    let pts = curve.points();
    if pts.is_empty() {
        return Ok(());
    }
    let norm = |p: [f64; 2]| p[0].hypot(p[1]);
    let ends: Vec<[f64; 2]> = match curve.kind() {
        CurveKind::ClosedLoop => vec![],
        CurveKind::GraphOverRadius | CurveKind::AxisToInfinity => vec![pts[pts.len() - 1]],
        CurveKind::InfinityToInfinity => vec![pts[0], pts[pts.len() - 1]],
    };
    for e in ends {
        if norm(e) < r_trunc * (1.0 - 1e-9) {
            return Err(Error::Truncation { requested: r_trunc, available: norm(e) });
        }
    }
    Ok(())
}

/// Composite trapezoid of `g` (sampled at the curve points) against chord
/// length, restricted to |x| <= r_trunc. A segment crossing the sphere
/// contributes up to the crossing point, with g interpolated linearly.
pub fn trapezoid(curve: &ProfileCurve, g: &[f64], r_trunc: f64) -> f64 {
    let pts = curve.points();
    let rr = r_trunc * r_trunc;
    let inside = |p: [f64; 2]| p[0] * p[0] + p[1] * p[1] <= rr * (1.0 + 1e-12);
    let mut acc = 0.0;
    let mut seg = |a: usize, b: usize| {
        let (p, q) = (pts[a], pts[b]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        match (inside(p), inside(q)) {
            (true, true) => acc += 0.5 * (g[a] + g[b]) * len,
            (false, false) => {}
            (ip, _) => {
                let (i, o, gi, go) = if ip { (p, q, g[a], g[b]) } else { (q, p, g[b], g[a]) };
                // |i + tau (o - i)| = r_trunc, tau in (0, 1]
                let d = [o[0] - i[0], o[1] - i[1]];
                let qa = d[0] * d[0] + d[1] * d[1];
                let qb = 2.0 * (i[0] * d[0] + i[1] * d[1]);
                let qc = i[0] * i[0] + i[1] * i[1] - rr;
                let tau = ((-qb + (qb * qb - 4.0 * qa * qc).max(0.0).sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
                let gc = gi + tau * (go - gi);
                acc += 0.5 * (gi + gc) * tau * len;
            }
        }
    };
    for i in 1..pts.len() {
        seg(i - 1, i);
    }
    if curve.is_periodic() && pts.len() > 2 {
        seg(pts.len() - 1, 0);
    }
    acc
}

/// All three truncated weighted norms of `u` over `base`:
/// ||u||_{W,k}^2 = sum_{i<=k} int |grad^i u|^2 e^{|x|^2/4} over the revolved
/// surface inside the ball of radius r_trunc.
pub fn weighted_norms(base: &ProfileCurve, u: &[f64], r_trunc: f64) -> Result<WeightedNorms> {
    check_extent(base, r_trunc)?;
    if u.len() != base.len() {
        return Err(Error::Domain(format!(
            "function has {} samples, curve has {}",
            u.len(),
            base.len()
        )));
    }
    if base.len() < 3 {
        return Ok(WeightedNorms { w0: 0.0, w1: 0.0, w2: 0.0, r_trunc });
    }
    let d = CurveDiff::new(base);
    let (r, z) = (base.r(), base.z());
    let fr = frame_over(&d, &r, &z);
    let n = base.n();
    let nm1 = n as f64 - 1.0;
    let len = u.len();
    let mut g0 = Vec::with_capacity(len);
    let mut g1 = Vec::with_capacity(len);
    let mut g2 = Vec::with_capacity(len);
    for i in 0..len {
        let (us, uss) = d.at(i, u, false);
        let w = rotational_weight(n, r[i], z[i]);
        let tr = fr[i].0[0];
        let circ = if r[i] <= AXIS_TOL { uss } else { tr * us / r[i] };
        g0.push(u[i] * u[i] * w);
        g1.push(us * us * w);
        g2.push((uss * uss + nm1 * circ * circ) * w);
    }
    let area = unit_sphere_area(n - 1);
    let i0 = area * trapezoid(base, &g0, r_trunc);
    let i1 = area * trapezoid(base, &g1, r_trunc);
    let i2 = area * trapezoid(base, &g2, r_trunc);
    Ok(WeightedNorms {
        w0: i0.sqrt(),
        w1: (i0 + i1).sqrt(),
        w2: (i0 + i1 + i2).sqrt(),
        r_trunc,
    })
}

pub fn weighted_norm(base: &ProfileCurve, u: &[f64], k: usize, r_trunc: f64) -> Result<f64> {
    if k > 2 {
        return Err(Error::Domain(format!("weighted norm order {k} not supported")));
    }
    Ok(weighted_norms(base, u, r_trunc)?.get(k))
}

/// Truncated expander energy int e^{|x|^2/4} of the revolved curve.
pub fn expander_energy(curve: &ProfileCurve, r_trunc: f64) -> Result<f64> {
    check_extent(curve, r_trunc)?;
    if curve.len() < 2 {
        return Ok(0.0);
    }
    let n = curve.n();
    let g: Vec<f64> = curve.points().iter().map(|p| rotational_weight(n, p[0], p[1])).collect();
    Ok(unit_sphere_area(n - 1) * trapezoid(curve, &g, r_trunc))
}

/// Relative expander entropy of the normal graph of `u` over `base`.
///
/// See [`relative_expander_entropy_with`]; this builds the derivative operator.
pub fn relative_expander_entropy(base: &ProfileCurve, u: &[f64], r_trunc: f64) -> Result<f64> {
    if base.len() < 5 {
        return Err(Error::MalformedCurve("relative entropy needs at least 5 samples".into()));
    }
    relative_expander_entropy_with(base, &CurveDiff::new(base), u, r_trunc)
}

/// E[graph of u] - E[base] over the samples of `base` inside the truncation
/// ball, evaluated segment by segment from the difference of the integrands
/// (no cancellation between two large totals). The discrete first variation of
/// the polygonal energy at the base is subtracted: it vanishes for the smooth
/// expander and is pure discretisation error, which would otherwise swamp the
/// second-order term for small graphs. The result is exactly 0 for u = 0.
pub fn relative_expander_entropy_with(
    base: &ProfileCurve,
    d: &CurveDiff,
    u: &[f64],
    r_trunc: f64,
) -> Result<f64> {
    check_extent(base, r_trunc)?;
    if u.len() != base.len() {
        return Err(Error::Domain("function and curve lengths differ".into()));
    }
    let c2 = c_proxies(d, u).2;
    if !(c2 <= GRAPH_GAUGE_LIMIT) {
        return Err(Error::GraphBreakdown(format!(
            "C2 proxy {c2:.3e} exceeds the embedding limit {GRAPH_GAUGE_LIMIT}"
        )));
    }
    let n = base.n();
    let (r, z) = (base.r(), base.z());
    let fr = frame_over(d, &r, &z);
    let pts = base.points();
    let rr = r_trunc * r_trunc * (1.0 + 1e-12);
    let last = match pts.iter().position(|p| p[0] * p[0] + p[1] * p[1] > rr) {
        Some(0) => return Ok(0.0),
        Some(k) => k - 1,
        None => pts.len() - 1,
    };
    if pts.len() < 2 || last == 0 {
        return Ok(0.0);
    }
    // Displacement uN and the pushed-forward samples.
    let disp: Vec<[f64; 2]> = (0..=last).map(|i| [u[i] * fr[i].1[0], u[i] * fr[i].1[1]]).collect();
    let moved: Vec<[f64; 2]> = (0..=last).map(|i| [pts[i][0] + disp[i][0], pts[i][1] + disp[i][1]]).collect();
    if moved.iter().any(|p| p[0] < -AXIS_TOL) {
        return Err(Error::GraphBreakdown("graph crosses the axis".into()));
    }
    let pm1 = n as i32 - 1;
    // Integrand difference e^{|P|^2/4} R^{n-1} - e^{|x|^2/4} r^{n-1}, evaluated
    // without subtracting two large numbers.
    let weight_diff = |i: usize| -> f64 {
        let x = pts[i];
        let dv = disp[i];
        let ex = 0.25 * (x[0] * x[0] + x[1] * x[1]);
        let da = 0.25 * (2.0 * (x[0] * dv[0] + x[1] * dv[1]) + dv[0] * dv[0] + dv[1] * dv[1]);
        let rp = moved[i][0].max(0.0);
        let r0 = x[0];
        // R^{n-1} - r^{n-1} = (R - r) sum_j R^j r^{n-2-j}
        let mut pow_diff = 0.0;
        for j in 0..pm1 {
            pow_diff += rp.powi(j) * r0.powi(pm1 - 1 - j);
        }
        pow_diff *= dv[0];
        ex.exp() * (da.exp_m1() * rp.powi(pm1) + pow_diff)
    };
    let w0: Vec<f64> = (0..=last).map(|i| rotational_weight(n, pts[i][0], pts[i][1])).collect();
    let dw: Vec<f64> = (0..=last).map(weight_diff).collect();
    let mut acc = 0.0;
    for i in 0..last {
        let dx = [pts[i + 1][0] - pts[i][0], pts[i + 1][1] - pts[i][1]];
        let dd = [disp[i + 1][0] - disp[i][0], disp[i + 1][1] - disp[i][1]];
        let lx = dx[0].hypot(dx[1]);
        let dp = [dx[0] + dd[0], dx[1] + dd[1]];
        if dp[0] * dx[0] + dp[1] * dx[1] <= 0.0 {
            return Err(Error::GraphBreakdown(format!("pushed segment {i} reverses orientation")));
        }
        let lp = dp[0].hypot(dp[1]);
        let dl = (2.0 * (dx[0] * dd[0] + dx[1] * dd[1]) + dd[0] * dd[0] + dd[1] * dd[1]) / (lp + lx);
        let a_x = 0.5 * (w0[i] + w0[i + 1]);
        let a_diff = 0.5 * (dw[i] + dw[i + 1]);
        acc += a_diff * lp + a_x * dl;
    }
    // Discrete first variation of the polygonal energy at the base, paired with uN.
    let mut lin = 0.0;
    for i in 0..=last {
        let x = pts[i];
        let e = (0.25 * (x[0] * x[0] + x[1] * x[1])).exp();
        let grad_w = if pm1 == 0 {
            [0.5 * x[0] * e, 0.5 * x[1] * e]
        } else {
            let rp = x[0].powi(pm1);
            let rq = if pm1 == 1 { 1.0 } else { x[0].powi(pm1 - 1) };
            [e * (0.5 * x[0] * rp + pm1 as f64 * rq), e * 0.5 * x[1] * rp]
        };
        let mut g = [0.0, 0.0];
        let mut lsum = 0.0;
        if i > 0 {
            let dx = [x[0] - pts[i - 1][0], x[1] - pts[i - 1][1]];
            let l = dx[0].hypot(dx[1]);
            let a = 0.5 * (w0[i - 1] + w0[i]);
            g[0] += a * dx[0] / l;
            g[1] += a * dx[1] / l;
            lsum += l;
        }
        if i < last {
            let dx = [pts[i + 1][0] - x[0], pts[i + 1][1] - x[1]];
            let l = dx[0].hypot(dx[1]);
            let a = 0.5 * (w0[i] + w0[i + 1]);
            g[0] -= a * dx[0] / l;
            g[1] -= a * dx[1] / l;
            lsum += l;
        }
        g[0] += 0.5 * grad_w[0] * lsum;
        g[1] += 0.5 * grad_w[1] * lsum;
        lin += g[0] * disp[i][0] + g[1] * disp[i][1];
    }
    Ok(unit_sphere_area(n - 1) * (acc - lin))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_function_has_zero_norms() {
        let c = ProfileCurve::hyperplane(2, 8.0, 400).unwrap();
        let w = weighted_norms(&c, &vec![0.0; c.len()], 8.0).unwrap();
        assert_eq!((w.w0, w.w1, w.w2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn gaussian_on_plane_matches_quadrature_oracle() {
        // sqrt(2 pi * int_0^8 e^{-r^2/4} r dr) = sqrt(4 pi (1 - e^{-16}))
        let c = ProfileCurve::hyperplane(2, 8.0, 4000).unwrap();
        let u: Vec<f64> = c.r().iter().map(|r| (-r * r / 4.0).exp()).collect();
        let w = weighted_norm(&c, &u, 0, 8.0).unwrap();
        assert!((w - 3.544_907_7).abs() < 5e-4, "{w}");
    }

    #[test]
    fn norms_are_ordered() {
        let c = ProfileCurve::hyperplane(3, 6.0, 600).unwrap();
        let u: Vec<f64> = c.r().iter().map(|r| (r * 2.0).cos() * (-r * r / 3.0).exp()).collect();
        let w = weighted_norms(&c, &u, 6.0).unwrap();
        assert!(0.0 < w.w0 && w.w0 <= w.w1 && w.w1 <= w.w2);
    }

    #[test]
    fn plane_energy_closed_form() {
        let c = ProfileCurve::hyperplane(2, 4.0, 4000).unwrap();
        let e = expander_energy(&c, 4.0).unwrap();
        let want = 4.0 * std::f64::consts::PI * (4f64.exp() - 1.0);
        assert!((e - want).abs() / want < 1e-5, "{e} vs {want}");
    }

    #[test]
    fn partial_segment_truncation() {
        let c = ProfileCurve::hyperplane(2, 5.0, 5000).unwrap();
        let e = expander_energy(&c, 4.0).unwrap();
        let want = 4.0 * std::f64::consts::PI * (4f64.exp() - 1.0);
        assert!((e - want).abs() / want < 1e-5);
        let c = ProfileCurve::hyperplane(2, 3.0, 100).unwrap();
        assert!(matches!(expander_energy(&c, 4.0), Err(Error::Truncation { .. })));
    }

    #[test]
    fn sphere_energy_grows_with_radius() {
        let e1 = expander_energy(&ProfileCurve::sphere(2, 1.0, 200).unwrap(), 3.0).unwrap();
        let e2 = expander_energy(&ProfileCurve::sphere(2, 2.0, 200).unwrap(), 3.0).unwrap();
        assert!(e2 > e1);
        // closed form 4 pi rho^2 e^{rho^2/4}
        let want = 4.0 * std::f64::consts::PI * 0.25f64.exp();
        assert!((e1 - want).abs() / want < 1e-4);
    }

    #[test]
    fn empty_curve_energy_is_zero() {
        let c = ProfileCurve::new(2, vec![], CurveKind::ClosedLoop).unwrap();
        assert_eq!(expander_energy(&c, 8.0).unwrap(), 0.0);
    }

    #[test]
    fn relative_entropy_zero_and_gauge() {
        let c = ProfileCurve::hyperplane(2, 8.0, 800).unwrap();
        assert_eq!(relative_expander_entropy(&c, &vec![0.0; c.len()], 8.0).unwrap(), 0.0);
        let big = vec![1.0; c.len()];
        assert!(matches!(relative_expander_entropy(&c, &big, 8.0), Err(Error::GraphBreakdown(_))));
    }

    #[test]
    fn relative_entropy_of_vertical_shift_of_plane() {
        // Plane z = c: E - E_0 = 2 pi int_0^R (e^{(r^2+c^2)/4} - e^{r^2/4}) r dr
        //             = 4 pi (e^{c^2/4} - 1)(e^{R^2/4} - 1).
        let c = ProfileCurve::hyperplane(2, 4.0, 4000).unwrap();
        let h = 1e-3;
        let u = vec![h; c.len()];
        let got = relative_expander_entropy(&c, &u, 4.0).unwrap();
        let want = 4.0 * std::f64::consts::PI * (h * h / 4.0).exp_m1() * (4f64.exp() - 1.0);
        assert!((got - want).abs() / want < 1e-4, "{got} vs {want}");
    }
}

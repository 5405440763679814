//! Stability of rotationally symmetric expanders: the Jacobi operator
//! L = Delta + (x/2).grad + |A|^2 - 1/2 restricted to rotationally symmetric
//! functions, discretised through its weighted quadratic form
//!
//! Q(f) = int (f_s^2 + (1/2 - |A|^2) f^2) e^{|x|^2/4} r^{n-1} ds.
//!
//! Linear finite elements in arclength with lumped mass give K f = lambda M f
//! with K symmetric tridiagonal and M diagonal; the symmetric matrix
//! M^{-1/2} K M^{-1/2} is what the eigen-solver sees. The natural boundary
//! condition holds on the axis, Dirichlet at the truncation sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expanders::{profile_rhs, ExpanderProfile, Family, Shot};
use crate::geometry::{c_proxies, rotational_weight, CurveDiff, ProfileCurve, AXIS_TOL};
use crate::linalg::SymTridiag;

/// |lambda0| at or below this is reported as inconclusive.
pub const VERDICT_BAND: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct StabilityOperator {
    /// Grid nodes, uniformly spaced in arclength; the last node (and the first,
    /// for necks) carries the Dirichlet condition.
    pub curve: ProfileCurve,
    pub theta: Vec<f64>,
    pub ds: f64,
    /// |A|^2 at the nodes (already multiplied by the potential scale).
    pub a_sq: Vec<f64>,
    /// Weight e^{|x|^2/4} r^{n-1} at the cell midpoints.
    pub w_mid: Vec<f64>,
    /// First and one-past-last free node.
    pub free: (usize, usize),
    /// Lumped mass and stiffness on the free nodes.
    pub mass: Vec<f64>,
    pub stiffness: SymTridiag,
    /// M^{-1/2} K M^{-1/2}.
    pub sym: SymTridiag,
    pub r_trunc: f64,
    pub family: Family,
}

impl StabilityOperator {
    pub fn m(&self) -> usize {
        self.curve.len()
    }

    /// Apply the discrete L = -M^{-1} K to a nodal vector (zero on Dirichlet
    /// nodes).
    pub fn apply_l(&self, f: &[f64]) -> Vec<f64> {
        let (a, b) = self.free;
        let kf = self.stiffness.mul(&f[a..b]);
        let mut out = vec![0.0; f.len()];
        for (i, v) in kf.iter().enumerate() {
            out[a + i] = -v / self.mass[i];
        }
        out
    }

    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let (a, b) = self.free;
        let kf = self.stiffness.mul(&f[a..b]);
        kf.iter().zip(&f[a..b]).map(|(x, y)| x * y).sum()
    }

    pub fn mass_norm_sq(&self, f: &[f64]) -> f64 {
        let (a, b) = self.free;
        f[a..b].iter().zip(&self.mass).map(|(x, m)| m * x * x).sum()
    }

    pub fn rayleigh_quotient(&self, f: &[f64]) -> f64 {
        self.quadratic_form(f) / self.mass_norm_sq(f)
    }
}

/// Assemble the operator on `m` nodes up to |x| = r_trunc.
pub fn assemble_stability_operator(e: &ExpanderProfile, r_trunc: f64, m: usize) -> Result<StabilityOperator> {
    assemble_scaled(e, r_trunc, m, 1.0)
}

/// As [`assemble_stability_operator`] with |A|^2 multiplied by `scale`.
pub fn assemble_scaled(e: &ExpanderProfile, r_trunc: f64, m: usize, scale: f64) -> Result<StabilityOperator> {
    if m < 200 {
        return Err(Error::Domain(format!("grid of {m} points is below the minimum of 200")));
    }
    if e.residual_sup > 1e-6 {
        return Err(Error::Precondition(format!(
            "profile residual {:.3e} exceeds 1e-6",
            e.residual_sup
        )));
    }
    // Nodes at even indices, cell midpoints at odd ones.
    let fine = e.resample(r_trunc, 2 * m - 1)?;
    assemble_from_shot(&fine, e.family, e.base.n(), r_trunc, scale)
}

/// Assemble from a profile sampled at 2m-1 points, uniform in arclength.
pub fn assemble_from_shot(fine: &Shot, family: Family, n: usize, r_trunc: f64, scale: f64) -> Result<StabilityOperator> {
    let fp = fine.curve.points();
    if fp.len() % 2 == 0 || fp.len() < 5 {
        return Err(Error::Assembly("need an odd number of fine samples".into()));
    }
    let m = (fp.len() + 1) / 2;
    let ds = 2.0 * (fine.s[1] - fine.s[0]);
    let w: Vec<f64> = fp.iter().map(|p| rotational_weight(n, p[0], p[1])).collect();
    let nm1 = n as f64 - 1.0;
    let a_sq: Vec<f64> = (0..m)
        .map(|i| {
            let j = 2 * i;
            let (p, th) = (fp[j], fine.theta[j]);
            let k = profile_rhs(n, &[p[0], p[1], th])[2];
            let rot = if p[0] <= AXIS_TOL { k } else { th.sin() / p[0] };
            scale * (k * k + nm1 * rot * rot)
        })
        .collect();
    let free = match family {
        Family::Disk => (0, m - 1),
        Family::Neck => (1, m - 1),
    };
    let (a, b) = free;
    let nf = b - a;
    let mut mass = vec![0.0; nf];
    let mut kd = vec![0.0; nf];
    let mut ke = vec![0.0; nf.saturating_sub(1)];
    for i in a..b {
        let j = 2 * i;
        let left = if i > 0 { w[j - 1] + w[j] } else { 0.0 };
        let right = w[j] + w[j + 1];
        mass[i - a] = 0.25 * ds * (left + right);
        // Stiffness contributions of the two adjacent cells.
        if i > 0 {
            kd[i - a] += w[j - 1] / ds;
        }
        kd[i - a] += w[j + 1] / ds;
        if i + 1 < b {
            ke[i - a] = -w[j + 1] / ds;
        }
    }
    for i in 0..nf {
        kd[i] += mass[i] * (0.5 - a_sq[a + i]);
    }
    let stiffness = SymTridiag::new(kd.clone(), ke.clone())?;
    let sd: Vec<f64> = kd.iter().zip(&mass).map(|(k, mm)| k / mm).collect();
    let se: Vec<f64> = (0..ke.len()).map(|i| ke[i] / (mass[i] * mass[i + 1]).sqrt()).collect();
    let sym = SymTridiag::new(sd, se)?;
    let nodes: Vec<[f64; 2]> = (0..m).map(|i| fp[2 * i]).collect();
    let curve = fine.curve.with_points(nodes)?;
    Ok(StabilityOperator {
        curve,
        theta: (0..m).map(|i| fine.theta[2 * i]).collect(),
        ds,
        a_sq,
        w_mid: (0..m - 1).map(|i| w[2 * i + 1]).collect(),
        free,
        mass,
        stiffness,
        sym,
        r_trunc,
        family,
    })
}

/// -L f on the free nodes in strong form, -(w f_s)_s / w + (1/2 - |A|^2) f,
/// with fluxes from the cell-midpoint weights. An independent route to the
/// assembled matrix, used for consistency checks.
pub fn direct_stencil_rows(op: &StabilityOperator, f: &[f64]) -> Vec<f64> {
    let (a, b) = op.free;
    (a..b)
        .map(|i| {
            let mut flux = op.w_mid[i] * (f[i] - f[i + 1]);
            if i > 0 {
                flux += op.w_mid[i - 1] * (f[i] - f[i - 1]);
            }
            flux / (op.ds * op.mass[i - a]) + (0.5 - op.a_sq[i]) * f[i]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    StrictlyUnstable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda0: f64,
    pub lambda1: f64,
    /// Eigenfunction at every grid node, positive, C2 proxy equal to 1.
    pub f: Vec<f64>,
    pub c2_normalization: f64,
    pub rayleigh: f64,
    pub r_trunc: f64,
    pub m: usize,
    pub iterations: usize,
}

/// Lowest eigenvalue by Sturm bisection, eigenvector by shifted inverse
/// iteration from just below it.
pub fn lowest_eigenpair(op: &StabilityOperator) -> Result<SpectralResult> {
    let a = &op.sym;
    let lambda0 = a.eigenvalue(0);
    let lambda1 = if a.len() > 1 { a.eigenvalue(1) } else { f64::INFINITY };
    if !(lambda1 - lambda0 > 1e-6) {
        return Err(Error::Spectral(format!(
            "lowest eigenvalue not simple: gap {:.3e}",
            lambda1 - lambda0
        )));
    }
    let delta = 1e-9 * (1.0 + lambda0.abs()).min(0.25 * (lambda1 - lambda0));
    let sigma = lambda0 - delta;
    let mut y = vec![1.0; a.len()];
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=10_000 {
        let mut z = a.solve_shifted(sigma, &y)?;
        let nrm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::Spectral("inverse iteration lost the iterate".into()));
        }
        z.iter_mut().for_each(|v| *v /= nrm);
        let diff = z.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0f64, f64::max);
        y = z;
        iterations = it;
        if diff < 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Spectral("inverse iteration did not converge in 10^4 steps".into()));
    }
    let (fa, fb) = op.free;
    let mut f = vec![0.0; op.m()];
    for i in fa..fb {
        f[i] = y[i - fa] / op.mass[i - fa].sqrt();
    }
    if f.iter().sum::<f64>() < 0.0 {
        f.iter_mut().for_each(|v| *v = -*v);
    }
    let d = CurveDiff::new(&op.curve);
    let c2 = c_proxies(&d, &f).2;
    f.iter_mut().for_each(|v| *v /= c2);
    let rayleigh = op.rayleigh_quotient(&f);
    Ok(SpectralResult {
        lambda0,
        lambda1,
        f,
        c2_normalization: c2,
        rayleigh,
        r_trunc: op.r_trunc,
        m: op.m(),
        iterations,
    })
}

pub fn verdict_from(lambda0: f64) -> Result<Verdict> {
    if lambda0 < -VERDICT_BAND {
        Ok(Verdict::StrictlyUnstable)
    } else if lambda0 > VERDICT_BAND {
        Ok(Verdict::Stable)
    } else {
        Err(Error::Inconclusive { lambda0 })
    }
}

pub fn stability_verdict(result: &SpectralResult) -> Result<Verdict> {
    verdict_from(result.lambda0)
}

#[cfg(test)]
mod tests;

//! Expander mean curvature flow of normal graphs over a fixed self-expander.
//!
//! The graph of v over the base profile is P = x + v N. Each step evaluates
//! the exact expander residual of P and converts it into the normal-gauge
//! speed F(v) = -R_P / (N . n_P). Time stepping is semi-implicit: the
//! linearisation J of the discrete speed at v = 0 (a banded matrix) is taken
//! implicitly, the remainder F(v) - F(0) - J v explicitly. Subtracting F(0)
//! makes the base an exact fixed point of the scheme.

mod monitors;

pub use monitors::{
    check_monotone, fit_growth_rate, linear_fit, monitor_reverse_poincare, MonotoneViolation, ReversePoincare,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expanders::ExpanderProfile;
use crate::geometry::{
    c_proxies, relative_expander_entropy_with, residual_from_derivatives, weighted_norms, CurveDiff, ProfileCurve,
};
use crate::linalg::Banded;
use crate::spectral::{assemble_stability_operator, StabilityOperator};

/// Default gauge bound on the C2 proxy of v.
pub const DEFAULT_ETA: f64 = 0.1;

/// A base expander discretised for graphical flows, together with the
/// stability operator on the same grid.
#[derive(Debug, Clone)]
pub struct FlowBase {
    pub op: StabilityOperator,
    pub diff: CurveDiff,
    normals: Vec<[f64; 2]>,
    r: Vec<f64>,
    z: Vec<f64>,
    speed0: Vec<f64>,
    jac: Banded,
}

impl FlowBase {
    pub fn new(e: &ExpanderProfile, r_trunc: f64, m: usize) -> Result<Self> {
        Self::from_operator(assemble_stability_operator(e, r_trunc, m)?)
    }

    pub fn from_operator(op: StabilityOperator) -> Result<Self> {
        let diff = CurveDiff::new(&op.curve);
        let normals = op.theta.iter().map(|t| [-t.sin(), t.cos()]).collect();
        let r = op.curve.r();
        let z = op.curve.z();
        let m = r.len();
        let mut base = Self { op, diff, normals, r, z, speed0: vec![0.0; m], jac: Banded::zeros(m, 2, 2) };
        base.speed0 = base.raw_speed(&vec![0.0; m])?;
        base.jac = base.linearisation()?;
        Ok(base)
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    pub fn curve(&self) -> &ProfileCurve {
        &self.op.curve
    }

    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }

    pub fn is_free(&self, i: usize) -> bool {
        (self.op.free.0..self.op.free.1).contains(&i)
    }

    pub fn r_trunc(&self) -> f64 {
        self.op.r_trunc
    }

    /// Samples of the pushed-forward curve x + v N.
    pub fn pushed(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pr = (0..self.m()).map(|i| self.r[i] + v[i] * self.normals[i][0]).collect();
        let pz = (0..self.m()).map(|i| self.z[i] + v[i] * self.normals[i][1]).collect();
        (pr, pz)
    }

    pub fn pushed_curve(&self, v: &[f64]) -> Result<ProfileCurve> {
        let (pr, pz) = self.pushed(v);
        let pts = pr.iter().zip(&pz).map(|(&a, &b)| [a.max(0.0), b]).collect();
        self.op.curve.with_points(pts)
    }

    /// Expander residual of the pushed curve with respect to its own normal
    /// (the base normal rotated along with the parametrisation).
    pub fn pushed_residual(&self, v: &[f64]) -> Vec<f64> {
        let (pr, pz) = self.pushed(v);
        let n = self.op.curve.n();
        (0..self.m())
            .map(|i| {
                let (r1, r2) = self.diff.at(i, &pr, true);
                let (z1, z2) = self.diff.at(i, &pz, false);
                residual_from_derivatives(n, pr[i], pz[i], [r1, z1], [r2, z2])
            })
            .collect()
    }

    /// Normal-gauge speed -R_P / (N . n_P), without the well-balancing shift.
    fn raw_speed(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (pr, pz) = self.pushed(v);
        let n = self.op.curve.n();
        let mut out = vec![0.0; self.m()];
        for i in 0..self.m() {
            let (r1, r2) = self.diff.at(i, &pr, true);
            let (z1, z2) = self.diff.at(i, &pz, false);
            let sp = r1.hypot(z1);
            let np = [-z1 / sp, r1 / sp];
            let cos = self.normals[i][0] * np[0] + self.normals[i][1] * np[1];
            if !(cos > 0.0) {
                return Err(Error::GraphBreakdown(format!("graph normal turned over at node {i}")));
            }
            let res = residual_from_derivatives(n, pr[i].max(0.0), pz[i], [r1, z1], [r2, z2]);
            out[i] = -res / cos;
        }
        Ok(out)
    }

    /// F(v) - F(0) on free nodes, zero on Dirichlet nodes.
    pub fn speed(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut s = self.raw_speed(v)?;
        for i in 0..self.m() {
            s[i] = if self.is_free(i) { s[i] - self.speed0[i] } else { 0.0 };
        }
        Ok(s)
    }

    /// Banded Jacobian of `speed` at v = 0 by coloured central differences.
    fn linearisation(&self) -> Result<Banded> {
        let m = self.m();
        let mut jac = Banded::zeros(m, 2, 2);
        let h = 1e-6;
        for color in 0..5 {
            let mut vp = vec![0.0; m];
            let mut vm = vec![0.0; m];
            for j in (color..m).step_by(5) {
                if self.is_free(j) {
                    vp[j] = h;
                    vm[j] = -h;
                }
            }
            let fp = self.raw_speed(&vp)?;
            let fm = self.raw_speed(&vm)?;
            for i in 0..m {
                if !self.is_free(i) {
                    continue;
                }
                let lo = i.saturating_sub(2);
                let hi = (i + 2).min(m - 1);
                for j in lo..=hi {
                    if j % 5 == color && self.is_free(j) {
                        jac.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
                    }
                }
            }
        }
        Ok(jac)
    }

    /// J v with the discrete linearisation.
    pub fn apply_jacobian(&self, v: &[f64]) -> Vec<f64> {
        self.jac.mul(v)
    }

    /// Largest stable step for the explicit remainder at the given C2 proxy.
    pub fn max_dt(&self, c2: f64) -> f64 {
        if c2 <= 0.0 {
            f64::INFINITY
        } else {
            0.5 * self.op.ds * self.op.ds / c2
        }
    }

    fn implicit_matrix(&self, dt: f64) -> Result<Banded> {
        let m = self.m();
        let mut a = Banded::zeros(m, 2, 2);
        for i in 0..m {
            if !self.is_free(i) {
                a.set(i, i, 1.0);
                continue;
            }
            for j in i.saturating_sub(2)..=(i + 2).min(m - 1) {
                let jv = self.jac.get(i, j);
                let id = if i == j { 1.0 } else { 0.0 };
                a.set(i, j, id - dt * jv);
            }
        }
        a.factor()?;
        Ok(a)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlowOptions {
    pub dt: f64,
    pub dt_min: f64,
    pub eta: f64,
    /// Bound on the C2 proxy of the initial graph; defaults to eta / 4.
    pub alpha0: Option<f64>,
    pub sample_dt: f64,
    pub kappa_cap: f64,
    /// Stop once w0 exceeds this value (after recording the crossing sample).
    pub stop_w0: Option<f64>,
    /// Keep every n-th sampled snapshot of v (diagnostics are kept for all).
    pub keep_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            dt_min: 1e-7,
            eta: DEFAULT_ETA,
            alpha0: None,
            sample_dt: 1e-2,
            kappa_cap: 1e3,
            stop_w0: None,
            keep_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub w0: f64,
    pub w1: f64,
    pub kappa: f64,
    pub c2_proxy: f64,
    pub e_rel: f64,
    pub min_v: f64,
    pub max_v: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphState {
    pub t: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphFlowTrajectory {
    pub times: Vec<f64>,
    pub diagnostics: Vec<Diagnostics>,
    /// Stored snapshots (times listed in `snapshot_times`).
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub eta: f64,
    pub r_trunc: f64,
    /// First time the gauge bound failed, if it did before t_end.
    pub breakdown: Option<f64>,
    pub final_state: GraphState,
}

impl GraphFlowTrajectory {
    pub fn w0(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.w0).collect()
    }
}

pub fn diagnostics(base: &FlowBase, t: f64, v: &[f64]) -> Result<Diagnostics> {
    let w = weighted_norms(base.curve(), v, base.r_trunc())?;
    let c2 = c_proxies(&base.diff, v).2;
    let e_rel = relative_expander_entropy_with(base.curve(), &base.diff, v, base.r_trunc())?;
    let kappa = if w.w0 > 0.0 { w.w1 / w.w0 } else { f64::NAN };
    Ok(Diagnostics {
        t,
        w0: w.w0,
        w1: w.w1,
        kappa,
        c2_proxy: c2,
        e_rel,
        min_v: v.iter().copied().fold(f64::INFINITY, f64::min),
        max_v: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Stepper holding the factorised implicit matrix for the current dt.
pub struct Stepper<'a> {
    base: &'a FlowBase,
    dt: f64,
    lu: Banded,
    pub eta: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(base: &'a FlowBase, dt: f64, eta: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::StepSize(format!("time step {dt} must be positive")));
        }
        Ok(Self { base, dt, lu: base.implicit_matrix(dt)?, eta })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Change the step; the factorisation is kept for changes below 1e-9
    /// relative.
    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if (dt - self.dt).abs() > 1e-9 * dt {
            self.lu = self.base.implicit_matrix(dt)?;
            self.dt = dt;
        }
        Ok(())
    }

    /// One semi-implicit step. Fails with a step-size error if dt exceeds the
    /// explicit bound at the current state, and with a gauge breakdown if the
    /// new state leaves the gauge.
    pub fn step(&self, state: &GraphState) -> Result<GraphState> {
        let base = self.base;
        let c2 = c_proxies(&base.diff, &state.v).2;
        if c2 > self.eta {
            return Err(Error::GaugeBreakdown { t: state.t, c2, eta: self.eta });
        }
        if self.dt > base.max_dt(c2) {
            return Err(Error::StepSize(format!(
                "dt = {:.3e} exceeds the stability bound {:.3e}",
                self.dt,
                base.max_dt(c2)
            )));
        }
        let f = base.speed(&state.v)?;
        let jv = base.apply_jacobian(&state.v);
        let rhs: Vec<f64> = (0..base.m())
            .map(|i| if base.is_free(i) { state.v[i] + self.dt * (f[i] - jv[i]) } else { 0.0 })
            .collect();
        let v = self.lu.solve(&rhs);
        let t = state.t + self.dt;
        let c2n = c_proxies(&base.diff, &v).2;
        if !(c2n <= self.eta) {
            return Err(Error::GaugeBreakdown { t, c2: c2n, eta: self.eta });
        }
        Ok(GraphState { t, v })
    }
}

/// Single step with a fresh factorisation; see [`Stepper::step`].
pub fn flow_step(base: &FlowBase, state: &GraphState, dt: f64, eta: f64) -> Result<GraphState> {
    Stepper::new(base, dt, eta)?.step(state)
}

/// Integrate from v0 to t_end or until the gauge breaks, sampling
/// diagnostics every `sample_dt`.
pub fn run_flow(base: &FlowBase, v0: &[f64], t_end: f64, opts: &FlowOptions) -> Result<GraphFlowTrajectory> {
    if v0.len() != base.m() {
        return Err(Error::Domain("initial graph has the wrong number of samples".into()));
    }
    let alpha0 = opts.alpha0.unwrap_or(opts.eta / 4.0);
    let c2 = c_proxies(&base.diff, v0).2;
    if c2 > alpha0 {
        return Err(Error::Precondition(format!(
            "initial C2 proxy {c2:.3e} exceeds alpha0 = {alpha0:.3e}"
        )));
    }
    let mut v: Vec<f64> = v0.to_vec();
    for (i, x) in v.iter_mut().enumerate() {
        if !base.is_free(i) {
            *x = 0.0;
        }
    }
    let mut state = GraphState { t: 0.0, v };
    let mut traj = GraphFlowTrajectory {
        times: vec![],
        diagnostics: vec![],
        snapshot_times: vec![],
        snapshots: vec![],
        eta: opts.eta,
        r_trunc: base.r_trunc(),
        breakdown: None,
        final_state: state.clone(),
    };
    let keep = opts.keep_every.max(1);
    let record = |traj: &mut GraphFlowTrajectory, st: &GraphState| -> Result<bool> {
        let d = diagnostics(base, st.t, &st.v)?;
        if traj.times.len() % keep == 0 {
            traj.snapshot_times.push(st.t);
            traj.snapshots.push(st.v.clone());
        }
        traj.times.push(st.t);
        traj.diagnostics.push(d);
        Ok(opts.stop_w0.map_or(true, |w| d.w0 < w))
    };
    if !record(&mut traj, &state)? {
        traj.final_state = state;
        return Ok(traj);
    }
    let mut stepper = Stepper::new(base, opts.dt, opts.eta)?;
    let mut next_sample = opts.sample_dt;
    let tol = 1e-12 * (1.0 + t_end);
    'outer: while state.t < t_end - tol {
        // Step until the next sample time, landing on it exactly.
        let target = next_sample.min(t_end);
        while state.t < target - tol {
            let c2 = c_proxies(&base.diff, &state.v).2;
            let mut dt = opts.dt;
            while dt > base.max_dt(c2) {
                dt *= 0.5;
            }
            // Equal steps up to the sample time.
            let remaining = target - state.t;
            let k = (remaining / dt - 1e-9).ceil().max(1.0);
            dt = remaining / k;
            if dt < opts.dt_min {
                return Err(Error::StepSize(format!("step fell below dt_min at t = {}", state.t)));
            }
            stepper.set_dt(dt)?;
            match stepper.step(&state) {
                Ok(s) => {
                    state = s;
                    if (state.t - target).abs() <= tol {
                        state.t = target;
                    }
                }
                Err(Error::GaugeBreakdown { t, .. }) => {
                    traj.breakdown = Some(t);
                    break 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        if !record(&mut traj, &state)? {
            break;
        }
        next_sample += opts.sample_dt;
    }
    if traj.snapshot_times.last() != Some(&state.t) && traj.times.last() == Some(&state.t) {
        traj.snapshot_times.push(state.t);
        traj.snapshots.push(state.v.clone());
    }
    traj.final_state = state;
    Ok(traj)
}

#[cfg(test)]
mod tests;

use super::*;
use crate::expanders::{solve_expander, SolveOptions};
use crate::geometry::{Cone, Nappes};
use crate::spectral::lowest_eigenpair;

fn neck_base(m: usize) -> (FlowBase, Vec<f64>, f64) {
    let cone = Cone::new(0.35, Nappes::DoubleSymmetric).unwrap();
    let sols = solve_expander(2, &cone, &SolveOptions::default()).unwrap();
    let base = FlowBase::new(&sols[1], 8.0, m).unwrap();
    let sp = lowest_eigenpair(&base.op).unwrap();
    (base, sp.f, sp.lambda0)
}

fn plane_base(m: usize) -> (FlowBase, Vec<f64>, f64) {
    let cone = Cone::new(0.0, Nappes::Single).unwrap();
    let sols = solve_expander(2, &cone, &SolveOptions::default()).unwrap();
    let base = FlowBase::new(&sols[0], 8.0, m).unwrap();
    let sp = lowest_eigenpair(&base.op).unwrap();
    (base, sp.f, sp.lambda0)
}

fn scaled(f: &[f64], eps: f64) -> Vec<f64> {
    f.iter().map(|x| eps * x).collect()
}

#[test]
fn zero_graph_is_a_fixed_point() {
    let (base, _, _) = neck_base(1000);
    let traj = run_flow(&base, &vec![0.0; base.m()], 1.0, &FlowOptions::default()).unwrap();
    assert!(traj.diagnostics.iter().all(|d| d.w0 <= 1e-8));
    assert!(traj.breakdown.is_none());
    assert!((traj.final_state.t - 1.0).abs() < 1e-12);
}

#[test]
fn first_step_is_monotone_on_unstable_base() {
    let (base, f, _) = neck_base(1000);
    let v0 = scaled(&f, 1e-3);
    let s1 = flow_step(&base, &GraphState { t: 0.0, v: v0.clone() }, 1e-3, DEFAULT_ETA).unwrap();
    // Far-field values sit at round-off level, hence the absolute tolerance.
    for i in 0..base.m() {
        assert!(s1.v[i] >= v0[i] - 1e-14, "node {i}");
    }
    let inner = (0..base.m()).filter(|&i| v0[i] > 1e-8).count();
    assert!((0..base.m()).filter(|&i| v0[i] > 1e-8 && s1.v[i] > v0[i]).count() == inner);
}

#[test]
fn difference_quotient_tends_to_jacobi_operator() {
    let (base, _, _) = neck_base(1000);
    let m = base.m();
    // smooth bump vanishing at the ends
    let s: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let phi: Vec<f64> = s.iter().map(|x| (std::f64::consts::PI * x).sin().powi(4)).collect();
    let lphi = base.op.apply_l(&phi);
    let (eps, dt) = (1e-4, 1e-5);
    let v0 = scaled(&phi, eps);
    let c2 = c_proxies(&base.diff, &v0).2;
    let s1 = flow_step(&base, &GraphState { t: 0.0, v: v0.clone() }, dt, 10.0 * c2).unwrap();
    let dq: Vec<f64> = (0..m).map(|i| (s1.v[i] - v0[i]) / (eps * dt)).collect();
    let err: Vec<f64> = (0..m).map(|i| dq[i] - lphi[i]).collect();
    let e = weighted_norms(base.curve(), &err, base.r_trunc()).unwrap().w0;
    let l = weighted_norms(base.curve(), &lphi, base.r_trunc()).unwrap().w0;
    assert!(e <= 1e-2 * l, "relative error {}", e / l);
}

#[test]
fn growth_rate_matches_lambda0() {
    let (base, f, lambda0) = neck_base(2000);
    let traj = run_flow(&base, &scaled(&f, 1e-6), 1.5, &FlowOptions::default()).unwrap();
    let slope = fit_growth_rate(&traj, 0.5, 1.5).unwrap();
    assert!((slope + lambda0).abs() <= 0.05 * lambda0.abs(), "{slope} vs {}", -lambda0);
    let v = check_monotone(&traj.snapshot_times, &traj.snapshots, 1e-8);
    assert!(v.is_empty(), "{} violations", v.len());
    let rp = monitor_reverse_poincare(&traj, 1e3).unwrap();
    assert!(!rp.flagged);
}

#[test]
fn stable_base_decays() {
    let (base, f, lambda0) = plane_base(1000);
    assert!(lambda0 > 0.0);
    let traj = run_flow(&base, &scaled(&f, 1e-3), 1.0, &FlowOptions::default()).unwrap();
    let w0 = traj.w0();
    for k in 1..w0.len() {
        assert!(w0[k] < w0[k - 1]);
    }
    let slope = fit_growth_rate(&traj, 0.2, 1.0).unwrap();
    assert!((slope + lambda0).abs() < 0.05 * lambda0);
}

#[test]
fn comparison_principle() {
    let (base, f, _) = neck_base(1000);
    let lo = scaled(&f, 1e-3);
    let hi: Vec<f64> = f.iter().enumerate().map(|(i, x)| 2e-3 * x + 1e-4 * x * (i as f64 * 0.01).cos().abs()).collect();
    let opts = FlowOptions { sample_dt: 0.05, ..Default::default() };
    let a = run_flow(&base, &lo, 0.5, &opts).unwrap();
    let b = run_flow(&base, &hi, 0.5, &opts).unwrap();
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        for i in 0..base.m() {
            assert!(sa[i] <= sb[i] + 1e-10);
        }
    }
}

#[test]
fn nonlinearity_is_quadratic() {
    // Remainder of one step against the discrete linearisation.
    let (base, f, _) = neck_base(1000);
    let dt = 1e-6;
    let mut pts = Vec::new();
    for eps in [1e-2, 3e-3, 1e-3, 3e-4] {
        let v0 = scaled(&f, eps);
        let s1 = flow_step(&base, &GraphState { t: 0.0, v: v0.clone() }, dt, 1.0).unwrap();
        let jv = base.apply_jacobian(&v0);
        let res: Vec<f64> = (0..base.m()).map(|i| (s1.v[i] - v0[i]) / dt - jv[i]).collect();
        // the implicit solve adds dt J^2 v0, linear in eps; remove it
        let j2 = base.apply_jacobian(&jv);
        let res: Vec<f64> = res.iter().zip(&j2).map(|(r, q)| r - dt * q).collect();
        let w = weighted_norms(base.curve(), &res, base.r_trunc()).unwrap().w0;
        pts.push((eps.ln(), w.ln()));
    }
    let (p, _) = linear_fit(&pts).unwrap();
    assert!(p >= 1.9, "exponent {p}");
}

#[test]
fn large_data_breaks_the_gauge() {
    let (base, f, _) = neck_base(1000);
    let traj = run_flow(&base, &scaled(&f, 0.02), 3.0, &FlowOptions::default()).unwrap();
    let tb = traj.breakdown.expect("gauge should break");
    assert!(tb < 3.0);
    assert!(traj.diagnostics.iter().all(|d| d.c2_proxy <= DEFAULT_ETA));
}

#[test]
fn initial_data_must_respect_alpha0() {
    let (base, f, _) = neck_base(400);
    assert!(matches!(
        run_flow(&base, &scaled(&f, 0.05), 1.0, &FlowOptions::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn pure_mode_has_constant_ratio() {
    let (base, f, _) = neck_base(600);
    let mut traj = run_flow(&base, &scaled(&f, 1e-4), 0.02, &FlowOptions::default()).unwrap();
    traj.diagnostics.clear();
    for (k, c) in [1e-4, 3e-4, 1e-3].iter().enumerate() {
        traj.diagnostics.push(diagnostics(&base, k as f64, &scaled(&f, *c)).unwrap());
    }
    let k: Vec<f64> = traj.diagnostics.iter().map(|d| d.kappa).collect();
    assert!((k[0] - k[2]).abs() <= 1e-6 * k[0]);
    // high-frequency data has a huge ratio
    let hf: Vec<f64> = (0..base.m()).map(|i| if base.is_free(i) { 1e-6 * (i as f64 * 1.3).sin() } else { 0.0 }).collect();
    traj.diagnostics = vec![diagnostics(&base, 0.0, &hf).unwrap()];
    assert!(monitor_reverse_poincare(&traj, 20.0).unwrap().flagged);
    traj.diagnostics[0].w0 = 0.0;
    assert!(matches!(monitor_reverse_poincare(&traj, 20.0), Err(Error::DegenerateRatio { .. })));
}

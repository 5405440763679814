use std::sync::OnceLock;

use super::*;
use crate::expanders::{order_expanders, solve_expander, SolveOptions};
use crate::geometry::{c2_proxy, relative_expander_entropy, Cone};
use crate::levelset::EventKind;

fn branches() -> &'static Vec<ExpanderProfile> {
    static B: OnceLock<Vec<ExpanderProfile>> = OnceLock::new();
    B.get_or_init(|| {
        let cone = Cone::new(0.35, Nappes::DoubleSymmetric).unwrap();
        order_expanders(solve_expander(2, &cone, &SolveOptions::default()).unwrap(), 4.0).0
    })
}

fn unstable() -> &'static (FlowBase, SpectralResult) {
    static U: OnceLock<(FlowBase, SpectralResult)> = OnceLock::new();
    U.get_or_init(|| {
        let e = branches().iter().find(|e| e.family == Family::Neck && e.shooting_parameter < 1.0).unwrap();
        let base = FlowBase::new(e, 8.0, 800).unwrap();
        let sp = lowest_eigenpair(&base.op).unwrap();
        (base, sp)
    })
}

#[test]
fn calibration_of_exponential_is_exact() {
    let (eps, c, omega0) = (1e-3, 2.5, 0.07);
    let times: Vec<f64> = (0..400).map(|k| k as f64 * 0.01).collect();
    let w0: Vec<f64> = times.iter().map(|t| eps * (c * t).exp()).collect();
    let t0 = calibrate_time_translation(&times, &w0, omega0).unwrap();
    assert!((t0 - (omega0 / eps).ln() / c).abs() < 1e-12, "{t0}");
}

#[test]
fn calibration_reports_max_w0() {
    let times = [0.0, 1.0, 2.0];
    match calibrate_time_translation(&times, &[0.1, 0.2, 0.15], 0.5) {
        Err(Error::Calibration { omega0, max_w0 }) => {
            assert_eq!(omega0, 0.5);
            assert_eq!(max_w0, 0.2);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(matches!(calibrate_time_translation(&times, &[0.6, 0.7, 0.8], 0.5), Err(Error::Precondition(_))));
}

#[test]
fn interpolation_reproduces_quintics() {
    let times: Vec<f64> = (0..7).map(|k| 0.3 * k as f64).collect();
    let f = |t: f64| vec![t.powi(5) - 2.0 * t + 1.0, 4.0 - t * t];
    let snaps: Vec<Vec<f64>> = times.iter().map(|&t| f(t)).collect();
    for t in [0.0, 0.1, 0.77, 1.35, 1.8] {
        let v = interpolate_snapshot(&times, &snaps, t).unwrap();
        let e = f(t);
        assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
    }
    assert!(interpolate_snapshot(&times, &snaps, 2.0).is_none());
}

#[test]
fn zero_perturbation_is_zero() {
    let (_, sp) = unstable();
    assert!(perturb(sp, 0.0, Side::Normal).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn perturbation_has_prescribed_c2_size() {
    let (base, sp) = unstable();
    for (eps, side) in [(1e-2, Side::Normal), (3e-4, Side::Opposite)] {
        let v = perturb(sp, eps, side).unwrap();
        assert!((c2_proxy(base.curve(), &v) / eps - 1.0).abs() < 1e-12);
    }
    let v = perturb(sp, 1e-3, Side::Opposite).unwrap();
    assert!(v.iter().all(|&x| x <= 0.0));
}

#[test]
fn perturbation_lowers_the_energy() {
    let (base, sp) = unstable();
    let v = perturb(sp, 1e-2, Side::Normal).unwrap();
    assert!(relative_expander_entropy(base.curve(), &v, 8.0).unwrap() < 0.0);
}

#[test]
fn stable_base_is_rejected() {
    let disk = branches().iter().find(|e| e.family == Family::Disk).unwrap();
    let base = FlowBase::new(disk, 8.0, 400).unwrap();
    let sp = lowest_eigenpair(&base.op).unwrap();
    assert!(matches!(perturb(&sp, 1e-3, Side::Normal), Err(Error::WrongBranch(_))));
}

#[test]
fn ancient_limit_checks_its_eps_list() {
    let (base, sp) = unstable();
    let o = AncientOptions::default();
    assert!(matches!(ancient_limit(base, sp, &[1e-3, 1e-4], 1e-3, Side::Normal, &o), Err(Error::Precondition(_))));
    assert!(matches!(
        ancient_limit(base, sp, &[1e-3, 1e-4, 1e-4], 1e-3, Side::Normal, &o),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn ancient_samples_hit_omega0_at_zero() {
    let (base, sp) = unstable();
    let wf = weighted_norm(base.curve(), &sp.f, 0, 8.0).unwrap();
    let omega0 = 0.03 * wf;
    let fam = ancient_limit(base, sp, &[1e-3, 1e-4, 1e-5], omega0, Side::Normal, &AncientOptions::default()).unwrap();
    for row in &fam.w0 {
        assert!((row.last().unwrap() / omega0 - 1.0).abs() < 1e-3);
        assert!(row.windows(2).all(|w| w[1] > w[0]));
    }
    let t0 = fam.t0();
    assert!(t0.windows(2).all(|w| w[1] > w[0]));
    // one decade of eps costs ln(10)/|lambda0| of flow time
    let expect = 10f64.ln() / sp.lambda0.abs();
    for w in t0.windows(2) {
        assert!(((w[1] - w[0]) / expect - 1.0).abs() < 0.05, "{t0:?}");
    }
    assert!(fam.warnings.is_empty(), "{:?} {:?}", fam.warnings, fam.cauchy);
}

#[test]
fn cone_deviation_of_cone_vanishes() {
    let pts: Vec<[f64; 2]> = (0..400).flat_map(|k| {
        let r = 0.02 * k as f64;
        [[r, 0.4 * r], [r, -0.4 * r]]
    }).collect();
    assert!(cone_deviation(&pts, 0.4, 2.0, 7.0, 0.1).unwrap() < 1e-12);
    // parallel shift by d along the cone normal: |u|/rho is largest at the inner end
    let d = 0.05;
    let th = 0.4f64.atan();
    let shifted: Vec<[f64; 2]> = pts.iter().filter(|p| p[1] >= 0.0).map(|p| [p[0] - d * th.sin(), p[1] + d * th.cos()]).collect();
    let dev = cone_deviation(&shifted, 0.4, 2.0, 7.0, 0.1).unwrap();
    assert!(dev > d / 2.1 && dev < d / 2.0, "{dev}");
    assert!(cone_deviation(&pts[..4], 0.4, 2.0, 7.0, 0.1).is_none());
}

#[test]
fn ball_containment() {
    let g = Grid::new(1.0 / 32.0, 2.0, 2.0).unwrap();
    let f = init_from_domain(&Shape::ball(0.0, 1.0), g, 2).unwrap();
    assert!(ball_contained(&f, 0.2, 0.5));
    assert!(!ball_contained(&f, 0.8, 0.5));
}

#[test]
fn static_disk_pair_matches_itself() {
    let list = branches();
    let k = list.iter().position(|e| e.family == Family::Disk).unwrap();
    let g = Grid::new(1.0 / 32.0, 3.0, 3.0).unwrap();
    let f = init_from_domain(&expander_domain(&list[k], Side::Normal), g, 2).unwrap();
    let m = match_branch(&f, list, &ForwardOptions::default()).unwrap();
    assert_eq!(m.index, k);
    assert!(m.distance < g.h);
    // the same expander listed twice cannot be told apart
    let twice = vec![list[k].clone(), list[k].clone()];
    assert!(matches!(match_branch(&f, &twice, &ForwardOptions::default()), Err(Error::UnresolvedLimit(_))));
    // a sphere is far from everything
    let ball = init_from_domain(&Shape::ball(0.0, 1.5), g, 2).unwrap();
    assert!(matches!(match_branch(&ball, list, &ForwardOptions::default()), Err(Error::UnresolvedLimit(_))));
}

#[test]
fn degenerate_static_record_is_monotone_not_strict() {
    let list = branches();
    let disk = list.iter().find(|e| e.family == Family::Disk).unwrap();
    let g = Grid::new(1.0 / 32.0, 3.0, 3.0).unwrap();
    let f = init_from_domain(&expander_domain(disk, Side::Normal), g, 2).unwrap();
    let opts = EvolveOptions { sample_dt: 0.05, ..EvolveOptions::default() };
    let evo = evolve(&f, 0.1, &opts).unwrap();
    assert!(!evo.events.iter().any(|e| e.kind == EventKind::Pinch));
    let zero = vec![0.0; 10];
    let record = MorseLineRecord {
        n: 2,
        aperture: 0.35,
        sigma_minus: disk.clone(),
        lambda0_minus: 1.5,
        side: Side::Normal,
        ancient: AncientFamily {
            omega0: 0.0,
            lookback: 0.1,
            s: vec![-0.1, 0.0],
            runs: vec![],
            samples: vec![vec![zero.clone(), zero]],
            w0: vec![vec![0.0, 0.0]],
            cauchy: vec![],
            warnings: vec![],
        },
        early_curve: Some(disk.base.clone()),
        handoff: None,
        forward: evo,
        sigma_plus: None,
        limit: None,
        lambda0_plus: None,
        witness: None,
        options: MorseOptions::default(),
        certification: Certification::default(),
    };
    let c = certify(&record, &CertifyOptions::default());
    assert!(c.get("monotone").unwrap().passed());
    assert_eq!(c.get("strictly_monotone").unwrap().status, ClauseStatus::Fail);
    for name in ["regular", "strongly_regular", "brakke_flow"] {
        assert_eq!(c.get(name).unwrap().status, ClauseStatus::NotEvaluated);
    }
}

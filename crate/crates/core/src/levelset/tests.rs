use super::*;
use crate::geometry::{CurveKind, ProfileCurve};

fn grid(h: f64, r: f64, z: f64) -> Grid {
    Grid::new(h, r, z).unwrap()
}

fn ball_extinction(n: usize) -> f64 {
    let n = n as f64;
    ((1.0 + 2.0 * n) / (2.0 * n)).ln()
}

fn quiet() -> EvolveOptions {
    EvolveOptions { keep_snapshots: false, ..Default::default() }
}

#[test]
fn ball_field_is_distance() {
    let g = grid(1.0 / 32.0, 2.0, 2.0);
    let f = init_from_domain(&Shape::ball(0.0, 1.0), g, 2).unwrap();
    for k in 0..g.len() {
        let [r, z] = g.point(k);
        let d = r.hypot(z) - 1.0;
        if d.abs() < 4.0 * g.h {
            assert!((f.phi[k] - d).abs() <= 2.0 * g.h);
        }
    }
}

#[test]
fn complement_flips_sign() {
    let g = grid(1.0 / 16.0, 2.0, 2.0);
    let a = init_from_domain(&Shape::ball(0.3, 0.8), g, 2).unwrap();
    let b = init_from_domain(&Shape::Complement(Box::new(Shape::ball(0.3, 0.8))), g, 2).unwrap();
    for k in 0..g.len() {
        assert_eq!(a.phi[k], -b.phi[k]);
    }
    assert_eq!(a.complement().phi, b.phi);
}

#[test]
fn ball_outside_grid_is_domain_error() {
    let g = grid(1.0 / 16.0, 1.0, 1.0);
    assert!(matches!(init_from_domain(&Shape::ball(0.5, 0.8), g, 2), Err(crate::Error::Domain(_))));
    assert!(matches!(Grid::new(-0.1, 1.0, 1.0), Err(crate::Error::Domain(_))));
}

#[test]
fn intersection_of_balls_matches_exact_boundary() {
    let h = 1.0 / 64.0;
    let g = grid(h, 1.5, 1.5);
    let (za, zb, rho) = (0.3, -0.3, 0.6);
    let shape = Shape::Intersection(vec![Shape::ball(za, rho), Shape::ball(zb, rho)]);
    let f = init_from_domain(&shape, g, 2).unwrap();
    let exact = |p: [f64; 2]| (p[0].hypot(p[1] - za) - rho).max(p[0].hypot(p[1] - zb) - rho);
    let pts = zero_points(&f);
    let to_exact = pts.iter().map(|&p| exact(p).abs()).fold(0.0, f64::max);
    // exact boundary: two arcs meeting at z = 0
    let mut truth = Vec::new();
    for k in 0..=400 {
        let a = std::f64::consts::PI * k as f64 / 400.0;
        for (zc, other) in [(za, zb), (zb, za)] {
            let p = [rho * a.sin(), zc + rho * a.cos()];
            if p[0].hypot(p[1] - other) <= rho {
                truth.push(p);
            }
        }
    }
    let back = directed_hausdorff(&truth, &pts, 4.0 * h);
    assert!(to_exact <= 2.0 * h, "{to_exact}");
    assert!(back <= 2.0 * h, "{back}");
}

#[test]
fn ball_extinction_close_to_radius_ode() {
    for n in [1usize, 2, 3] {
        let g = grid(1.0 / 32.0, 1.5, 1.5);
        let f = init_from_domain(&Shape::ball(0.0, 1.0), g, n).unwrap();
        let evo = evolve(&f, 1.0, &quiet()).unwrap();
        let t = evo.extinction_time().unwrap();
        let rel = (t / ball_extinction(n) - 1.0).abs();
        assert!(rel < 0.01, "n = {n}: t* = {t}, rel {rel}");
        assert_eq!(evo.events.last().unwrap().kind, EventKind::Extinction);
    }
}

#[test]
fn off_centre_ball_tracks_radius_ode() {
    // an off-centre ball stays round: its centre decays like e^{-t/2} and its
    // radius obeys the same law as the centred one
    let g = grid(1.0 / 32.0, 1.5, 2.0);
    let a = evolve(&init_from_domain(&Shape::ball(0.0, 0.6), g, 2).unwrap(), 1.0, &quiet()).unwrap();
    let b = evolve(&init_from_domain(&Shape::ball(0.8, 0.6), g, 2).unwrap(), 1.0, &quiet()).unwrap();
    let ta = a.extinction_time().unwrap();
    let tb = b.extinction_time().unwrap();
    let exact = (1.0f64 + 0.36 / 4.0).ln();
    assert!((ta / exact - 1.0).abs() < 0.01, "{ta} vs {exact}");
    assert!((tb / exact - 1.0).abs() < 0.01, "{tb} vs {exact}");
}

#[test]
fn half_space_is_static() {
    let h = 1.0 / 32.0;
    let g = grid(h, 1.5, 1.5);
    let f = init_from_domain(&Shape::HalfSpace { level: 0.0, below: true }, g, 2).unwrap();
    let evo = evolve(&f, 0.5, &EvolveOptions { sample_dt: 0.1, ..Default::default() }).unwrap();
    for s in &evo.snapshots {
        assert!(boundary_hausdorff(s, &evo.snapshots[0]) < 1e-9);
    }
    assert_eq!(monotone_violations(&evo.snapshots, 0), 0);
}

#[test]
fn arrival_time_matches_ball_oracle() {
    let h = 1.0 / 32.0;
    let g = grid(h, 1.5, 1.5);
    let f = init_from_domain(&Shape::ball(0.0, 1.0), g, 2).unwrap();
    let evo = evolve(&f, 1.0, &EvolveOptions { sample_dt: 0.05, ..Default::default() }).unwrap();
    let u = arrival_time(&evo).unwrap();
    for k in 0..g.len() {
        let [r, z] = g.point(k);
        let x2 = r * r + z * z;
        if x2 > 1.0 + 1e-12 {
            assert_eq!(u[k], 0.0);
        } else if (0.09..0.8).contains(&x2) {
            let exact = (5.0 / (x2 + 4.0)).ln();
            assert!((u[k] / exact - 1.0).abs() < 0.05, "{} vs {exact}", u[k]);
        }
    }
    let p = partition_check(&evo, &[0.05, 0.1]);
    assert_eq!(p.shared_cells, 0);
    assert_eq!(p.off_boundary_cells, 0);
    assert!(p.level_sizes.iter().all(|&s| s > 0));
    assert_eq!(monotone_violations(&evo.snapshots, 1), 0);
    assert_eq!(compactness_violations(&evo, 1), 0);
}

#[test]
fn containment_detects_growth() {
    let g = grid(1.0 / 32.0, 1.5, 1.5);
    let small = init_from_domain(&Shape::ball(0.0, 0.5), g, 2).unwrap();
    let big = init_from_domain(&Shape::ball(0.0, 0.8), g, 2).unwrap();
    assert_eq!(containment_violations(&big, &small, 1), 0);
    assert!(containment_violations(&small, &big, 1) > 0);
    assert!(monotone_violations(&[small, big], 1) > 0);
}

#[test]
fn neck_pinches_into_two_components() {
    let h = 1.0 / 48.0;
    let g = grid(h, 1.2, 1.5);
    let line = ProfileCurve::new(2, vec![[0.09, -2.0], [0.09, 2.0]], CurveKind::InfinityToInfinity).unwrap();
    let tube = Shape::Intersection(vec![
        Shape::Profile { curve: line, side: Side::Normal },
        Shape::HalfSpace { level: 0.7, below: true },
        Shape::HalfSpace { level: -0.7, below: false },
    ]);
    let shape = Shape::Union(vec![Shape::ball(0.7, 0.45), Shape::ball(-0.7, 0.45), tube]);
    let f = init_from_domain(&shape, g, 2).unwrap();
    assert_eq!(components(&f).0, 1);
    let evo = evolve(&f, 0.5, &EvolveOptions { component_every: 20, ..quiet() }).unwrap();
    let kinds: Vec<EventKind> = evo.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.first(), Some(&EventKind::Pinch), "{:?}", evo.events);
    assert_eq!(kinds.last(), Some(&EventKind::Extinction));
    assert_eq!(evo.events[0].after, 2);
}

#[test]
fn avoidance_between_two_balls() {
    let h = 1.0 / 32.0;
    let g = grid(h, 1.5, 2.0);
    let o = EvolveOptions { sample_dt: 0.02, ..Default::default() };
    let a = evolve(&init_from_domain(&Shape::ball(0.8, 0.5), g, 2).unwrap(), 0.3, &o).unwrap();
    let b = evolve(&init_from_domain(&Shape::ball(-0.8, 0.5), g, 2).unwrap(), 0.3, &o).unwrap();
    let rep = avoidance_test(&a, &b, 4.0).unwrap();
    assert!(rep.pass);
    assert!((rep.eta - 0.6).abs() < 2.0 * h);
    assert_eq!(rep.lambda, -0.5);
    assert!(rep.times.len() > 3);
    let c = evolve(&init_from_domain(&Shape::ball(0.3, 0.5), g, 2).unwrap(), 0.0, &o).unwrap();
    assert!(matches!(avoidance_test(&a, &c, 4.0), Err(crate::Error::Precondition(_))));
}

#[test]
fn barrier_constant_instance() {
    let c0 = barrier_constant(2, [0.0, 3.0], 0.1);
    assert!((c0 - 8.31).abs() < 1e-12, "{c0}");
}

#[test]
fn barrier_near_ball() {
    let h = 1.0 / 32.0;
    let g = grid(h, 1.5, 2.0);
    let f = init_from_domain(&Shape::ball(0.0, 1.0), g, 2).unwrap();
    let delta = 0.1;
    let p = [0.0, 1.0 + delta + 2.0 * h];
    let c0 = barrier_constant(2, p, delta);
    let c = c0 * 1.01;
    let o = EvolveOptions { sample_dt: delta * delta / c / 20.0, ..Default::default() };
    let evo = evolve(&f, delta * delta / c, &o).unwrap();
    let rep = barrier_test(&evo, p, delta, c).unwrap();
    assert!(rep.pass, "{:?}", rep.margin);
    assert!(rep.times.len() >= 20);
    assert!(matches!(barrier_test(&evo, p, delta, c0), Err(crate::Error::Precondition(_))));
    assert!(matches!(barrier_test(&evo, [0.0, 1.05], delta, c), Err(crate::Error::Precondition(_))));
}

#[test]
fn restart_reproduces_run() {
    let h = 1.0 / 32.0;
    let g = grid(h, 1.5, 1.5);
    let f = init_from_domain(&Shape::ball(0.0, 1.0), g, 2).unwrap();
    let o = EvolveOptions { sample_dt: 0.05, ..Default::default() };
    let evo = evolve(&f, 0.15, &o).unwrap();
    assert_eq!(restart_check(&evo, 0.05, 0.0, &o).unwrap(), 0.0);
    let d = restart_check(&evo, 0.05, 0.05, &o).unwrap();
    assert!(d <= 5.0 * h, "{d}");
}

#[test]
fn smoothing_two_balls() {
    let h = 1.0 / 32.0;
    let g = grid(h, 1.5, 4.0);
    let a = init_from_domain(&Shape::ball(2.0, 1.0), g, 2).unwrap();
    let b = init_from_domain(&Shape::ball(2.9, 1.0), g, 2).unwrap();
    let s = smooth_mean_convex(&a, &b, 0.01, &EvolveOptions::default()).unwrap();
    assert!(s.corner_cells > 0);
    assert!(s.max_alignment < 0.9);
    assert!(s.speed.min > 0.0, "{:?}", s.speed);
    assert_eq!(s.escaped_cells, 0);
    let same = smooth_mean_convex(&a, &a, 0.01, &EvolveOptions::default()).unwrap();
    assert_eq!(same.corner_cells, 0);
    assert!(same.field.inside_count() < a.inside_count());
    assert!(same.speed.min > 0.0);
}

#[test]
fn smoothing_converges_away_from_corner() {
    let h = 1.0 / 32.0;
    let g = grid(h, 1.5, 4.0);
    let a = init_from_domain(&Shape::ball(2.0, 1.0), g, 2).unwrap();
    let b = init_from_domain(&Shape::ball(2.9, 1.0), g, 2).unwrap();
    let meet = LevelSetField::new(g, a.phi.iter().zip(&b.phi).map(|(x, y)| x.max(*y)).collect(), 2, 0.0).unwrap();
    let far = |p: &[f64; 2]| (p[1] - 2.45).abs() > 0.3;
    let truth: Vec<[f64; 2]> = zero_points(&meet).into_iter().filter(far).collect();
    let mut last = f64::INFINITY;
    for eps in [0.02, 0.01, 0.005] {
        let s = smooth_mean_convex(&a, &b, eps, &EvolveOptions::default()).unwrap();
        let pts: Vec<[f64; 2]> = zero_points(&s.field).into_iter().filter(far).collect();
        let d = directed_hausdorff(&pts, &truth, 4.0 * h);
        assert!(d < last, "eps {eps}: {d} >= {last}");
        last = d;
    }
}

#[test]
fn tangential_intersection_is_rejected() {
    let g = grid(1.0 / 32.0, 1.5, 1.5);
    let a = init_from_domain(&Shape::ball(0.0, 0.5), g, 2).unwrap();
    let b = init_from_domain(&Shape::ball(0.2, 0.7), g, 2).unwrap();
    let r = smooth_mean_convex(&a, &b, 0.01, &EvolveOptions::default());
    assert!(matches!(r, Err(crate::Error::Transversality(_))), "{:?}", r.map(|s| (s.corner_cells, s.max_alignment)));
}

#[test]
fn unstable_step_is_rejected() {
    let g = grid(1.0 / 32.0, 1.5, 1.5);
    let f = init_from_domain(&Shape::ball(0.0, 1.0), g, 2).unwrap();
    let limit = stable_dt(&g, 2, 1.0);
    let o = EvolveOptions { dt: Some(2.0 * limit), ..Default::default() };
    assert!(matches!(evolve(&f, 0.1, &o), Err(crate::Error::StepSize(_))));
}

#[test]
fn field_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid(1.0 / 16.0, 1.0, 1.0);
    let mut f = init_from_domain(&Shape::ball(0.1, 0.5), g, 3).unwrap();
    f.t = 0.125;
    let p = dir.path().join("f.bin");
    write_field(&f, &p).unwrap();
    assert_eq!(read_field(&p).unwrap(), f);
    let lines = zero_polylines(&f);
    assert_eq!(lines.len(), 1);
    write_contours(&lines, &dir.path().join("c.csv")).unwrap();
    let ev = [Event { t: 0.5, kind: EventKind::Pinch, before: 1, after: 2 }];
    write_events(&ev, &dir.path().join("e.jsonl")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("e.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("\"pinch\""));
}

#[test]
fn polylines_chain_a_circle() {
    let g = grid(1.0 / 32.0, 1.5, 1.5);
    let f = init_from_domain(&Shape::ball(0.0, 1.0), g, 2).unwrap();
    let lines = zero_polylines(&f);
    assert_eq!(lines.len(), 1);
    let l = &lines[0];
    // a half circle from axis to axis
    assert!(l.first().unwrap()[0] < 1e-12 && l.last().unwrap()[0] < 1e-12);
    let len: f64 = l.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    assert!((len - std::f64::consts::PI).abs() < 0.01, "{len}");
}

use super::*;

fn double(a: f64) -> Cone {
    Cone::new(a, Nappes::DoubleSymmetric).unwrap()
}

#[test]
fn zero_height_is_the_plane() {
    let (shot, a) = shoot_profile(2, 0.0, 20.0).unwrap();
    assert_eq!(a, 0.0);
    assert!(shot.curve.points().iter().all(|p| p[1] == 0.0));
}

#[test]
fn small_height_gives_small_positive_aperture() {
    let (_, a) = shoot_profile(2, 0.1, 20.0).unwrap();
    assert!(a > 0.0 && a < 0.1, "{a}");
    let (_, a2) = shoot_profile(2, 0.05, 20.0).unwrap();
    assert!(a2 > 0.0 && a2 < a);
}

#[test]
fn taylor_start_curvature() {
    // theta' = h / (2n) on the axis.
    let y = [0.0, 0.6, 0.0];
    assert!((profile_curvature(3, &y) - 0.1).abs() < 1e-15);
}

#[test]
fn shooting_rejects_bad_arguments() {
    assert!(shoot_profile(1, 0.1, 20.0).is_err());
    assert!(shoot_profile(2, 0.1, 10.0).is_err());
}

#[test]
fn aperture_is_grid_stable() {
    let fine = ShootOptions { ds: 0.005, ..Default::default() };
    let a = shoot_disk(2, 0.4, &ShootOptions::default()).unwrap().aperture;
    let b = shoot_disk(2, 0.4, &fine).unwrap().aperture;
    assert!((a - b).abs() < 1e-6);
    let tight = ShootOptions {
        ode: Dopri5 { rtol: 1e-13, atol: 1e-15, ..Dopri5::default() },
        ..Default::default()
    };
    let c = shoot_disk(2, 0.4, &tight).unwrap().aperture;
    assert!((a - c).abs() < 1e-6);
}

#[test]
fn flat_cone_single_nappe_gives_the_plane() {
    let cone = Cone::new(0.0, Nappes::Single).unwrap();
    let sols = solve_expander(2, &cone, &SolveOptions::default()).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0].shooting_parameter, 0.0);
    assert_eq!(sols[0].residual_sup, 0.0);
}

#[test]
fn residual_of_shot_profiles_is_small() {
    for h in [0.3, 1.0] {
        let s = shoot_disk(2, h, &ShootOptions::default()).unwrap();
        let sup = crate::geometry::expander_residual(&s.curve).unwrap().iter().fold(0.0f64, |m, r| m.max(r.abs()));
        assert!(sup < 1e-6, "h={h}: {sup}");
    }
    let s = shoot_neck(2, 0.3, &ShootOptions::default()).unwrap();
    let sup = crate::geometry::expander_residual(&s.curve).unwrap().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    assert!(sup < 1e-6, "neck: {sup}");
}

#[test]
fn neck_profile_is_symmetric() {
    let s = shoot_neck(2, 1.0, &ShootOptions { r_max: 20.0, ..Default::default() }).unwrap();
    let p = s.curve.points();
    let m = p.len();
    for k in 0..m / 2 {
        assert_eq!(p[k][0], p[m - 1 - k][0]);
        assert_eq!(p[k][1], -p[m - 1 - k][1]);
    }
}

#[test]
fn double_cone_has_three_branches() {
    // Sweep oracle: the neck aperture peaks near 0.435, so 0.35 has two necks
    // plus the disk pair.
    let sols = solve_expander(2, &double(0.35), &SolveOptions::default()).unwrap();
    assert_eq!(sols.len(), 3);
    let want = [(Family::Disk, 0.616_760_482_1), (Family::Neck, 0.332_509_646_5), (Family::Neck, 1.668_708_330_4)];
    for (e, (fam, p)) in sols.iter().zip(want) {
        assert_eq!(e.family, fam);
        assert!((e.shooting_parameter - p).abs() < 1e-6, "{} vs {p}", e.shooting_parameter);
        assert!((e.achieved_aperture - 0.35).abs() <= 1e-8);
        assert!(e.residual_sup <= 1e-6, "{}", e.residual_sup);
    }
    let (ord, warnings) = order_expanders(sols, 4.0);
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(ord[0].family, Family::Neck);
    assert!(ord[0].shooting_parameter > 1.0);
    assert_eq!(ord[0].branch, BranchLabel::Innermost);
    assert_eq!(ord[2].family, Family::Disk);
    assert_eq!(ord[2].branch, BranchLabel::Outermost);
    assert_eq!(ord[1].branch, BranchLabel::Unclassified);
}

#[test]
fn sweep_sign_changes_match_roots() {
    let opts = SolveOptions::default();
    let cone = double(0.35);
    let sw = sweep(2, Family::Neck, &cone, opts.neck_window, &opts).unwrap();
    assert_eq!(sw.brackets().len(), 2);
}

#[test]
fn solving_is_deterministic() {
    let a = solve_expander(2, &double(0.3), &SolveOptions::default()).unwrap();
    let b = solve_expander(2, &double(0.3), &SolveOptions::default()).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.base, y.base);
        assert_eq!(x.shooting_parameter.to_bits(), y.shooting_parameter.to_bits());
    }
}

#[test]
fn single_profile_is_both_extremes() {
    let cone = Cone::new(0.0, Nappes::Single).unwrap();
    let sols = solve_expander(2, &cone, &SolveOptions::default()).unwrap();
    let (ord, _) = order_expanders(sols, 4.0);
    assert_eq!(ord[0].branch, BranchLabel::InnermostAndOutermost);
}

#[test]
fn resampled_neck_hits_truncation_sphere() {
    let s = resample(Family::Neck, 2, 1.0, 8.0, 401, &Dopri5::default()).unwrap();
    let p = s.curve.points();
    assert_eq!(p.len(), 401);
    for e in [p[0], p[400]] {
        assert!((e[0].hypot(e[1]) - 8.0).abs() < 1e-10);
    }
    assert!((p[200][0] - 1.0).abs() < 1e-15 && p[200][1] == 0.0);
}

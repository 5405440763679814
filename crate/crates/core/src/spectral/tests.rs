use super::*;
use crate::expanders::{solve_expander, ShootOptions, SolveOptions};
use crate::geometry::{Cone, Nappes};

fn plane() -> ExpanderProfile {
    let cone = Cone::new(0.0, Nappes::Single).unwrap();
    solve_expander(2, &cone, &SolveOptions::default()).unwrap().remove(0)
}

fn double_cone() -> Vec<ExpanderProfile> {
    let cone = Cone::new(0.35, Nappes::DoubleSymmetric).unwrap();
    solve_expander(2, &cone, &SolveOptions::default()).unwrap()
}

#[test]
fn plane_matches_oscillator_ground_state() {
    let op = assemble_stability_operator(&plane(), 8.0, 2000).unwrap();
    let res = lowest_eigenpair(&op).unwrap();
    assert!((res.lambda0 - 1.5).abs() < 0.015 * 1.5, "{}", res.lambda0);
    assert!((res.lambda0 - 1.5).abs() < 1e-4);
    assert_eq!(stability_verdict(&res).unwrap(), Verdict::Stable);
    // ground state e^{-r^2/4}, up to normalisation
    let r = op.curve.r();
    let scale = res.f[0];
    for i in (0..op.m() - 1).step_by(97) {
        let want = scale * (-r[i] * r[i] / 4.0).exp();
        assert!((res.f[i] - want).abs() < 1e-3 * scale, "node {i}");
    }
}

#[test]
fn operator_is_exactly_symmetric_and_matches_strong_form() {
    let op = assemble_stability_operator(&plane(), 8.0, 400).unwrap();
    // symmetric by construction: one off-diagonal array serves both sides
    assert_eq!(op.sym.e.len() + 1, op.sym.d.len());
    let f: Vec<f64> = op.curve.r().iter().map(|r| (1.0 + r).cos() * (-r * r / 8.0).exp()).collect();
    let mut fz = f.clone();
    *fz.last_mut().unwrap() = 0.0;
    let lf = op.apply_l(&fz);
    let direct = direct_stencil_rows(&op, &fz);
    let (a, b) = op.free;
    for i in a..b {
        let scale = direct[i - a].abs().max(1.0);
        assert!((lf[i] + direct[i - a]).abs() <= 1e-12 * scale, "row {i}");
    }
}

#[test]
fn constant_vector_row_sums() {
    let e = &double_cone()[0];
    let op = assemble_stability_operator(e, 6.0, 1000).unwrap();
    let (a, b) = op.free;
    let ones = vec![1.0; b - a];
    let total: f64 = op.stiffness.mul(&ones).iter().sum();
    // The only flux left is into the Dirichlet node.
    let boundary = op.w_mid[b - 1] / op.ds;
    let integrand: Vec<f64> = (0..op.m())
        .map(|i| {
            let p = op.curve.points()[i];
            (0.5 - op.a_sq[i]) * rotational_weight(2, p[0], p[1])
        })
        .collect();
    // Free dual cells end half a cell before the Dirichlet node.
    let m = op.m();
    let mut quad = 0.0;
    for i in 0..m - 2 {
        quad += 0.5 * (integrand[i] + integrand[i + 1]) * op.ds;
    }
    let mid = (0.5 - 0.5 * (op.a_sq[m - 2] + op.a_sq[m - 1])) * op.w_mid[m - 2];
    quad += 0.25 * (integrand[m - 2] + mid) * op.ds;
    let got = total - boundary;
    assert!((got - quad).abs() <= 2e-3 * quad.abs(), "{got} vs {quad}");
}

#[test]
fn double_cone_spectra_match_oracle() {
    // Independent lumped-mass discretisation extrapolated from m = 2000..8000.
    let sols = double_cone();
    let want = [1.524_363, -4.276_243, 0.726_803];
    for (e, w) in sols.iter().zip(want) {
        let op = assemble_stability_operator(e, 8.0, 2000).unwrap();
        let res = lowest_eigenpair(&op).unwrap();
        assert!((res.lambda0 - w).abs() < 2e-3 * w.abs().max(0.1), "{} vs {w}", res.lambda0);
        assert!((res.lambda0 - res.rayleigh).abs() <= 1e-8 * res.lambda0.abs().max(1.0));
        let interior = &res.f[op.free.0..op.free.1];
        assert!(interior.iter().all(|&v| v > 0.0));
    }
    let res = lowest_eigenpair(&assemble_stability_operator(&sols[1], 8.0, 2000).unwrap()).unwrap();
    assert!(res.lambda0 < -1e-3);
    assert_eq!(stability_verdict(&res).unwrap(), Verdict::StrictlyUnstable);
}

#[test]
fn grid_doubling_converges() {
    let e = &double_cone()[1];
    let a = lowest_eigenpair(&assemble_stability_operator(e, 8.0, 2000).unwrap()).unwrap();
    let b = lowest_eigenpair(&assemble_stability_operator(e, 8.0, 4000).unwrap()).unwrap();
    assert!((a.lambda0 - b.lambda0).abs() <= 1e-3, "{} {}", a.lambda0, b.lambda0);
    let c = lowest_eigenpair(&assemble_stability_operator(e, 8.0, 8000).unwrap()).unwrap();
    // second order: successive differences drop by about four
    let ratio = (a.lambda0 - b.lambda0) / (b.lambda0 - c.lambda0);
    assert!(ratio > 3.0 && ratio < 5.0, "{ratio}");
}

#[test]
fn truncation_sweep_is_stable() {
    let e = &double_cone()[1];
    let l: Vec<f64> = [6.0, 8.0, 10.0]
        .iter()
        .map(|&r| lowest_eigenpair(&assemble_stability_operator(e, r, 2000).unwrap()).unwrap().lambda0)
        .collect();
    assert!((l[0] - l[1]).abs() < 1e-2 && (l[1] - l[2]).abs() < 1e-2, "{l:?}");
}

#[test]
fn eigenfunction_has_unit_c2_proxy() {
    let e = &double_cone()[1];
    let op = assemble_stability_operator(e, 8.0, 1000).unwrap();
    let res = lowest_eigenpair(&op).unwrap();
    let c2 = crate::geometry::c2_proxy(&op.curve, &res.f);
    assert!((c2 - 1.0).abs() < 1e-12);
}

#[test]
fn potential_scaling_lowers_lambda0() {
    let e = &double_cone()[0];
    let l: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&c| lowest_eigenpair(&assemble_scaled(e, 8.0, 600, c).unwrap()).unwrap().lambda0)
        .collect();
    assert!(l[0] > l[1] && l[1] > l[2], "{l:?}");
}

#[test]
fn verdict_band() {
    assert!(matches!(verdict_from(0.0), Err(Error::Inconclusive { .. })));
    assert!(matches!(verdict_from(5e-7), Err(Error::Inconclusive { .. })));
    assert_eq!(verdict_from(-2e-6).unwrap(), Verdict::StrictlyUnstable);
}

#[test]
fn rejects_coarse_grids_and_rough_profiles() {
    let p = plane();
    assert!(assemble_stability_operator(&p, 8.0, 100).is_err());
    let mut rough = p.clone();
    rough.residual_sup = 1e-3;
    assert!(matches!(assemble_stability_operator(&rough, 8.0, 400), Err(Error::Precondition(_))));
    let _ = ShootOptions::default();
}

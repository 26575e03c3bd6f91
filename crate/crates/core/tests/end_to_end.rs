use core::f64::consts::{E, FRAC_PI_2, PI};

use impulsive_iss_core::construct::{construct_sfuj, construct_ufsj};
use impulsive_iss_core::lyapunov::{
    check_iss_estimates, dini_derivative, lyapunov_series, verify_definition2, verify_definition3,
};
use impulsive_iss_core::scenarios::{
    rotation2d_lyapunov, scenario_heat, scenario_rotation2d, scenario_scalar_sfuj, scenario_scalar_ufsj,
};
use impulsive_iss_core::transform::{build_iss_gains, build_transform, DEFAULT_QUAD_TOL};
use impulsive_iss_core::{ConditionId, DwellParams, HeatParams, InputSignal, Rate, VerifyOptions};

#[test]
fn heat_definition3_passes() {
    let sc = scenario_heat(201, HeatParams::default()).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let tr = sc.simulate().unwrap();
    let report = verify_definition3(&v, std::slice::from_ref(&tr), &VerifyOptions::default());
    for f in report.failures().take(5) {
        eprintln!("{f:?}");
    }
    assert!(report.passed);
    assert!(report.of(ConditionId::Def3Flow).count() > 100);
    assert_eq!(report.of(ConditionId::Def3Jump).count() + report.of(ConditionId::Def3BelowGate).count(), 4);

    let x_minus = tr.left_limit(0.5).unwrap();
    let x_plus = tr.state_at(0.5).unwrap();
    assert!(tr.system().norm(&x_minus) > tr.system().norm(&x_plus));
}

#[test]
fn heat_iss_estimate_with_certificate_gains() {
    let sc = scenario_heat(201, HeatParams::default()).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let bt = build_transform(Rate::from(&v.phi), DEFAULT_QUAD_TOL).unwrap().beta_tilde_kl();
    let gains = build_iss_gains(&v.alpha1, &v.alpha2, &v.alpha3, &v.chi, &bt).unwrap();
    let r = check_iss_estimates(&[sc.simulate().unwrap()], &gains, &VerifyOptions::default());
    assert!(r.passed, "{:?}", r.failures().next());
}

#[test]
fn heat_level_stays_below_gate_after_first_crossing() {
    let sc = scenario_heat(201, HeatParams::default()).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let tr = sc.simulate().unwrap();
    let gate = v.chi.apply(0.1);
    let cap = gate.max(v.alpha3.apply(0.1));
    let series = lyapunov_series(&v, &tr);
    let first_below = series.iter().position(|&(_, val, _)| val < gate).unwrap();
    assert!(series[first_below..].iter().all(|&(_, val, _)| val <= cap));
    assert!((series[0].1 - E * 1024.0 / 315.0).abs() < 0.005 * E * 1024.0 / 315.0);
}

#[test]
fn rotation_along_flow_identity_and_dini() {
    let sc = scenario_rotation2d(0.0, 2.0 * PI).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let tr = sc.simulate().unwrap();
    let piece = &tr.pieces()[0];
    let v0 = v.eval(0.0, piece.state(0));
    for (t, x) in piece.samples() {
        let expected = (-2.0 * t).exp() * v0;
        assert!((v.eval(t, x) - expected).abs() <= 1e-6 * expected, "t={t}");
    }
    for t in [0.1, 0.7, 1.3] {
        let d = dini_derivative(&v, &tr, t, 1e-4).unwrap();
        let vt = v.eval(t, &tr.state_at(t).unwrap());
        assert!((d + 2.0 * vt).abs() <= 1e-3 * 2.0 * vt, "t={t} d={d} v={vt}");
    }
}

#[test]
fn rotation_definition3_passes_and_sabotage_fails_every_segment() {
    let sc = scenario_rotation2d(0.0, 2.0 * PI).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let trs = sc.verification_trajectories().unwrap();
    let report = verify_definition3(&v, &trs, &VerifyOptions::default());
    assert!(report.passed, "{:?}", report.failures().next());

    let bad = rotation2d_lyapunov(sc.system.impulses().clone(), false);
    let report = verify_definition3(&bad, &trs, &VerifyOptions::default());
    assert!(!report.passed);
    for i in 0..4 {
        let (a, b) = (i as f64 * FRAC_PI_2, (i + 1) as f64 * FRAC_PI_2);
        assert!(report.failures().any(|c| c.t >= a && c.t < b), "segment {i} has no failure");
    }
}

#[test]
fn rotation_with_input_passes_iss_estimate() {
    let sc = scenario_rotation2d(0.1, 2.0 * PI).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let trs = sc.verification_trajectories().unwrap();
    assert!(verify_definition3(&v, &trs, &VerifyOptions::default()).passed);
    let bt = build_transform(Rate::from(&v.phi), DEFAULT_QUAD_TOL).unwrap().beta_tilde_kl();
    let gains = build_iss_gains(&v.alpha1, &v.alpha2, &v.alpha3, &v.chi, &bt).unwrap();
    let r = check_iss_estimates(&trs, &gains, &VerifyOptions::default());
    assert!(r.passed, "{:?}", r.failures().next());
}

#[test]
fn scalar_sfuj_candidate_and_construction() {
    let sc = scenario_scalar_sfuj().unwrap();
    let c = sc.candidate.clone().unwrap();
    let trs = sc.verification_trajectories().unwrap();
    assert!(verify_definition2(&c, &trs, &VerifyOptions::default()).passed);
    let wrong = c.clone().with_rho(Rate::linear(3.0));
    let r = verify_definition2(&wrong, &trs, &VerifyOptions::default());
    assert!(!r.passed);
    assert!(r.failures().all(|f| f.condition == ConditionId::Def2Flow));

    let hint = sc.construction.unwrap();
    let p = DwellParams::from_candidate(&c, hint.theta, hint.delta).unwrap();
    let built = construct_sfuj(&c, &p, sc.system.impulses(), None).unwrap();
    let r = verify_definition3(&built.lyapunov, &trs, &VerifyOptions::default());
    assert!(r.passed, "{:?}", r.failures().next());
}

#[test]
fn scalar_ufsj_construction_passes() {
    let sc = scenario_scalar_ufsj().unwrap();
    let c = sc.candidate.clone().unwrap();
    let trs = sc.verification_trajectories().unwrap();
    assert!(verify_definition2(&c, &trs, &VerifyOptions::default()).passed);
    let hint = sc.construction.unwrap();
    let p = DwellParams::from_candidate(&c, hint.theta, hint.delta).unwrap();
    let built = construct_ufsj(&c, &p, sc.system.impulses()).unwrap();
    let v = &built.lyapunov;
    let r = verify_definition3(v, &trs, &VerifyOptions::default());
    assert!(r.passed, "{:?}", r.failures().next());
    let bt = build_transform(Rate::from(&v.phi), DEFAULT_QUAD_TOL).unwrap().beta_tilde_kl();
    let gains = build_iss_gains(&v.alpha1, &v.alpha2, &v.alpha3, &v.chi, &bt).unwrap();
    assert!(check_iss_estimates(&trs, &gains, &VerifyOptions::default()).passed);
}

#[test]
fn zero_state_zero_input_is_an_equilibrium() {
    let sc = scenario_scalar_sfuj().unwrap().with_x0(vec![0.0]).unwrap().with_input(InputSignal::zero());
    let c = sc.candidate.clone().unwrap();
    let tr = sc.simulate().unwrap();
    assert!(tr.samples().all(|(_, x)| x[0] == 0.0));
    assert!(verify_definition2(&c, &[tr], &VerifyOptions::default()).passed);
}

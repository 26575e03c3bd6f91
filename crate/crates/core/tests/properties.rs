use impulsive_iss_core::construct::{check_dwell_sfuj, check_dwell_ufsj, default_kappa, Kappa};
use impulsive_iss_core::lyapunov::{verify_definition2, verify_definition3};
use impulsive_iss_core::scenarios::{scenario_heat, scenario_scalar_sfuj};
use impulsive_iss_core::system::{simulate, ImpulseSequence, ImpulsiveSystem};
use impulsive_iss_core::transform::{build_transform, DEFAULT_QUAD_TOL};
use impulsive_iss_core::{ClassTag, ComparisonFunction, DwellParams, HeatParams, InputSignal, Rate, VerifyOptions};
use proptest::prelude::*;

fn power_fn() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..10.0, 0.5f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_round_trip((c, p) in power_fn(), s in 1e-6f64..1e3) {
        let f = ComparisonFunction::power(c, p);
        let y = f.apply(s);
        let back = f.inverse_auto(y).unwrap();
        prop_assert!((f.apply(back) - y).abs() <= 1e-12 * y.max(1.0));
    }

    #[test]
    fn composition_is_associative((a, p) in power_fn(), (b, q) in power_fn(), k in 0.1f64..3.0, s in 0.0f64..100.0) {
        let f = ComparisonFunction::power(a, p);
        let g = ComparisonFunction::power(b, q);
        let h = ComparisonFunction::linear(k);
        let left = f.compose(&g).compose(&h).apply(s);
        let right = f.compose(&g.compose(&h)).apply(s);
        prop_assert!((left - right).abs() <= 1e-12 * left.abs().max(1e-300));
    }

    #[test]
    fn powers_are_class_k_infinity((c, p) in power_fn()) {
        let f = ComparisonFunction::power(c, p);
        let report = f.verify_class(ClassTag::KInfinity, &f.default_grid()).unwrap();
        prop_assert!(report.passed());
    }

    #[test]
    fn transform_is_increasing(q1 in 1e-6f64..1e6, q2 in 1e-6f64..1e6, a in 0.2f64..5.0, pw in 0.5f64..2.0) {
        let t = build_transform(Rate::new("a s^p", move |s: f64| a * s.powf(pw)), DEFAULT_QUAD_TOL).unwrap();
        let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
        prop_assume!(hi > lo * (1.0 + 1e-9));
        prop_assert!(t.value(lo) < t.value(hi));
    }

    #[test]
    fn transform_matches_quadrature_oracle(q in 1e-6f64..1e6) {
        let lin = build_transform(Rate::linear(1.0), DEFAULT_QUAD_TOL).unwrap();
        prop_assert!((lin.value(q) - q.ln()).abs() <= 1e-10 * q.ln().abs().max(1.0));
        let sq = build_transform(Rate::new("s^2", |s| s * s), DEFAULT_QUAD_TOL).unwrap();
        let want = 1.0 - 1.0 / q;
        prop_assert!((sq.value(q) - want).abs() <= 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn beta_tilde_decreases_in_time(v0 in 1e-3f64..1e3, t1 in 0.0f64..20.0, dt in 0.0f64..20.0, sqrt_rate in any::<bool>()) {
        let rate = if sqrt_rate { Rate::new("sqrt", f64::sqrt) } else { Rate::linear(1.5) };
        let t = build_transform(rate, DEFAULT_QUAD_TOL).unwrap();
        prop_assert!(t.beta_tilde(v0, t1 + dt) <= t.beta_tilde(v0, t1));
    }

    #[test]
    fn beta_tilde_increases_in_level(v1 in 1e-3f64..1e3, f in 1.001f64..10.0, tau in 0.0f64..10.0) {
        let t = build_transform(Rate::new("sqrt", f64::sqrt), DEFAULT_QUAD_TOL).unwrap();
        prop_assert!(t.beta_tilde(v1, tau) <= t.beta_tilde(v1 * f, tau));
    }

    #[test]
    fn kappa_inverse_round_trip(c in 0.01f64..2.0, s in 0.0f64..1e4) {
        let k = Kappa::new(c).unwrap();
        let back = k.inverse(k.eval(s));
        prop_assert!((back - s).abs() <= 1e-9 * s.max(1.0));
    }

    #[test]
    fn default_kappa_is_below_jump_inverse_and_identity(gain in 1.01f64..20.0) {
        let alpha = ComparisonFunction::linear(gain);
        let grid: Vec<f64> = (0..60).map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 59.0)).collect();
        let k = default_kappa(&alpha, &grid).unwrap();
        for &s in &grid {
            prop_assert!(k.eval(s) <= (s / gain).min(s) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rotation_trajectories_are_right_continuous(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let sys = impulsive_iss_core::scenarios::rotation2d_system();
        let tr = simulate(&sys, &[x, y], &InputSignal::zero(), 4.0, 1e-2).unwrap();
        for ll in tr.left_limits() {
            let post = tr.state_at(ll.t).unwrap();
            let jumped = sys.jump(ll.index, &ll.state, 0.0);
            prop_assert_eq!(post, jumped);
        }
    }
}

#[test]
fn dwell_is_scale_consistent() {
    let alpha = ComparisonFunction::linear(3.0);
    let base = DwellParams::new(Rate::linear(1.0), alpha.clone(), 2.0, 0.5).unwrap();
    let r0 = check_dwell_sfuj(&base).unwrap();
    for c in [0.5, 2.0, 10.0] {
        let p = DwellParams::new(Rate::linear(1.0).scaled(c), alpha.clone(), 2.0, 0.5).unwrap();
        let r = check_dwell_sfuj(&p).unwrap();
        for (&(_, a), &(_, b)) in r0.integrals.iter().zip(&r.integrals) {
            assert!((b - a / c).abs() <= 1e-10 * (a / c).abs().max(1.0), "c={c}");
        }
    }

    let shrink = ComparisonFunction::linear(0.25);
    let base = DwellParams::new(Rate::linear(-1.0), shrink.clone(), 2.0, 0.5).unwrap();
    let r0 = check_dwell_ufsj(&base).unwrap();
    for c in [0.5, 2.0, 10.0] {
        let p = DwellParams::new(Rate::linear(-c), shrink.clone(), 2.0, 0.5).unwrap();
        let r = check_dwell_ufsj(&p).unwrap();
        for (&(_, a), &(_, b)) in r0.integrals.iter().zip(&r.integrals) {
            assert!((b - a / c).abs() <= 1e-10 * (a / c).abs().max(1.0), "c={c}");
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let sc = scenario_heat(51, HeatParams::default()).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let a = verify_definition3(&v, &[sc.simulate().unwrap()], &VerifyOptions::default());
    let b = verify_definition3(&v, &[sc.simulate().unwrap()], &VerifyOptions::default());
    assert_eq!(a.checks.len(), b.checks.len());
    for (x, y) in a.checks.iter().zip(&b.checks) {
        assert_eq!((x.condition, x.t.to_bits(), x.margin.to_bits()), (y.condition, y.t.to_bits(), y.margin.to_bits()));
    }
}

#[test]
fn doubling_the_difference_step_keeps_passes() {
    let sc = scenario_scalar_sfuj().unwrap();
    let c = sc.candidate.clone().unwrap();
    let trs = sc.verification_trajectories().unwrap();
    for h in [1e-5, 1e-4, 2e-4] {
        let fine = verify_definition2(&c, &trs, &VerifyOptions::default().with_step(h));
        let coarse = verify_definition2(&c, &trs, &VerifyOptions::default().with_step(2.0 * h));
        assert!(!fine.passed || coarse.passed, "h={h}");
    }

    let sc = scenario_heat(51, HeatParams::default()).unwrap();
    let v = sc.lyapunov.clone().unwrap();
    let trs = vec![sc.simulate().unwrap()];
    let fine = verify_definition3(&v, &trs, &VerifyOptions::default().with_step(1e-4));
    let coarse = verify_definition3(&v, &trs, &VerifyOptions::default().with_step(2e-4));
    assert!(!fine.passed || coarse.passed);
}

#[test]
fn explicit_and_periodic_sequences_agree() {
    let times: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64).collect();
    let explicit = ImpulseSequence::explicit(0.0, times).unwrap();
    let periodic = ImpulseSequence::periodic(0.0, 0.5).unwrap();
    let flow = |_: f64, x: &[f64], _: f64, dx: &mut [f64]| dx[0] = -x[0];
    let jump = |_: usize, x: &[f64], u: f64, out: &mut [f64]| out[0] = 1.2 * x[0] + u;
    let a = ImpulsiveSystem::new("e", 1, explicit, flow, jump);
    let b = ImpulsiveSystem::new("p", 1, periodic, flow, jump);
    let u = InputSignal::constant(0.3);
    let ta = simulate(&a, &[1.0], &u, 3.9, 1e-3).unwrap();
    let tb = simulate(&b, &[1.0], &u, 3.9, 1e-3).unwrap();
    for (x, y) in ta.samples().zip(tb.samples()) {
        assert_eq!(x.0, y.0);
        assert_eq!(x.1, y.1);
    }
}

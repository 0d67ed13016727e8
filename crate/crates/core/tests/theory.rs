use kicked_rotors::classical::lyapunov_exponent;
use kicked_rotors::theory::{
    classify_regime, g_correlator, gamma_from_correlator, onset_time, predict_purity, Regime, SemiclassicalParams,
    CORRELATOR_T_MAX,
};
use kicked_rotors::torus::TorusGrid;

#[test]
fn correlator_at_zero_lag_is_half_eps_squared() {
    // Δ is close to uniform on the torus, so ⟨sin²Δ⟩ = 1/2 with variance 1/8
    let n = 40_000;
    for eps in [0.5, 2.0] {
        let g = gamma_from_correlator(5.09, 5.09, eps, 0.33, n, CORRELATOR_T_MAX, 3).unwrap();
        let se = eps * eps * (0.125 / n as f64).sqrt();
        assert!((g.correlator[0] - eps * eps / 2.0).abs() < 5.0 * se, "{}", g.correlator[0]);
    }
}

#[test]
fn correlator_scales_with_eps_squared() {
    let a = gamma_from_correlator(10.0, 10.0, 1.0, 0.33, 5_000, CORRELATOR_T_MAX, 9).unwrap();
    let b = gamma_from_correlator(10.0, 10.0, 3.0, 0.33, 5_000, CORRELATOR_T_MAX, 9).unwrap();
    assert!((b.value - 9.0 * a.value).abs() < 1e-12 * b.value.abs());
    assert_eq!(a.terms(), b.terms());
}

#[test]
fn correlator_is_deterministic_and_truncated() {
    let a = gamma_from_correlator(5.09, 5.09, 1.0, 0.33, 20_000, CORRELATOR_T_MAX, 5).unwrap();
    let b = gamma_from_correlator(5.09, 5.09, 1.0, 0.33, 20_000, CORRELATOR_T_MAX, 5).unwrap();
    assert_eq!(a, b);
    assert!(a.terms() >= 1 && a.terms() <= CORRELATOR_T_MAX + 1);
    assert!(a.std_error > 0.0);
}

#[test]
fn strong_coupling_onset_precedes_ehrenfest_time() {
    let grid = TorusGrid::new(512).unwrap();
    let lambda = lyapunov_exponent(5.09, 400, 500, 1).unwrap().lambda;
    let g = g_correlator(5.09, 5.09, 4.0, 0.33, 20_000, CORRELATOR_T_MAX, 1).unwrap();
    let tau = onset_time(lambda, grid.coherent_sigma(), g.value);
    let tau_e = (512f64).ln() / lambda;
    assert!(tau > 0.0 && tau <= tau_e, "tau {tau}, tau_E {tau_e}");
}

#[test]
fn saturated_prediction_reaches_twice_inverse_dimension() {
    let r = classify_regime(4.0, 512, 512, 0.93);
    assert_eq!(r.classification, Regime::ValidLyapunovSaturated);
    let p = SemiclassicalParams::new(0.93, 0.93, r.gamma, 512, 512);
    let late = predict_purity(&p, 100);
    assert!((late - 2.0 / 512.0).abs() < 1e-12);
    assert!((late - 3.9e-3).abs() < 1e-4);
}

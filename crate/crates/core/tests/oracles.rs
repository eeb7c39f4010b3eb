use mismatch_qkd::keyrate::{keyrate_multiphoton, pdet2_upper, pdet2_upper_closed_form, Observables};
use mismatch_qkd::oracles::{
    check_engine_single_photon, check_eur, check_prop4, min_double_click, min_double_click_exact, run_suite,
    RootForm,
};
use mismatch_qkd::scalarmath::p01_min;
use mismatch_qkd::simulate::{observables_from_state, depolarized_state, DepolarizingModel};
use mismatch_qkd::{MismatchEta, Probability};
use proptest::prelude::*;

#[test]
fn default_verification_run_is_clean() {
    let reports = run_suite("all", 500, 7).unwrap();
    for r in &reports {
        assert!(r.passed(), "{r}");
        assert!(r.worst_slack >= -1e-8, "{r}");
    }
    assert_eq!(reports, run_suite("all", 500, 7).unwrap());
}

#[test]
fn numerical_minimum_respects_lemma_bound() {
    for n in 3..=5 {
        let found = min_double_click(n, 2000, 3).unwrap();
        let exact = min_double_click_exact(n);
        let bound = p01_min(n as u32).unwrap();
        assert!(found >= bound - 1e-6, "n={n}: {found} < {bound}");
        assert!(exact >= bound - 1e-9, "n={n}: {exact} < {bound}");
        assert!(found >= exact - 1e-9);
    }
}

#[test]
fn entropic_relation_on_embedded_states() {
    for n in 1..=6 {
        let r = check_eur(n, 200, 5).unwrap();
        assert!(r.passed(), "{r}");
    }
}

#[test]
fn engine_matches_exact_single_photon_entropy() {
    let r = check_engine_single_photon(300, 9).unwrap();
    assert!(r.passed(), "{r}");
}

#[test]
fn stated_two_photon_root_fails_near_bell_states() {
    use mismatch_qkd::oracles::{two_photon_slacks, two_photon_stats};
    use nalgebra::DVector;
    use num_complex::Complex64;

    let eta = MismatchEta::perfect();
    let s: f64 = 0.05;
    let c = (1.0 - s * s).sqrt();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let state = |sign: f64| {
        let v = DVector::from_vec(vec![
            Complex64::new(c * r, 0.0),
            Complex64::new(sign * s, 0.0),
            Complex64::new(c * r, 0.0),
        ]);
        &v * v.adjoint()
    };
    let stats = two_photon_stats(&state(1.0), &state(-1.0), eta);
    assert!((stats.q2 - (0.5 - c * s)).abs() < 1e-12);
    assert!((stats.p01 - s * s / 2.0).abs() < 1e-12);
    assert!(two_photon_slacks(&stats, eta, RootForm::AsStated)[0] < -1e-3);
    assert!(two_photon_slacks(&stats, eta, RootForm::AsDerived).iter().all(|&x| x >= -1e-12));
    // Random states do not come close enough to find it.
    assert!(check_prop4(1000, 7, RootForm::AsDerived).unwrap().passed());
}

#[test]
fn state_pipeline_matches_closed_form_rates() {
    let m = DepolarizingModel::new(
        Probability::new(0.04).unwrap(),
        MismatchEta::new(0.7).unwrap(),
        Probability::new(0.0).unwrap(),
    )
    .unwrap();
    let (obs, stats) = observables_from_state(&depolarized_state(&m), m.eta()).unwrap();
    assert!((obs.p_det() - 0.85).abs() < 1e-12);
    assert!((obs.p_1() - 0.35).abs() < 1e-12);
    assert!((obs.q() - 0.04).abs() < 1e-12);
    assert_eq!(stats.rows.len(), 1);
}

fn observables() -> impl Strategy<Value = Observables> {
    (0.3f64..=1.0, 0.05f64..=1.0, 0.0f64..0.1, 0.0f64..1e-3).prop_map(|(eta, t, qber, r)| {
        let p_det = t * (1.0 + eta) / 2.0;
        Observables::new(
            MismatchEta::new(eta).unwrap(),
            p_det,
            t * eta / 2.0,
            qber * p_det,
            r * p_det,
            qber,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn key_rate_never_exceeds_detection_rate(obs in observables()) {
        let r = keyrate_multiphoton(&obs);
        prop_assert!(r.k_bound >= 0.0);
        prop_assert!(r.k_bound <= obs.p_det() + 1e-12);
        prop_assert!(r.argmin_pdet2 >= 0.0 && r.argmin_pdet2 <= r.pdet2_upper + 1e-12);
    }

    #[test]
    fn upper_limit_solvers_agree(obs in observables()) {
        let a = pdet2_upper(&obs);
        let b = pdet2_upper_closed_form(&obs);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn more_double_clicks_never_raise_the_rate(obs in observables(), extra in 0.0f64..1e-3) {
        let more = obs.with_p01(obs.p_01() + extra * obs.p_det()).unwrap();
        let k0 = keyrate_multiphoton(&obs).k_bound;
        let k1 = keyrate_multiphoton(&more).k_bound;
        prop_assert!(k1 <= k0 + 1e-9, "{} > {}", k1, k0);
    }

    #[test]
    fn rate_scales_with_transmittance(obs in observables(), t in 0.01f64..1.0) {
        let scaled = obs.with_transmittance(t).unwrap();
        let k0 = keyrate_multiphoton(&obs).k_bound;
        let k1 = keyrate_multiphoton(&scaled).k_bound;
        prop_assert!((k1 - t * k0).abs() <= 1e-8, "{} vs {}", k1, t * k0);
    }
}

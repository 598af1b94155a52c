use dnls_core::experiments::{
    reports_to_csv, run_experiment, run_negative_control, run_sweep, ExperimentParams, Level, SweepItem,
};
use dnls_core::lattice_verify::{verify_counting_scaling, Sigma};
use dnls_core::planewave_ode::ExperimentCase;
use dnls_core::resonance::{classify_regime, Citation, CoefficientTriple, RegimeKind};

#[test]
fn classify_reports_norm_inflation_for_vanishing_beta_plus_gamma() {
    let c = CoefficientTriple::parse("1,1,-1").unwrap();
    let claims = classify_regime(&c, 2, 0.5).unwrap();
    assert!(claims.iter().any(|c| c.kind == RegimeKind::NormInflation && c.citation == Citation::Thm14i));
    let json = serde_json::to_string(&claims).unwrap();
    assert!(json.contains("\"Theorem 1.4 (i)\""));
}

#[test]
fn pde_level_matches_ode_level() {
    let p = ExperimentParams::new(Some(16), 0.5, None);
    let ode = run_experiment(ExperimentCase::NiBgPosS, &p, Level::Ode).unwrap();
    let pde = run_experiment(ExperimentCase::NiBgPosS, &p, Level::Pde).unwrap();
    assert!(ode.pass && pde.pass);
    assert_eq!(ode.t_final, pde.t_final);
    assert!((ode.measured_norm - pde.measured_norm).abs() <= 1e-10, "{} {}", ode.measured_norm, pde.measured_norm);
}

#[test]
fn pair_at_pde_level() {
    let p = ExperimentParams::new(Some(32), 0.5, Some(0.1));
    let ode = run_experiment(ExperimentCase::NuAlphaGamma, &p, Level::Ode).unwrap();
    let pde = run_experiment(ExperimentCase::NuAlphaGamma, &p, Level::Pde).unwrap();
    assert!((ode.measured_norm - pde.measured_norm).abs() <= 1e-9);
}

#[test]
fn sweep_keeps_order_and_matches_single_runs() {
    let items: Vec<SweepItem> = serde_json::from_str(
        r#"[
            {"case": "NI_bg_pos_s", "N": 64, "s": 0.5},
            {"case": "NI_bg_neg_s", "N": 16, "s": -0.5},
            {"case": "Disc_L2", "N": 128, "s": 0.0, "delta": 0.0078125},
            {"case": "NU_mu_nonpos", "s": 0.5, "delta": 0.1, "coefficients": "2,1,1", "convergent": 5}
        ]"#,
    )
    .unwrap();
    let out = run_sweep(&items).unwrap();
    assert_eq!(out.len(), items.len());
    let reports: Vec<_> = out.into_iter().map(|r| r.unwrap()).collect();
    for (it, r) in items.iter().zip(&reports) {
        assert_eq!(r.case, it.case);
        assert_eq!(r, &run_experiment(it.case, &it.params, it.level).unwrap());
        assert!(r.pass, "{:?}", r.case);
    }
    let csv = reports_to_csv(&reports);
    assert!(csv.starts_with("case,N,s,delta,T,predicted,measured,pass\n"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn sweep_rejects_unknown_keys() {
    let bad = serde_json::from_str::<Vec<SweepItem>>(r#"[{"case": "Disc_L2", "N": 8, "s": 0.0, "typo": 1}]"#);
    assert!(bad.is_err());
}

#[test]
fn negative_control_stays_small() {
    let p = ExperimentParams::new(Some(64), 0.5, Some(0.2));
    let r = run_negative_control(&p, 20.0).unwrap();
    assert!(r.pass, "{}", r.notes);
    assert!(r.measured_norm <= 0.2 * (1.0 + 1e-8));
}

#[test]
fn counting_law_holds_once_m_is_small_against_n() {
    let s = Sigma::from_ints([1, -2, 1]).unwrap();
    let t = verify_counting_scaling(&s, 512, &[4, 8, 16, 32, 64], 50, 1).unwrap();
    assert!(!t.guard_relaxed);
    assert!(t.pass, "{:?}", t.rows.iter().map(|r| r.ratio).collect::<Vec<_>>());
    assert!(t.rows.iter().all(|r| r.ratio <= 4.0));
}

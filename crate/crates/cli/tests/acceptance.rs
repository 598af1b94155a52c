//! End-to-end acceptance checks, one line per criterion.

use std::process::{Command, Stdio};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dnls_core::experiments::{
    case_setup, crosscheck_pde_vs_ode, gronwall_check, off_subspace_mass, run_experiment, ExperimentParams,
    GronwallParams, Level, IRRATIONAL_PAIR_BRACKET,
};
use dnls_core::lattice_verify::{
    check_modulation_bound, modulation_scan, verify_counting_1d, verify_counting_scaling, FrequencyConfig, Relation,
    Sigma, D1_COUNT_MAX,
};
use dnls_core::pde_solver::{convergence_order, integrate, ConvergenceOrder, Integrator, SolverConfig};
use dnls_core::planewave_ode::{
    hitting_time, make_ansatz, ode_integrate_strided, ExperimentCase, PhaseVariant, PlaneWaveTriple,
};
use dnls_core::resonance::{resonance_k_roots, sign_pattern, CoefficientTriple, Sign};
use dnls_core::spectral_field::SystemState;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: impl Into<String>) -> Line {
    Line { pass, detail: detail.into() }
}

fn nonzero(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    loop {
        let x: f64 = rng.gen_range(-scale..scale);
        if x != 0.0 {
            return x;
        }
    }
}

fn mu_implies_kappa() -> Line {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0usize;
    let mut mu_nonneg = 0usize;
    let mut bad = 0usize;
    for i in 0..1_000_000 {
        // small integers hit the boundary mu = 0 and the kappa factors often
        let c = if i % 2 == 0 {
            let mut k = || loop {
                let v: i64 = rng.gen_range(-4..=4);
                if v != 0 {
                    break v;
                }
            };
            CoefficientTriple::from_ratios([(k(), 1), (k(), 1), (k(), 1)]).unwrap()
        } else {
            CoefficientTriple::new(nonzero(&mut rng, 10.0), nonzero(&mut rng, 10.0), nonzero(&mut rng, 10.0)).unwrap()
        };
        let sp = sign_pattern(&c);
        checked += 1;
        if sp.mu != Sign::Negative {
            mu_nonneg += 1;
            if sp.kappa == Sign::Zero {
                bad += 1;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    line(
        bad == 0 && secs < 5.0,
        format!("{checked} triples, {mu_nonneg} with mu >= 0, {bad} with kappa = 0, {secs:.2} s"),
    )
}

fn root_residuals() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut roots = 0;
    for _ in 0..10_000 {
        let c = CoefficientTriple::new(nonzero(&mut rng, 10.0), nonzero(&mut rng, 10.0), nonzero(&mut rng, 10.0)).unwrap();
        for k in resonance_k_roots(&c) {
            roots += 1;
            let r = (c.alpha * k * k - c.beta * (k - 1.0).powi(2) - c.gamma).abs();
            worst = worst.max(r / ((1.0 + k * k) * c.max_abs()));
        }
    }
    line(worst <= 1e-12, format!("{roots} roots, worst scaled residual {worst:.2e}"))
}

fn ode_conservation() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let c = CoefficientTriple::new(nonzero(&mut rng, 2.0), nonzero(&mut rng, 2.0), nonzero(&mut rng, 2.0)).unwrap();
        let q = loop {
            let q: i64 = rng.gen_range(-64..=64);
            if q != 0 {
                break q;
            }
        };
        let p: i64 = rng.gen_range(-64..=64);
        let mut amp = || Complex64::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let pw = PlaneWaveTriple::new(&c, p, q, amp(), amp(), amp()).unwrap();
        let a_max = pw.amplitudes().iter().map(|z| z.norm()).fold(0.0, f64::max);
        let unit = 1.0 / (q.unsigned_abs() as f64 * a_max);
        let t_end = rng.gen_range(0.5..5.0) * unit;
        let dt = (unit / 2000.0).min(0.05 / pw.c_osc().abs().max(1.0));
        let tr = ode_integrate_strided(&pw, t_end, dt, usize::MAX).unwrap();
        worst = worst.max(tr.drift_fg).max(tr.drift_fh);
    }
    line(worst <= 1e-8, format!("200 trajectories, worst relative drift {worst:.2e}"))
}

fn separatrix() -> Line {
    let t0 = Instant::now();
    let t = hitting_time(PhaseVariant::Defocusing, 0.25, 0.0, 0.5).unwrap();
    let want = 3f64.ln() / 2f64.sqrt();
    let secs = t0.elapsed().as_secs_f64();
    line((t - want).abs() <= 1e-6 && secs < 1.0, format!("t = {t:.12}, ln 3 / sqrt 2 = {want:.12}, {secs:.3} s"))
}

fn pde_conservation() -> Line {
    let t0 = Instant::now();
    let c = CoefficientTriple::new(1.0, 2.0, -0.5).unwrap();
    let b = 42;
    let cfg = SolverConfig::for_bandlimit(b);
    let st = SystemState::random(1, b, b, 0.1, 5).unwrap();
    let tr = integrate(&st, &c, 0.1, cfg).unwrap();
    let (qd, hd) = (tr.q_drift(), tr.h_drift());
    let dts = [1e-3, 5e-4, 2.5e-4, 1.25e-4];
    let order = convergence_order(&st, &c, 0.1, &dts, cfg).unwrap();
    let p = match order {
        ConvergenceOrder::Observed(p) => p,
        ConvergenceOrder::Exact => f64::NAN,
    };
    let secs = t0.elapsed().as_secs_f64();
    line(
        cfg.grid_modes == 128 && qd <= 1e-6 && hd <= 1e-5 && (3.5..=4.5).contains(&p) && secs < 30.0,
        format!("{} modes, Q drift {qd:.2e}, H drift {hd:.2e}, order {p:.3}, {secs:.1} s", cfg.grid_modes),
    )
}

fn closure_and_crosscheck() -> Line {
    let params = ExperimentParams::new(Some(8), 0.5, None);
    let setup = case_setup(ExperimentCase::NiBgPosS, &params).unwrap();
    let pw = setup.plus;
    let b = 8;
    let cfg = SolverConfig::for_bandlimit(b).with_dt(setup.dt).with_stride(20);
    let diff = crosscheck_pde_vs_ode(&pw, &setup.c, setup.t_final, cfg).unwrap();
    let st = make_ansatz(&pw, b, 1).unwrap();
    let mut it = Integrator::new(&setup.c, cfg, 1, b).unwrap();
    let tr = it.run(&st, setup.t_final).unwrap();
    let mass = tr.states.iter().map(|s| off_subspace_mass(s, &pw)).fold(0.0, f64::max);
    line(
        mass <= 1e-12 && diff <= 1e-6,
        format!("T = {:.4}, off-subspace mass {mass:.2e}, PDE - ODE {diff:.2e}", setup.t_final),
    )
}

fn inflation_bg_pos() -> Line {
    let t0 = Instant::now();
    let s = 0.5;
    let mut ok = true;
    let mut last = 0.0;
    let mut parts = Vec::new();
    for n in [64i64, 256, 1024] {
        let nf = n as f64;
        let delta = 1.0 / nf.ln();
        let r = run_experiment(ExperimentCase::NiBgPosS, &ExperimentParams::new(Some(n), s, Some(delta)), Level::Ode)
            .unwrap();
        let want = nf.powf(s) * delta * ((1.0 - nf.powf(-2.0 * s)) / 2.0).sqrt();
        let rel = (r.measured_norm - want).abs() / want;
        let law = r.t_final * nf / nf.ln().powi(2);
        ok &= rel <= 0.10 && r.measured_norm > last && law <= 2.0;
        last = r.measured_norm;
        parts.push(format!("N={n}: {:.4} vs {want:.4} ({:.1}%), T N/log^2 N = {law:.3}", r.measured_norm, 100.0 * rel));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    line(ok, format!("{}; {secs:.2} s", parts.join("; ")))
}

fn exactness_bg_neg() -> Line {
    let s = -0.5;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [16i64, 256] {
        let nf = n as f64;
        let delta = 1.0 / nf.ln();
        let r = run_experiment(ExperimentCase::NiBgNegS, &ExperimentParams::new(Some(n), s, Some(delta)), Level::Ode)
            .unwrap();
        let want = delta * nf.powf(-s) / 2.0;
        let rel = (r.measured_norm - want).abs() / want;
        ok &= rel <= 0.01;
        parts.push(format!("N={n}: {:.6} vs {want:.6} ({rel:.1e})", r.measured_norm));
    }
    line(ok, parts.join("; "))
}

fn discontinuity() -> Line {
    let n = 256i64;
    let nf = n as f64;
    let r = run_experiment(ExperimentCase::DiscL2, &ExperimentParams::new(Some(n), 0.0, Some(1.0 / nf)), Level::Ode)
        .unwrap();
    let pair = r.pair.as_ref().expect("reference distance");
    let init_ok = (pair.initial_distance - 2.0 / nf).abs() <= 1e-15;
    let law = r.t_final * nf / nf.ln();
    line(
        init_ok && r.measured_norm >= 0.5 && law <= 2.0,
        format!(
            "initial distance {:.10} (2/N = {:.10}), ||v(T)|| = {:.4}, T N / log N = {law:.3}",
            pair.initial_distance,
            2.0 / nf,
            r.measured_norm
        ),
    )
}

fn nonuniform_alpha_gamma() -> Line {
    let delta = 0.05;
    let r = run_experiment(
        ExperimentCase::NuAlphaGamma,
        &ExperimentParams::new(Some(1 << 16), 0.5, Some(delta)),
        Level::Ode,
    )
    .unwrap();
    let pair = r.pair.as_ref().expect("pair");
    let [lo, hi] = pair.bracket.expect("bracket");
    let init_ok = (pair.initial_distance - 2.0 * delta).abs() <= 1e-12;
    let times_ok = (pair.t_star_plus - pair.t_star_minus).abs() <= 1e-10;
    let in_bracket = lo == 1.8 && r.measured_norm >= lo && r.measured_norm <= hi + 1e-9 && hi - 2.0 <= 1e-9;
    line(
        init_ok && times_ok && in_bracket && r.pass,
        format!(
            "initial {:.6}, terminal {:.10} in [{lo}, {hi:.10}], |t+ - t-| = {:.1e}",
            pair.initial_distance,
            r.measured_norm,
            (pair.t_star_plus - pair.t_star_minus).abs()
        ),
    )
}

fn irrational_pipeline() -> Line {
    let k = 3f64.sqrt() - 1.0;
    let mut ok = true;
    let mut dists = Vec::new();
    for n in 4..=8 {
        let params = ExperimentParams::new(None, 0.5, Some(0.1)).with_coefficients("2,1,1").with_convergent(n);
        let r = run_experiment(ExperimentCase::NuMuNonpos, &params, Level::Ode).unwrap();
        let (p, q) = (r.params.p as f64, r.params.q as f64);
        let dio = (k - p / q).abs() < 1.0 / (q * q);
        let [lo, hi] = IRRATIONAL_PAIR_BRACKET;
        ok &= dio && r.measured_norm >= lo && r.measured_norm <= hi;
        dists.push(format!("{}/{}: {:.4}", r.params.p, r.params.q, r.measured_norm));
    }
    let g = gronwall_check(&GronwallParams {
        coefficients: "2,1,1".into(),
        root: None,
        s: 0.5,
        delta: 0.1,
        convergents: (4..=8).collect(),
        steps_per_unit: 1000.0,
        zero_oscillation: false,
    })
    .unwrap();
    ok &= g.c_fit_max <= 10.0 && g.c_osc_max <= 10.0;
    line(
        ok,
        format!(
            "{}; |c_osc| <= {:.3}, fitted C = {:.3e}; bracket {:?}",
            dists.join(", "),
            g.c_osc_max,
            g.c_fit_max,
            IRRATIONAL_PAIR_BRACKET
        ),
    )
}

fn counting() -> Line {
    let t0 = Instant::now();
    let s = Sigma::from_ints([1, -2, 1]).unwrap();
    let ms = [4u64, 16, 64, 256];
    let a = verify_counting_scaling(&s, 128, &ms, 200, 0).unwrap();
    let b = verify_counting_scaling(&s, 256, &ms, 200, 0).unwrap();
    let doubling = a.rows.iter().zip(&b.rows).all(|(x, y)| {
        let (u, v) = (x.worst_count.max(1) as f64, y.worst_count.max(1) as f64);
        u.max(v) / u.min(v) <= 2.0
    });
    let d1a = verify_counting_1d(&s, 128, &[1, 2, 4, 8, 16]).unwrap();
    let d1b = verify_counting_1d(&s, 256, &[1, 2, 4, 8, 16, 32]).unwrap();
    let d1_worst = d1a.rows.iter().chain(&d1b.rows).map(|r| r.worst_count).max().unwrap_or(0);
    let secs = t0.elapsed().as_secs_f64();
    let fmt = |t: &dnls_core::lattice_verify::CountingTable| {
        t.rows.iter().map(|r| format!("{:.2}", r.ratio)).collect::<Vec<_>>().join("/")
    };
    line(
        a.pass && b.pass && doubling && d1_worst <= D1_COUNT_MAX && secs < 120.0,
        format!(
            "ratios N=128 {} (band {}), N=256 {} (band {}), doubling {}, d=1 worst {d1_worst}, {secs:.1} s",
            fmt(&a),
            if a.pass { "ok" } else { "broken" },
            fmt(&b),
            if b.pass { "ok" } else { "broken" },
            if doubling { "ok" } else { "broken" },
        ),
    )
}

fn modulation() -> Line {
    let s = Sigma::from_ints([1, -2, -3]).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, j, k) in [(0, 1, 2), (1, 2, 0), (0, 2, 1)] {
        let at = |n| {
            check_modulation_bound(&FrequencyConfig { sigma: s, d: 1, n, relation: Relation::TwoCompHigh { i, j, k } })
                .unwrap()
                .c_min
        };
        let (a, b) = (at(32), at(64));
        ok &= a > 0.0 && b > 0.0 && (a - b).abs() <= 0.2 * a;
        parts.push(format!("({},{};{}) {a:.4} -> {b:.4}", i + 1, j + 1, k + 1));
    }
    let sharp = FrequencyConfig {
        sigma: Sigma::from_ints([1, -1, -1]).unwrap(),
        d: 1,
        n: 32,
        relation: Relation::TwoCompHigh { i: 0, j: 1, k: 2 },
    };
    let refused = check_modulation_bound(&sharp).is_err();
    let r = modulation_scan(&sharp).unwrap();
    ok &= refused && r.c_min <= 1.0 / 32.0;
    line(ok, format!("{}; vanishing pairing: refused, ratio {:.2e} <= 1/N", parts.join(", "), r.c_min))
}

fn determinism() -> Line {
    let exe = env!("CARGO_BIN_EXE_dnls-lab");
    let base = std::env::temp_dir().join(format!("dnls-lab-determinism-{}", std::process::id()));
    let runs: [&[&str]; 4] = [
        &["experiment", "--case", "NI_bg_pos_s", "--N", "256", "--s", "0.5"],
        &["verify-counting", "--sigma", "1,-2,1", "--N", "64", "--M", "2,4,8", "--seed", "9"],
        &["simulate", "--N", "10", "--T", "0.01", "--seed", "4"],
        &["ode", "--N", "5", "--T", "0.5", "--seed", "11"],
    ];
    let mut ok = true;
    for (i, args) in runs.iter().enumerate() {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let dir = base.join(format!("{i}-{rep}"));
            let st = Command::new(exe).args(*args).arg("--out").arg(&dir).stdout(Stdio::null()).status().expect("spawn");
            ok &= st.code() == Some(0) || st.code() == Some(1);
            let report = std::fs::read(dir.join("report.json")).unwrap_or_default();
            let data = std::fs::read(dir.join("data.csv")).unwrap_or_default();
            ok &= !report.is_empty() && !data.is_empty();
            outs.push((report, data));
        }
        ok &= outs[0] == outs[1];
    }
    let _ = std::fs::remove_dir_all(&base);
    line(ok, format!("{} commands run twice, outputs byte-identical: {ok}", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Line); 14] = [
        ("resonance sign property", mu_implies_kappa),
        ("resonance root residuals", root_residuals),
        ("amplitude ODE conservation", ode_conservation),
        ("separatrix hitting time", separatrix),
        ("PDE conservation and order", pde_conservation),
        ("ansatz closure and PDE/ODE crosscheck", closure_and_crosscheck),
        ("norm inflation of v, s > 0", inflation_bg_pos),
        ("exact u norm, s < 0", exactness_bg_neg),
        ("L2 discontinuity", discontinuity),
        ("non-uniform continuity, alpha = gamma", nonuniform_alpha_gamma),
        ("irrational resonance pipeline", irrational_pipeline),
        ("annulus-strip counting bound", counting),
        ("modulation lower bound", modulation),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = f();
        if !r.pass {
            failed += 1;
        }
        println!("[{}] {:>2}. {name}: {}", if r.pass { "PASS" } else { "FAIL" }, i + 1, r.detail);
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

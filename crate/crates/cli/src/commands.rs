use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dnls_core::experiments::{
    case_setup, crosscheck_pde_vs_ode, gronwall_check, off_subspace_mass, reports_to_csv, run_experiment,
    run_negative_control, run_sweep, ExperimentParams, GronwallParams, GronwallReport, Level, SweepItem,
};
use dnls_core::lattice_verify::{
    check_modulation_bound, modulation_scan, verify_counting_1d, verify_counting_scaling, FrequencyConfig,
    ModulationResult, Relation, Sigma,
};
use dnls_core::pde_solver::{Integrator, SolverConfig};
use dnls_core::planewave_ode::{make_ansatz, ode_integrate_strided, ExperimentCase, PlaneWaveTriple};
use dnls_core::resonance::{classify_regime, resonance_coefficients, resonance_k_roots, CoefficientTriple};
use dnls_core::spectral_field::{charge_q, energy_h, SystemState};

use crate::config::{merged, typed, Cli, CliError, Command};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerances of the `simulate` conservation check.
const Q_DRIFT_MAX: f64 = 1e-6;
const H_DRIFT_MAX: f64 = 1e-5;
/// Tolerance of the `ode` invariants.
const ODE_DRIFT_MAX: f64 = 1e-8;
const CROSSCHECK_MAX: f64 = 1e-6;
const OFF_SUBSPACE_MAX: f64 = 1e-12;

struct Output {
    config: Value,
    result: Value,
    csv: Option<String>,
    pass: bool,
}

/// Number or string, read back as text so fractions stay exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Coef {
    Num(serde_json::Number),
    Text(String),
}

impl Coef {
    fn text(&self) -> String {
        match self {
            Coef::Num(n) => n.to_string(),
            Coef::Text(t) => t.trim().to_string(),
        }
    }
}

fn triple(a: &Option<Coef>, b: &Option<Coef>, g: &Option<Coef>, default: [&str; 3]) -> Result<String, CliError> {
    let pick = |c: &Option<Coef>, d: &str| c.as_ref().map(Coef::text).unwrap_or_else(|| d.to_string());
    Ok(format!("{},{},{}", pick(a, default[0]), pick(b, default[1]), pick(g, default[2])))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

pub fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let opts = cli.command.opts();
    let map = merged(opts)?;
    let out = match &cli.command {
        Command::Classify(_) => classify(typed(&map)?)?,
        Command::Simulate(_) => simulate(typed(&map)?)?,
        Command::Ode(_) => ode(typed(&map)?)?,
        Command::Experiment(_) => experiment(typed(&map)?)?,
        Command::VerifyCounting(_) => verify_counting(typed(&map)?)?,
        Command::VerifyModulation(_) => verify_modulation(typed(&map)?)?,
        Command::Crosscheck(_) => crosscheck(typed(&map)?)?,
    };
    let name = cli.command.name();
    let report = json!({
        "tool": "dnls-lab",
        "version": VERSION,
        "command": name,
        "config": out.config,
        "pass": out.pass,
        "result": out.result,
    });
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    match &opts.out {
        None => print!("{text}"),
        Some(dir) => {
            write_file(dir, "report.json", &text)?;
            if let Some(csv) = &out.csv {
                let head = format!(
                    "# dnls-lab {VERSION} {name} {}\n",
                    serde_json::to_string(&report["config"]).expect("serializable")
                );
                write_file(dir, "data.csv", &(head + csv))?;
            }
            println!("{name}: {}", if out.pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(out.pass)
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn one() -> u32 {
    1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyCfg {
    alpha: Coef,
    beta: Coef,
    gamma: Coef,
    #[serde(default = "one")]
    dim: u32,
    s: f64,
    #[serde(default)]
    seed: u64,
}

fn classify(cfg: ClassifyCfg) -> Result<Output, CliError> {
    let text = triple(&Some(cfg.alpha.clone()), &Some(cfg.beta.clone()), &Some(cfg.gamma.clone()), ["", "", ""])?;
    let c = CoefficientTriple::parse(&text)?;
    let claims = classify_regime(&c, cfg.dim, cfg.s)?;
    let result = json!({
        "coefficients": [c.alpha, c.beta, c.gamma],
        "quantities": resonance_coefficients(&c, cfg.dim),
        "k_roots": resonance_k_roots(&c),
        "claims": claims,
    });
    Ok(Output { config: to_value(&cfg), result, csv: None, pass: true })
}

fn default_bandlimit() -> usize {
    42
}
fn default_modes() -> usize {
    8
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_sim_t() -> f64 {
    0.1
}
fn default_stride() -> usize {
    50
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateCfg {
    #[serde(default)]
    alpha: Option<Coef>,
    #[serde(default)]
    beta: Option<Coef>,
    #[serde(default)]
    gamma: Option<Coef>,
    #[serde(default = "one")]
    dim: u32,
    /// Band limit `B` of the stored modes.
    #[serde(rename = "N", default = "default_bandlimit")]
    bandlimit: usize,
    /// Random data on `|xi|_inf <= modes`.
    #[serde(default = "default_modes")]
    modes: usize,
    #[serde(default = "default_amplitude")]
    amplitude: f64,
    #[serde(rename = "T", default = "default_sim_t")]
    t_end: f64,
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default = "default_stride")]
    stride: usize,
    #[serde(default)]
    seed: u64,
}

fn simulate(cfg: SimulateCfg) -> Result<Output, CliError> {
    let c = CoefficientTriple::parse(&triple(&cfg.alpha, &cfg.beta, &cfg.gamma, ["1", "2", "1"])?)?;
    let d = cfg.dim as usize;
    let st = SystemState::random(d, cfg.bandlimit, cfg.modes, cfg.amplitude, cfg.seed)?;
    let mut sc = SolverConfig::for_bandlimit(cfg.bandlimit).with_stride(cfg.stride);
    if let Some(dt) = cfg.dt {
        sc = sc.with_dt(dt);
    }
    let mut it = Integrator::new(&c, sc, d, cfg.bandlimit)?;
    let (q0, h0) = (charge_q(&st), energy_h(&st, &c));
    let tr = it.run(&st, cfg.t_end).map_err(|e| CliError::Failed(e.to_string()))?;
    let (qd, hd) = (tr.q_drift(), tr.h_drift());
    let axis = |k: i64| {
        let mut xi = vec![0i64; d];
        xi[0] = k;
        xi
    };
    let modes: Vec<(usize, usize, Vec<i64>)> =
        (0..3).flat_map(|f| [(f, 0, axis(0)), (f, 0, axis(1))]).collect();
    let result = json!({
        "Q0": q0,
        "H0": h0,
        "Q_drift": qd,
        "H_drift": hd,
        "dt": sc.dt,
        "grid_modes": sc.grid_modes,
        "snapshots": tr.states.len(),
        "final_time": tr.last().time,
    });
    Ok(Output {
        config: to_value(&cfg),
        result,
        csv: Some(tr.to_csv(&modes)),
        pass: qd <= Q_DRIFT_MAX && hd <= H_DRIFT_MAX,
    })
}

fn default_ode_t() -> f64 {
    1.0
}
fn default_ode_stride() -> usize {
    10
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OdeCfg {
    #[serde(default)]
    alpha: Option<Coef>,
    #[serde(default)]
    beta: Option<Coef>,
    #[serde(default)]
    gamma: Option<Coef>,
    /// Frequency of `u`.
    #[serde(default)]
    p: i64,
    /// Frequency of `w`; `N` is an alias.
    #[serde(default)]
    q: Option<i64>,
    #[serde(rename = "N", default)]
    n: Option<i64>,
    /// `[[re, im]; 3]` for `(f, g, h)`; seeded random data in the unit disc otherwise.
    #[serde(default)]
    amplitudes: Option<[[f64; 2]; 3]>,
    #[serde(rename = "T", default = "default_ode_t")]
    t_end: f64,
    /// Defaults to a step resolving both `c_osc` and the coupling.
    #[serde(default)]
    dt: Option<f64>,
    #[serde(default = "default_ode_stride")]
    stride: usize,
    #[serde(default)]
    seed: u64,
}

fn ode(mut cfg: OdeCfg) -> Result<Output, CliError> {
    let c = CoefficientTriple::parse(&triple(&cfg.alpha, &cfg.beta, &cfg.gamma, ["1", "2", "1"])?)?;
    let q = cfg.q.or(cfg.n).unwrap_or(1);
    let amps = match cfg.amplitudes {
        Some(a) => a.map(|[re, im]| Complex64::new(re, im)),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            [(); 3].map(|_| Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)))
        }
    };
    let pw = PlaneWaveTriple::new(&c, cfg.p, q, amps[0], amps[1], amps[2])?;
    let rate = pw.c_osc().abs().max(pw.coupling().abs()).max(1.0);
    let dt = *cfg.dt.get_or_insert((0.02 / rate).min(1e-3));
    let tr = ode_integrate_strided(&pw, cfg.t_end, dt, cfg.stride)?;
    let last = tr.last();
    let result = json!({
        "p": pw.p,
        "q": pw.q,
        "c_osc": pw.c_osc(),
        "coupling": pw.coupling(),
        "initial": amps.map(|z| [z.re, z.im]),
        "final": last.map(|z| [z.re, z.im]),
        "drift_fg": tr.drift_fg,
        "drift_fh": tr.drift_fh,
    });
    let pass = tr.drift_fg <= ODE_DRIFT_MAX && tr.drift_fh <= ODE_DRIFT_MAX;
    Ok(Output { config: to_value(&cfg), result, csv: Some(tr.to_csv()), pass })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentCfg {
    /// A construction name, `gronwall` or `negative_control`.
    #[serde(default)]
    case: Option<String>,
    #[serde(default)]
    level: Option<String>,
    #[serde(rename = "N", default)]
    n: Option<i64>,
    #[serde(default)]
    s: Option<f64>,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    alpha: Option<Coef>,
    #[serde(default)]
    beta: Option<Coef>,
    #[serde(default)]
    gamma: Option<Coef>,
    #[serde(default)]
    coefficients: Option<String>,
    #[serde(default)]
    convergent: Option<usize>,
    #[serde(default)]
    convergents: Option<Vec<usize>>,
    #[serde(default)]
    root: Option<usize>,
    #[serde(default)]
    steps_per_unit: Option<f64>,
    #[serde(default)]
    periods: Option<f64>,
    #[serde(default)]
    sweep: Option<Vec<SweepItem>>,
    #[serde(default)]
    seed: u64,
}

impl ExperimentCfg {
    fn coefficients(&self) -> Result<Option<String>, CliError> {
        if self.alpha.is_none() && self.beta.is_none() && self.gamma.is_none() {
            return Ok(self.coefficients.clone());
        }
        if self.coefficients.is_some() {
            return Err(CliError::Config("give either coefficients or alpha/beta/gamma".into()));
        }
        match (&self.alpha, &self.beta, &self.gamma) {
            (Some(_), Some(_), Some(_)) => Ok(Some(triple(&self.alpha, &self.beta, &self.gamma, ["", "", ""])?)),
            _ => Err(CliError::Config("alpha, beta and gamma must be given together".into())),
        }
    }

    fn params(&self) -> Result<ExperimentParams, CliError> {
        let s = self.s.ok_or_else(|| CliError::Config("missing s".into()))?;
        let mut p = ExperimentParams::new(self.n, s, self.delta);
        p.coefficients = self.coefficients()?;
        p.convergent = self.convergent;
        p.root = self.root;
        if let Some(k) = self.steps_per_unit {
            p.steps_per_unit = k;
        }
        Ok(p)
    }
}

fn gronwall_csv(r: &GronwallReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["convergent", "p", "q", "c_osc", "T", "max_diff", "c_fit"]).expect("in-memory write");
    for e in &r.entries {
        w.write_record([
            e.convergent.to_string(),
            e.p.to_string(),
            e.q.to_string(),
            e.c_osc.to_string(),
            e.t_final.to_string(),
            e.max_diff.to_string(),
            e.c_fit.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn experiment(cfg: ExperimentCfg) -> Result<Output, CliError> {
    if let Some(items) = &cfg.sweep {
        if cfg.case.is_some() {
            return Err(CliError::Config("give either case or sweep".into()));
        }
        let mut reports = Vec::new();
        for (i, r) in run_sweep(items)?.into_iter().enumerate() {
            reports.push(r.map_err(|e| CliError::Config(format!("sweep item {i}: {e}")))?);
        }
        let pass = reports.iter().all(|r| r.pass);
        return Ok(Output { config: to_value(&cfg), result: to_value(&reports), csv: Some(reports_to_csv(&reports)), pass });
    }
    let case = cfg.case.clone().ok_or_else(|| CliError::Config("missing case".into()))?;
    match case.as_str() {
        "gronwall" => {
            let params = GronwallParams {
                coefficients: cfg.coefficients()?.unwrap_or_else(|| "2,1,1".into()),
                root: cfg.root,
                s: cfg.s.ok_or_else(|| CliError::Config("missing s".into()))?,
                delta: cfg.delta.unwrap_or(0.1),
                convergents: cfg.convergents.clone().unwrap_or_else(|| (4..=8).collect()),
                steps_per_unit: cfg.steps_per_unit.unwrap_or(1000.0),
                zero_oscillation: false,
            };
            let r = gronwall_check(&params)?;
            Ok(Output { config: to_value(&cfg), result: to_value(&r), csv: Some(gronwall_csv(&r)), pass: r.pass })
        }
        "negative_control" => {
            let r = run_negative_control(&cfg.params()?, cfg.periods.unwrap_or(20.0))?;
            let csv = reports_to_csv(std::slice::from_ref(&r));
            Ok(Output { config: to_value(&cfg), result: to_value(&r), csv: Some(csv), pass: r.pass })
        }
        name => {
            let case = ExperimentCase::parse(name)?;
            let level = Level::parse(cfg.level.as_deref().unwrap_or("ode"))?;
            let r = run_experiment(case, &cfg.params()?, level)?;
            let csv = reports_to_csv(std::slice::from_ref(&r));
            Ok(Output { config: to_value(&cfg), result: to_value(&r), csv: Some(csv), pass: r.pass })
        }
    }
}

fn default_sigma_counting() -> String {
    "1,-2,1".into()
}
fn two() -> u32 {
    2
}
fn default_counting_n() -> u64 {
    128
}
fn default_ms() -> Vec<u64> {
    vec![4, 16, 64, 256]
}
fn default_samples() -> usize {
    200
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountingCfg {
    #[serde(default = "default_sigma_counting")]
    sigma: String,
    #[serde(default = "two")]
    dim: u32,
    #[serde(rename = "N", default = "default_counting_n")]
    n: u64,
    #[serde(rename = "M", default = "default_ms")]
    ms: Vec<u64>,
    /// Random pairs on top of the tangent families (d = 2 only).
    #[serde(default = "default_samples")]
    samples: usize,
    #[serde(default)]
    seed: u64,
}

fn verify_counting(cfg: CountingCfg) -> Result<Output, CliError> {
    let sigma = Sigma::parse(&cfg.sigma)?;
    let table = match cfg.dim {
        1 => verify_counting_1d(&sigma, cfg.n, &cfg.ms)?,
        2 => verify_counting_scaling(&sigma, cfg.n, &cfg.ms, cfg.samples, cfg.seed)?,
        d => return Err(CliError::Config(format!("counting runs in dim 1 or 2, got {d}"))),
    };
    Ok(Output { config: to_value(&cfg), result: to_value(&table), csv: Some(table.to_csv()), pass: table.pass })
}

fn default_sigma_modulation() -> String {
    "1,-2,-3".into()
}
fn default_modulation_n() -> u64 {
    32
}
fn default_relation() -> String {
    "1,2;3".into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModulationCfg {
    #[serde(default = "default_sigma_modulation")]
    sigma: String,
    #[serde(default = "one")]
    dim: u32,
    #[serde(rename = "N", default = "default_modulation_n")]
    n: u64,
    /// `"i,j;k"` (1-based, `|xi_i| ~ |xi_j| >> |xi_k|`) or `"all"`.
    #[serde(default = "default_relation")]
    relation: String,
    /// Skip the hypothesis checks.
    #[serde(default)]
    unguarded: bool,
    #[serde(default)]
    seed: u64,
}

fn parse_relation(text: &str) -> Result<Relation, CliError> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("all") {
        return Ok(Relation::AllComparable);
    }
    let bad = || CliError::Config(format!("relation must be \"i,j;k\" or \"all\", got {text:?}"));
    let (pair, low) = t.split_once(';').ok_or_else(bad)?;
    let (i, j) = pair.split_once(',').ok_or_else(bad)?;
    let idx = |s: &str| -> Result<usize, CliError> {
        match s.trim().parse::<usize>() {
            Ok(v @ 1..=3) => Ok(v - 1),
            _ => Err(bad()),
        }
    };
    Ok(Relation::TwoCompHigh { i: idx(i)?, j: idx(j)?, k: idx(low)? })
}

fn modulation_csv(r: &ModulationResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["c_min", "triples", "xi1", "xi2", "xi3"]).expect("in-memory write");
    let pt = |v: &Vec<i64>| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
    w.write_record([r.c_min.to_string(), r.triples.to_string(), pt(&r.argmin[0]), pt(&r.argmin[1]), pt(&r.argmin[2])])
        .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn verify_modulation(cfg: ModulationCfg) -> Result<Output, CliError> {
    let fc = FrequencyConfig {
        sigma: Sigma::parse(&cfg.sigma)?,
        d: cfg.dim as usize,
        n: cfg.n,
        relation: parse_relation(&cfg.relation)?,
    };
    let r = if cfg.unguarded { modulation_scan(&fc)? } else { check_modulation_bound(&fc)? };
    let pass = cfg.unguarded || r.c_min > 0.0;
    Ok(Output { config: to_value(&cfg), result: to_value(&r), csv: Some(modulation_csv(&r)), pass })
}

fn default_cross_case() -> String {
    "NI_bg_pos_s".into()
}
fn default_cross_n() -> i64 {
    8
}
fn half() -> f64 {
    0.5
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrosscheckCfg {
    #[serde(default = "default_cross_case")]
    case: String,
    #[serde(rename = "N", default = "default_cross_n")]
    n: i64,
    #[serde(default = "half")]
    s: f64,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    coefficients: Option<String>,
    #[serde(default)]
    convergent: Option<usize>,
    #[serde(default)]
    steps_per_unit: Option<f64>,
    /// Overrides the case's final time.
    #[serde(rename = "T", default)]
    t_end: Option<f64>,
    #[serde(default = "default_stride")]
    stride: usize,
    #[serde(default)]
    seed: u64,
}

fn crosscheck(cfg: CrosscheckCfg) -> Result<Output, CliError> {
    let case = ExperimentCase::parse(&cfg.case)?;
    let mut params = ExperimentParams::new(Some(cfg.n), cfg.s, cfg.delta);
    params.coefficients = cfg.coefficients.clone();
    params.convergent = cfg.convergent;
    if let Some(k) = cfg.steps_per_unit {
        params.steps_per_unit = k;
    }
    let setup = case_setup(case, &params)?;
    let t_end = cfg.t_end.unwrap_or(setup.t_final);
    let pw = setup.plus;
    let b = pw.frequencies().iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(1).max(1);
    let sc = SolverConfig::for_bandlimit(b).with_dt(setup.dt).with_stride(cfg.stride);
    let diff = crosscheck_pde_vs_ode(&pw, &setup.c, t_end, sc)?;
    let mut it = Integrator::new(&setup.c, sc, 1, b)?;
    let st = make_ansatz(&pw, b, 1)?;
    let tr = it.run(&st, t_end).map_err(|e| CliError::Failed(e.to_string()))?;
    let mass = tr.states.iter().map(|s| off_subspace_mass(s, &pw)).fold(0.0, f64::max);
    let result = json!({
        "p": pw.p,
        "q": pw.q,
        "T": t_end,
        "dt": sc.dt,
        "max_abs_diff": diff,
        "off_subspace_mass": mass,
    });
    Ok(Output {
        config: to_value(&cfg),
        result,
        csv: Some(tr.to_csv(&[(0, 0, vec![pw.p]), (1, 0, vec![pw.p - pw.q]), (2, 0, vec![pw.q])])),
        pass: diff <= CROSSCHECK_MAX && mass <= OFF_SUBSPACE_MAX,
    })
}

//! Scripted norm-inflation and non-uniform-continuity constructions on plane-wave triples.
//!
//! Each run builds the initial data of a construction, predicts the target norm from
//! the rescaled phase-plane orbit, evolves the data with the amplitude ODE or the full
//! PDE solver, and compares. Norms are computed with `<xi>^s`; closed forms written
//! with `|xi|^s` pick up the factor `(<N>/N)^s`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diophantine::{convergents, convergents_surd, Convergent};
use crate::error::{domain, invalid, Error, Result};
use crate::pde_solver::{Integrator, SolverConfig};
use crate::planewave_ode::{
    hitting_time, make_ansatz, ode_integrate_strided, Amplitudes, ExperimentCase, HEquation,
    PlaneWaveTriple, Reduction, Tracked,
};
use crate::resonance::{resonance_k_roots, resonance_k_surds, sign_pattern, CoefficientTriple, Sign};
use crate::spectral_field::{SpectralField, SystemState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Pinned bracket for the terminal `w` distance of the irrational-root pair, fitted on
/// `(2,1,1)`, `s = 1/2`, `delta = 0.05`, convergents 4 to 8.
pub const IRRATIONAL_PAIR_BRACKET: [f64; 2] = [1.40, 1.82];

/// Bound on the fitted Gronwall constant.
pub const GRONWALL_C_MAX: f64 = 10.0;

/// Slack on the upper end of a bracket whose endpoint is an exact value.
const BRACKET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Ode,
    Pde,
}

impl Level {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "ode" => Ok(Level::Ode),
            "pde" => Ok(Level::Pde),
            _ => invalid(format!("unknown level {text:?}, expected ode or pde")),
        }
    }
}

/// Inputs of one run. Unset values take the per-case defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentParams {
    /// Frequency scale `N`.
    #[serde(default, rename = "N")]
    pub n: Option<i64>,
    pub s: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    /// `"alpha,beta,gamma"`.
    #[serde(default)]
    pub coefficients: Option<String>,
    /// Position (from 1) of the convergent `p/q` in the list with increasing denominators.
    #[serde(default)]
    pub convergent: Option<usize>,
    /// Index into the resonance roots; by default the first root other than 0 and 1.
    #[serde(default)]
    pub root: Option<usize>,
    /// Integration steps per unit of rescaled time.
    #[serde(default = "default_steps")]
    pub steps_per_unit: f64,
}

fn default_steps() -> f64 {
    1000.0
}

impl ExperimentParams {
    pub fn new(n: Option<i64>, s: f64, delta: Option<f64>) -> Self {
        Self { n, s, delta, coefficients: None, convergent: None, root: None, steps_per_unit: default_steps() }
    }

    pub fn with_coefficients(mut self, c: &str) -> Self {
        self.coefficients = Some(c.to_string());
        self
    }

    pub fn with_convergent(mut self, n: usize) -> Self {
        self.convergent = Some(n);
        self
    }

    fn triple(&self, default: &str) -> Result<CoefficientTriple> {
        CoefficientTriple::parse(self.coefficients.as_deref().unwrap_or(default))
    }

    fn big_n(&self) -> Result<i64> {
        match self.n {
            Some(n) if n >= 2 => Ok(n),
            Some(n) => invalid(format!("N must be at least 2, got {n}")),
            None => invalid("this case needs N"),
        }
    }
}

/// Parameters as run, echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    #[serde(rename = "N")]
    pub n: Option<i64>,
    pub p: i64,
    pub q: i64,
    pub s: f64,
    pub delta: f64,
    pub coefficients: [f64; 3],
    pub k: Option<f64>,
    pub convergent: Option<usize>,
    /// `|k - p/q|` for the convergent.
    pub convergent_err: Option<f64>,
}

/// Separation data of a pair of solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub initial_distance: f64,
    pub predicted_initial_distance: f64,
    /// Rescaled hitting times of the two members.
    pub t_star_plus: f64,
    pub t_star_minus: f64,
    pub bracket: Option<[f64; 2]>,
    /// Sum over `u, v, w` of the distances at `T`.
    pub terminal_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub case: ExperimentCase,
    pub level: Level,
    pub params: ReportParams,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub t_bound: f64,
    pub predicted_norm: f64,
    pub measured_norm: f64,
    /// Relative tolerance on `measured` against `predicted`, if the comparison is scored.
    pub tolerance: Option<f64>,
    pub initial_norms: [f64; 3],
    pub predicted_initial_norms: [f64; 3],
    pub pair: Option<PairSummary>,
    pub pass: bool,
    pub notes: String,
}

impl ExperimentReport {
    pub fn relative_error(&self) -> f64 {
        (self.measured_norm - self.predicted_norm).abs() / self.predicted_norm.abs()
    }
}

fn jb(k: i64) -> f64 {
    (1.0 + (k as f64) * (k as f64)).sqrt()
}

/// `(<k>/|k|)^s`, the factor between the two weight conventions.
fn corr(k: i64, s: f64) -> f64 {
    (jb(k) / (k.unsigned_abs() as f64)).powf(s)
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn field_index(t: Tracked) -> usize {
    match t {
        Tracked::F => 0,
        Tracked::G => 1,
        Tracked::H => 2,
    }
}

/// Everything a run needs besides the evolution itself.
struct Construction {
    case: ExperimentCase,
    c: CoefficientTriple,
    params: ReportParams,
    plus: PlaneWaveTriple,
    /// Partner of a pair; `None` for single runs.
    minus: Option<PlaneWaveTriple>,
    /// Amplitudes of a reference solution that stays constant (same modes as `plus`).
    reference: Option<Amplitudes>,
    tracked: Tracked,
    /// Phase-plane target of `plus` (the partner's is `-target`).
    target: f64,
    predicted_initial_norms: [f64; 3],
    predicted_initial_distance: Option<f64>,
    tolerance: Option<f64>,
    bracket: Option<[f64; 2]>,
    /// `t_bound` as a function of the physical scale of time.
    t_bound: Box<dyn Fn(&Reduction) -> f64>,
    notes: String,
}

fn check_sign(c: &CoefficientTriple, which: &str, s: Sign, want: Sign) -> Result<()> {
    if s != want {
        return invalid(format!("{which} must be {want:?} for this case, got {s:?} for {c:?}"));
    }
    Ok(())
}

fn base_params(c: &CoefficientTriple, n: Option<i64>, p: i64, q: i64, s: f64, delta: f64) -> ReportParams {
    ReportParams {
        n,
        p,
        q,
        s,
        delta,
        coefficients: [c.alpha, c.beta, c.gamma],
        k: None,
        convergent: None,
        convergent_err: None,
    }
}

fn norm_inflation_construction(case: ExperimentCase, prm: &ExperimentParams) -> Result<Construction> {
    let s = prm.s;
    let n = prm.big_n()?;
    let nf = n as f64;
    let ln_n = nf.ln();
    let check_delta = |d: f64| -> Result<f64> {
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            invalid(format!("delta must be positive, got {d}"))
        }
    };
    let eps = nf.powf(-s);
    match case {
        ExperimentCase::NiBgPosS => {
            let c = prm.triple("1,1,-1")?;
            check_sign(&c, "beta + gamma", sign_pattern(&c).beta_plus_gamma, Sign::Zero)?;
            if !(s > 0.0) {
                return invalid("this case needs s > 0");
            }
            let delta = check_delta(prm.delta.unwrap_or(1.0 / ln_n))?;
            let plus = PlaneWaveTriple::new(&c, 0, n, real(delta), ZERO, real(delta * eps))?;
            Ok(Construction {
                case,
                params: base_params(&c, Some(n), 0, n, s, delta),
                c,
                plus,
                minus: None,
                reference: None,
                tracked: Tracked::G,
                target: 1.0,
                predicted_initial_norms: [delta, 0.0, delta * corr(n, s)],
                predicted_initial_distance: None,
                tolerance: Some(0.01),
                bracket: None,
                t_bound: Box::new(move |_| 2.0 * ln_n * ln_n / nf),
                notes: "v grows to N^s delta sqrt((1 - N^-2s)/2) when the g orbit reaches x = 1; T bound 2 (log N)^2 / N"
                    .into(),
            })
        }
        ExperimentCase::NiBgNegS => {
            let c = prm.triple("1,1,-1")?;
            check_sign(&c, "beta + gamma", sign_pattern(&c).beta_plus_gamma, Sign::Zero)?;
            if !(s < 0.0) {
                return invalid("this case needs s < 0");
            }
            let delta = check_delta(prm.delta.unwrap_or(1.0 / ln_n))?;
            let a = delta * eps;
            let plus = PlaneWaveTriple::new(&c, 0, n, ZERO, real(a), real(a))?;
            Ok(Construction {
                case,
                params: base_params(&c, Some(n), 0, n, s, delta),
                c,
                plus,
                minus: None,
                reference: None,
                tracked: Tracked::F,
                target: -0.5,
                predicted_initial_norms: [0.0, delta * corr(n, s), delta * corr(n, s)],
                predicted_initial_distance: None,
                tolerance: Some(0.01),
                bracket: None,
                t_bound: Box::new(move |_| nf.powf(s - 1.0) * ln_n),
                notes: "separatrix orbit: u reaches delta N^-s / 2 at x = -1/2; T bound N^(s-1) log N".into(),
            })
        }
        ExperimentCase::DiscL2 => {
            let c = prm.triple("1,1,-1")?;
            check_sign(&c, "beta + gamma", sign_pattern(&c).beta_plus_gamma, Sign::Zero)?;
            if s != 0.0 {
                return invalid("this case needs s = 0");
            }
            let delta = check_delta(prm.delta.unwrap_or(1.0 / nf))?;
            let plus = PlaneWaveTriple::new(&c, 0, n, real(1.0 + delta), ZERO, real(delta))?;
            Ok(Construction {
                case,
                params: base_params(&c, Some(n), 0, n, s, delta),
                c,
                plus,
                minus: None,
                reference: Some([real(1.0), ZERO, ZERO]),
                tracked: Tracked::G,
                target: 1.0,
                predicted_initial_norms: [1.0 + delta, 0.0, delta],
                predicted_initial_distance: Some(2.0 * delta),
                tolerance: Some(0.01),
                bracket: Some([0.5, f64::INFINITY]),
                t_bound: Box::new(move |_| 2.0 * ln_n / nf),
                notes: "distance to the constant solution (1, 0, 0): 2 delta at t = 0, at least ||v(T)|| at T; T bound 2 log N / N"
                    .into(),
            })
        }
        ExperimentCase::NiAgNegS => {
            let c = prm.triple("1,2,1")?;
            check_sign(&c, "alpha - gamma", sign_pattern(&c).alpha_minus_gamma, Sign::Zero)?;
            if !(s < 0.0) {
                return invalid("this case needs s < 0");
            }
            let delta = check_delta(prm.delta.unwrap_or(1.0 / ln_n))?;
            let plus = PlaneWaveTriple::new(&c, n, n, real(delta * eps), real(delta), ZERO)?;
            Ok(Construction {
                case,
                params: base_params(&c, Some(n), n, n, s, delta),
                c,
                plus,
                minus: None,
                reference: None,
                tracked: Tracked::G,
                target: 1.0,
                predicted_initial_norms: [delta * corr(n, s), delta, 0.0],
                predicted_initial_distance: None,
                tolerance: Some(0.01),
                bracket: None,
                t_bound: Box::new(move |_| 2.0 * ln_n * ln_n / nf),
                notes: "g starts at its turning point and reaches x = 1; T bound 2 (log N)^2 / N".into(),
            })
        }
        _ => invalid(format!("{} is not a norm-inflation case", case.name())),
    }
}

/// Resonance root and convergent used by the irrational-root pair.
fn pick_root(c: &CoefficientTriple, root: Option<usize>) -> Result<(usize, f64)> {
    let roots = resonance_k_roots(c);
    if roots.is_empty() {
        return domain("no real resonance root");
    }
    let near = |k: f64, v: f64| (k - v).abs() <= 1e-12 * (1.0 + v.abs());
    let idx = match root {
        Some(i) if i < roots.len() => i,
        Some(i) => return invalid(format!("root index {i} out of range, {} roots", roots.len())),
        None => roots.iter().position(|&k| !near(k, 0.0) && !near(k, 1.0)).unwrap_or(0),
    };
    let k = roots[idx];
    let k = if near(k, 0.0) {
        0.0
    } else if near(k, 1.0) {
        1.0
    } else {
        k
    };
    Ok((idx, k))
}

/// The `n`-th convergent (from 1) of resonance root `idx`, exact when the coefficients are rational.
pub fn resonance_convergent(c: &CoefficientTriple, idx: usize, n: usize) -> Result<Convergent> {
    if n == 0 {
        return invalid("convergent index counts from 1");
    }
    let list = match resonance_k_surds(c) {
        Some(surds) => convergents_surd(&surds[idx], n)?,
        None => convergents(resonance_k_roots(c)[idx], n)?,
    };
    list.get(n - 1)
        .copied()
        .ok_or_else(|| Error::Domain(format!("only {} convergents available", list.len())))
}

fn nonuniform_construction(case: ExperimentCase, prm: &ExperimentParams) -> Result<Construction> {
    let s = prm.s;
    match case {
        ExperimentCase::NuAlphaGamma => {
            let c = prm.triple("1,2,1")?;
            check_sign(&c, "alpha - gamma", sign_pattern(&c).alpha_minus_gamma, Sign::Zero)?;
            if !(s > 0.0) {
                return invalid("this case needs s > 0");
            }
            let n = prm.big_n()?;
            let delta = prm.delta.unwrap_or(0.05);
            if !(delta > 0.0) {
                return invalid("delta must be positive");
            }
            let eps = (n as f64).powf(-s);
            let plus = PlaneWaveTriple::new(&c, n, n, ZERO, real(delta), real(eps))?;
            let minus = plus.with_amplitudes([ZERO, real(-delta), real(eps)]);
            let e0 = (delta * eps / (delta * delta + eps * eps)).powi(2);
            let target = -(1.0 - (1.0 - 4.0 * e0).sqrt()).sqrt();
            // the limit 2 is reached exactly once N^-s < delta
            let saturated = (n as f64) > (delta / 2.0).powf(-1.0 / s);
            Ok(Construction {
                case,
                params: base_params(&c, Some(n), n, n, s, delta),
                c,
                plus,
                minus: Some(minus),
                reference: None,
                tracked: Tracked::F,
                target,
                predicted_initial_norms: [0.0, delta, corr(n, s)],
                predicted_initial_distance: Some(2.0 * delta),
                tolerance: Some(0.01),
                bracket: saturated.then_some([1.8, 2.0 * corr(n, s)]),
                t_bound: Box::new(move |r| FRAC_PI_2 * (1.0 - 4.0 * e0).powf(-0.25) * r.scale_time),
                notes: "u distance 2 <N>^s min(delta, N^-s) at the turning point; T bound (pi/2)(1 - 4E)^-1/4 in rescaled time"
                    .into(),
            })
        }
        ExperimentCase::NuMuNonpos => {
            let c = prm.triple("2,1,1")?;
            if sign_pattern(&c).mu == Sign::Positive {
                return invalid("this case needs mu <= 0");
            }
            let (idx, k) = pick_root(&c, prm.root)?;
            let delta = prm.delta.unwrap_or(0.05);
            if !(delta > 0.0) {
                return invalid("delta must be positive");
            }
            if k == 0.0 {
                // beta + gamma = 0: the norm-inflation constructions apply
                let routed = if s > 0.0 {
                    ExperimentCase::NiBgPosS
                } else if s < 0.0 {
                    ExperimentCase::NiBgNegS
                } else {
                    ExperimentCase::DiscL2
                };
                let mut sub = prm.clone();
                if sub.coefficients.is_none() {
                    sub.coefficients = Some(format!("{},{},{}", c.alpha, c.beta, c.gamma));
                }
                let mut con = norm_inflation_construction(routed, &sub)?;
                con.notes = format!("resonance root k = 0, routed to {}: {}", routed.name(), con.notes);
                return Ok(con);
            }
            if !(s < 1.0) {
                return invalid("this case needs s < 1");
            }
            if k == 1.0 {
                return unit_root_construction(c, prm, delta);
            }
            let ni = prm.convergent.unwrap_or(6);
            let cv = resonance_convergent(&c, idx, ni)?;
            let (p, q) = (cv.p, cv.q);
            if p == 0 || p == q {
                return domain(format!("convergent {p}/{q} puts a mode at frequency 0; pick a later one"));
            }
            let (pf, qf, rf) = ((p.unsigned_abs() as f64), (q as f64), ((p - q).unsigned_abs() as f64));
            let f0 = pf.powf(-s);
            let g0 = delta * rf.powf(-s);
            let h0 = delta * qf.powf(-s);
            let plus = PlaneWaveTriple::new(&c, p, q, real(f0), real(g0), real(h0))?;
            let minus = plus.with_amplitudes([real(f0), real(-g0), real(-h0)]);
            let mut params = base_params(&c, None, p, q, s, delta);
            params.k = Some(k);
            params.convergent = Some(ni);
            params.convergent_err = Some(cv.err);
            let ln_d = delta.ln().abs();
            Ok(Construction {
                case,
                params,
                c,
                plus,
                minus: Some(minus),
                reference: None,
                tracked: Tracked::H,
                target: 1.0,
                predicted_initial_norms: [corr(p, s), delta * corr(p - q, s), delta * corr(q, s)],
                predicted_initial_distance: Some(2.0 * delta * (corr(p - q, s) + corr(q, s))),
                tolerance: None,
                bracket: Some(IRRATIONAL_PAIR_BRACKET),
                t_bound: Box::new(move |r| 2.0 * ln_d * r.scale_time),
                notes: "w distance against sqrt(2) <q>^s sqrt(omega) of the resonant comparison; scored by the pinned bracket; T bound 2 |log delta| in rescaled time"
                    .into(),
            })
        }
        _ => invalid(format!("{} is not a non-uniform-continuity case", case.name())),
    }
}

/// Pair for the resonance root `k = 1` (`alpha = gamma`), `0 <= s < 1`.
fn unit_root_construction(c: CoefficientTriple, prm: &ExperimentParams, delta: f64) -> Result<Construction> {
    let s = prm.s;
    if !(s >= 0.0) {
        return invalid("the k = 1 pair needs s >= 0");
    }
    let n = prm.big_n()?;
    let eps = (n as f64).powf(-s);
    let plus = PlaneWaveTriple::new(&c, n, n, real(eps), real(delta * eps), real(delta * eps))?;
    let minus = plus.with_amplitudes([real(eps), real(-delta * eps), real(-delta * eps)]);
    let mut params = base_params(&c, Some(n), n, n, s, delta);
    params.k = Some(1.0);
    let ln_d = delta.ln().abs();
    Ok(Construction {
        case: ExperimentCase::NuMuNonpos,
        params,
        c,
        plus,
        minus: Some(minus),
        reference: None,
        tracked: Tracked::H,
        target: 1.0,
        predicted_initial_norms: [corr(n, s), delta * eps, delta * corr(n, s)],
        predicted_initial_distance: Some(2.0 * delta * (eps + corr(n, s))),
        tolerance: Some(0.01),
        bracket: None,
        t_bound: Box::new(move |r| 2.0 * ln_d * r.scale_time),
        notes: "resonance root k = 1: frequencies (N, 0, N), omega = (1 + delta^2) N^-2s, no oscillation term".into(),
    })
}

/// Amplitudes of the three modes at the end of a run, with the linear phases removed.
fn evolve(
    con: &Construction,
    pw: &PlaneWaveTriple,
    t_end: f64,
    dt: f64,
    level: Level,
) -> Result<(Amplitudes, Option<SystemState>)> {
    match level {
        Level::Ode => {
            let tr = ode_integrate_strided(pw, t_end, dt, usize::MAX)?;
            Ok((tr.last(), None))
        }
        Level::Pde => {
            let b = pw.frequencies().iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(1).max(1);
            let st = make_ansatz(pw, b, 1)?;
            let cfg = SolverConfig::for_bandlimit(b).with_dt(dt).with_stride(usize::MAX);
            let mut it = Integrator::new(&con.c, cfg, 1, b)?;
            let end = it.run(&st, t_end).map_err(|e| e.error)?.last().clone();
            let amps = mode_amplitudes(&end, pw, &con.c);
            Ok((amps, Some(end)))
        }
    }
}

/// Amplitudes of the triple's modes in `st`, with the linear phases removed.
pub fn mode_amplitudes(st: &SystemState, pw: &PlaneWaveTriple, c: &CoefficientTriple) -> Amplitudes {
    let t = st.time;
    let freqs = pw.frequencies();
    let sig = [c.alpha, c.beta, c.gamma];
    let fields = [&st.u, &st.v, &st.w];
    let mut out = [ZERO; 3];
    for i in 0..3 {
        let mut xi = vec![0i64; st.dim()];
        xi[0] = freqs[i];
        let a = fields[i].get(&xi)[0];
        let k2 = (freqs[i] as f64).powi(2);
        out[i] = a * Complex64::from_polar(1.0, sig[i] * k2 * t);
    }
    out
}

/// `sum <xi>^2s |a(xi) - b(xi)|^2`, square-rooted.
fn sobolev_distance(a: &SpectralField, b: &SpectralField, s: f64) -> f64 {
    let mut acc: BTreeMap<Vec<i64>, Vec<Complex64>> = BTreeMap::new();
    for (xi, v) in a.entries() {
        acc.insert(xi, v);
    }
    for (xi, v) in b.entries() {
        let e = acc.entry(xi).or_insert_with(|| vec![ZERO; v.len()]);
        for (x, y) in e.iter_mut().zip(&v) {
            *x -= y;
        }
    }
    acc.iter()
        .map(|(xi, v)| crate::spectral_field::japanese_sq(xi).powf(s) * v.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// `H^s` norms of `(u, v, w)` for amplitudes on the triple's modes.
fn amplitude_norms(pw: &PlaneWaveTriple, a: &Amplitudes, s: f64) -> [f64; 3] {
    let f = pw.frequencies();
    [0, 1, 2].map(|i| jb(f[i]).powf(s) * a[i].norm())
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * y.abs().max(1e-300) || (x - y).abs() <= 1e-300
}

fn run(con: Construction, level: Level, steps_per_unit: f64) -> Result<ExperimentReport> {
    if !(steps_per_unit >= 10.0) {
        return invalid("steps_per_unit must be at least 10");
    }
    let s = con.params.s;
    let red = Reduction::of(&con.plus, con.tracked)?;
    let t_star = hitting_time(red.variant, red.energy(), red.start.x, con.target)?;
    let t_final = t_star * red.scale_time;
    let dt = red.scale_time / steps_per_unit;
    let idx = field_index(con.tracked);
    let freq = con.plus.frequencies()[idx];
    let weight = jb(freq).powf(s);

    // initial norms, from the field representation
    let st0 = make_ansatz(&con.plus, con.plus.frequencies().iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(1), 1)?;
    let initial_norms = [st0.u.sobolev_norm(s), st0.v.sobolev_norm(s), st0.w.sobolev_norm(s)];
    let mut ok = initial_norms
        .iter()
        .zip(&con.predicted_initial_norms)
        .all(|(m, p)| rel_close(*m, *p, 1e-12));
    let mut notes = con.notes.clone();
    if !ok {
        notes.push_str("; initial norms do not match the closed forms");
    }

    let (end_plus, state_plus) = evolve(&con, &con.plus, t_final, dt, level)?;
    let (measured, predicted, pair) = if let Some(minus) = &con.minus {
        let red_m = Reduction::of(minus, con.tracked)?;
        let t_star_m = hitting_time(red_m.variant, red_m.energy(), red_m.start.x, -con.target)?;
        let (end_minus, state_minus) = evolve(&con, minus, t_final, dt, level)?;
        let measured = match (&state_plus, &state_minus) {
            (Some(a), Some(b)) => {
                let fa = [&a.u, &a.v, &a.w][idx];
                let fb = [&b.u, &b.v, &b.w][idx];
                sobolev_distance(fa, fb, s)
            }
            _ => weight * (end_plus[idx] - end_minus[idx]).norm(),
        };
        let terminal_distance: f64 = match (&state_plus, &state_minus) {
            (Some(a), Some(b)) => {
                sobolev_distance(&a.u, &b.u, s) + sobolev_distance(&a.v, &b.v, s) + sobolev_distance(&a.w, &b.w, s)
            }
            _ => amplitude_norms(&con.plus, &diff(&end_plus, &end_minus), s).iter().sum(),
        };
        let predicted = weight * 2.0 * con.target.abs() / red.scale_amp;
        let st0m = make_ansatz(minus, st0.bandlimit(), 1)?;
        let initial_distance = sobolev_distance(&st0.u, &st0m.u, s)
            + sobolev_distance(&st0.v, &st0m.v, s)
            + sobolev_distance(&st0.w, &st0m.w, s);
        let want = con.predicted_initial_distance.expect("pairs declare their initial distance");
        if !rel_close(initial_distance, want, 1e-12) {
            ok = false;
            notes.push_str("; initial distance does not match the closed form");
        }
        if (t_star - t_star_m).abs() > 1e-10 {
            ok = false;
            notes.push_str("; hitting times of the pair differ");
        }
        let pair = PairSummary {
            initial_distance,
            predicted_initial_distance: want,
            t_star_plus: t_star,
            t_star_minus: t_star_m,
            bracket: con.bracket,
            terminal_distance,
        };
        (measured, predicted, Some(pair))
    } else {
        let measured = match &state_plus {
            Some(st) => [&st.u, &st.v, &st.w][idx].sobolev_norm(s),
            None => weight * end_plus[idx].norm(),
        };
        let predicted = weight * con.target.abs() / red.scale_amp;
        let pair = con.reference.map(|r| {
            let init: f64 = amplitude_norms(&con.plus, &diff(&con.plus.amplitudes(), &r), s).iter().sum();
            let end_dist: f64 = amplitude_norms(&con.plus, &diff(&end_plus, &r), s).iter().sum();
            PairSummary {
                initial_distance: init,
                predicted_initial_distance: con.predicted_initial_distance.unwrap_or(f64::NAN),
                t_star_plus: t_star,
                t_star_minus: t_star,
                bracket: con.bracket,
                terminal_distance: end_dist,
            }
        });
        if let Some(p) = &pair {
            if !rel_close(p.initial_distance, p.predicted_initial_distance, 1e-12) {
                ok = false;
                notes.push_str("; initial distance does not match the closed form");
            }
        }
        (measured, predicted, pair)
    };
    if let Some(tol) = con.tolerance {
        ok &= rel_close(measured, predicted, tol);
    }
    if let Some([lo, hi]) = con.bracket {
        ok &= measured >= lo && measured <= hi + BRACKET_SLACK;
    }
    let t_bound = (con.t_bound)(&red);
    ok &= t_final <= t_bound;
    Ok(ExperimentReport {
        case: con.case,
        level,
        params: con.params,
        t_final,
        t_bound,
        predicted_norm: predicted,
        measured_norm: measured,
        tolerance: con.tolerance,
        initial_norms,
        predicted_initial_norms: con.predicted_initial_norms,
        pair,
        pass: ok,
        notes,
    })
}

fn diff(a: &Amplitudes, b: &Amplitudes) -> Amplitudes {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Norm inflation (or the `L^2` discontinuity) of one of the four single-solution cases.
pub fn run_norm_inflation(case: ExperimentCase, params: &ExperimentParams, level: Level) -> Result<ExperimentReport> {
    let con = norm_inflation_construction(case, params)?;
    check_level(&con, level)?;
    run(con, level, params.steps_per_unit)
}

/// A pair of solutions whose distance grows from `O(delta)` to `O(1)`.
pub fn run_nonuniform(case: ExperimentCase, params: &ExperimentParams, level: Level) -> Result<ExperimentReport> {
    let con = nonuniform_construction(case, params)?;
    check_level(&con, level)?;
    run(con, level, params.steps_per_unit)
}

/// Dispatches on the case.
pub fn run_experiment(case: ExperimentCase, params: &ExperimentParams, level: Level) -> Result<ExperimentReport> {
    match case {
        ExperimentCase::NuAlphaGamma | ExperimentCase::NuMuNonpos => run_nonuniform(case, params, level),
        _ => run_norm_inflation(case, params, level),
    }
}

/// Plane-wave data of a case, its coefficients and the run length.
#[derive(Debug, Clone)]
pub struct CaseSetup {
    pub c: CoefficientTriple,
    pub plus: PlaneWaveTriple,
    pub minus: Option<PlaneWaveTriple>,
    pub t_final: f64,
    /// Step used at `steps_per_unit`.
    pub dt: f64,
}

pub fn case_setup(case: ExperimentCase, params: &ExperimentParams) -> Result<CaseSetup> {
    let con = match case {
        ExperimentCase::NuAlphaGamma | ExperimentCase::NuMuNonpos => nonuniform_construction(case, params)?,
        _ => norm_inflation_construction(case, params)?,
    };
    let red = Reduction::of(&con.plus, con.tracked)?;
    let t_star = hitting_time(red.variant, red.energy(), red.start.x, con.target)?;
    Ok(CaseSetup {
        c: con.c,
        plus: con.plus,
        minus: con.minus,
        t_final: t_star * red.scale_time,
        dt: red.scale_time / params.steps_per_unit,
    })
}

/// Largest frequency the PDE level accepts.
pub const PDE_MAX_FREQUENCY: usize = 1024;

fn check_level(con: &Construction, level: Level) -> Result<()> {
    if level == Level::Pde {
        let b = con.plus.frequencies().iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0);
        if b > PDE_MAX_FREQUENCY {
            return invalid(format!("PDE level supports frequencies up to {PDE_MAX_FREQUENCY}, got {b}"));
        }
    }
    Ok(())
}

/// Norms stay at `O(delta)` for `alpha = gamma`, `s > 0` and data `(0, delta, delta N^-s e^{-iNx})`.
///
/// The run covers `periods` units of the time scale `1 / (delta N)`. `measured_norm` is the
/// largest `||v||_{H^s}` seen, `predicted_norm` its bound `delta`; pass iff it holds and
/// `sqrt(||u||^2 + ||w||^2)` stays at `delta (<N>/N)^s`.
pub fn run_negative_control(params: &ExperimentParams, periods: f64) -> Result<ExperimentReport> {
    let c = params.triple("1,2,1")?;
    check_sign(&c, "alpha - gamma", sign_pattern(&c).alpha_minus_gamma, Sign::Zero)?;
    let s = params.s;
    if !(s > 0.0) {
        return invalid("the control needs s > 0");
    }
    let n = params.big_n()?;
    let delta = params.delta.unwrap_or(1.0 / (n as f64).ln());
    let eps = (n as f64).powf(-s);
    let pw = PlaneWaveTriple::new(&c, -n, -n, ZERO, real(delta), real(delta * eps))?;
    let scale = 1.0 / (delta * n as f64);
    let t_final = periods * scale;
    let tr = ode_integrate_strided(&pw, t_final, scale / params.steps_per_unit, 1)?;
    let mut v_max = 0.0f64;
    let mut uw_dev = 0.0f64;
    let uw_bound = delta * corr(n, s);
    for a in &tr.amps {
        let [nu, nv, nw] = amplitude_norms(&pw, a, s);
        v_max = v_max.max(nv);
        uw_dev = uw_dev.max(((nu * nu + nw * nw).sqrt() - uw_bound).abs() / uw_bound);
    }
    let tol = 1e-8;
    let pass = v_max <= delta * (1.0 + tol) && uw_dev <= tol;
    Ok(ExperimentReport {
        case: ExperimentCase::NiAgNegS,
        level: Level::Ode,
        params: base_params(&c, Some(n), -n, -n, s, delta),
        t_final,
        t_bound: t_final,
        predicted_norm: delta,
        measured_norm: v_max,
        tolerance: Some(tol),
        initial_norms: amplitude_norms(&pw, &pw.amplitudes(), s),
        predicted_initial_norms: [0.0, delta, uw_bound],
        pair: None,
        pass,
        notes: format!(
            "negative control for s > 0: max ||v||_H^s over the run against delta; relative deviation of sqrt(||u||^2 + ||w||^2) from delta (<N>/N)^s is {uw_dev:.3e}"
        ),
    })
}

/// Largest deviation over the run between the PDE solution and the amplitude ODE, on the
/// three tracked modes after removing their linear phases.
pub fn crosscheck_pde_vs_ode(pw: &PlaneWaveTriple, c: &CoefficientTriple, t_end: f64, cfg: SolverConfig) -> Result<f64> {
    let b = pw.frequencies().iter().map(|k| k.unsigned_abs() as usize).max().unwrap_or(1).max(1);
    let st = make_ansatz(pw, b, 1)?;
    let mut it = Integrator::new(c, cfg, 1, b)?;
    let tr = it.run(&st, t_end).map_err(|e| e.error)?;
    let ode = ode_integrate_strided(pw, t_end, cfg.dt, cfg.diag_stride)?;
    if ode.times.len() != tr.states.len() {
        return domain(format!(
            "snapshot counts differ: ODE {} against PDE {}",
            ode.times.len(),
            tr.states.len()
        ));
    }
    let mut worst = 0.0f64;
    for (st, a) in tr.states.iter().zip(&ode.amps) {
        let m = mode_amplitudes(st, pw, c);
        for i in 0..3 {
            worst = worst.max((m[i] - a[i]).norm());
        }
    }
    Ok(worst)
}

/// Mass `sum |a|^2` of `st` outside the triple's three modes.
pub fn off_subspace_mass(st: &SystemState, pw: &PlaneWaveTriple) -> f64 {
    let freqs = pw.frequencies();
    let mut total = 0.0;
    for (i, f) in [&st.u, &st.v, &st.w].into_iter().enumerate() {
        for (xi, a) in f.entries() {
            let on = xi[0] == freqs[i] && xi[1..].iter().all(|&k| k == 0);
            for (j, z) in a.iter().enumerate() {
                if !(on && j == 0) {
                    total += z.norm_sqr();
                }
            }
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GronwallParams {
    #[serde(default = "default_gronwall_coeffs")]
    pub coefficients: String,
    #[serde(default)]
    pub root: Option<usize>,
    pub s: f64,
    pub delta: f64,
    /// Convergent positions (from 1).
    pub convergents: Vec<usize>,
    #[serde(default = "default_steps")]
    pub steps_per_unit: f64,
    /// Replaces the oscillation constant by zero.
    #[serde(default)]
    pub zero_oscillation: bool,
}

fn default_gronwall_coeffs() -> String {
    "2,1,1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallEntry {
    pub convergent: usize,
    pub p: i64,
    pub q: i64,
    pub c_osc: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// `max |h - h~|` over the run.
    pub max_diff: f64,
    /// `max |h - h~| / (t^2 |q|^(1-2s) exp(t^2 |q|^(2-2s)))` over `t > 0`.
    pub c_fit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub coefficients: [f64; 3],
    pub k: f64,
    pub s: f64,
    pub delta: f64,
    pub entries: Vec<GronwallEntry>,
    pub c_osc_max: f64,
    pub c_fit_max: f64,
    pub pass: bool,
}

/// Compares `h` with (`c != 0`) and without the oscillation term on the irrational-root pair.
pub fn gronwall_check(params: &GronwallParams) -> Result<GronwallReport> {
    let c = CoefficientTriple::parse(&params.coefficients)?;
    if sign_pattern(&c).mu == Sign::Positive {
        return invalid("the comparison needs mu <= 0");
    }
    let (idx, k) = pick_root(&c, params.root)?;
    if k == 0.0 || k == 1.0 {
        return invalid("the comparison needs a resonance root other than 0 and 1");
    }
    let (s, delta) = (params.s, params.delta);
    if !(delta > 0.0) || !(s < 1.0) {
        return invalid("the comparison needs delta > 0 and s < 1");
    }
    if params.convergents.is_empty() {
        return invalid("no convergents requested");
    }
    let mut entries = Vec::new();
    for &ni in &params.convergents {
        let prm = ExperimentParams {
            convergent: Some(ni),
            root: Some(idx),
            coefficients: Some(params.coefficients.clone()),
            ..ExperimentParams::new(None, s, Some(delta))
        };
        let con = nonuniform_construction(ExperimentCase::NuMuNonpos, &prm)?;
        let mut pw = con.plus;
        if params.zero_oscillation {
            pw = pw.with_c_osc(0.0);
        }
        let red = Reduction::of(&pw, Tracked::H)?;
        let t_star = hitting_time(red.variant, red.energy(), red.start.x, 1.0)?;
        let t_final = t_star * red.scale_time;
        let dt = red.scale_time / params.steps_per_unit;
        let eq = HEquation::from_triple(&pw);
        let eq0 = HEquation { c_osc: 0.0, ..eq };
        let dh0 = pw.rhs(0.0, &pw.amplitudes())[2];
        let a = eq.integrate(pw.h, dh0, t_final, dt)?;
        let b = eq0.integrate(pw.h, dh0, t_final, dt)?;
        let qa = (pw.q as f64).abs();
        let mut max_diff = 0.0f64;
        let mut c_fit = 0.0f64;
        for ((t, x), (_, y)) in a.iter().zip(&b) {
            let d = (x - y).norm();
            max_diff = max_diff.max(d);
            if *t > 0.0 {
                let bound = t * t * qa.powf(1.0 - 2.0 * s) * (t * t * qa.powf(2.0 - 2.0 * s)).exp();
                c_fit = c_fit.max(d / bound);
            }
        }
        entries.push(GronwallEntry { convergent: ni, p: pw.p, q: pw.q, c_osc: pw.c_osc(), t_final, max_diff, c_fit });
    }
    let c_osc_max = entries.iter().map(|e| e.c_osc.abs()).fold(0.0, f64::max);
    let c_fit_max = entries.iter().map(|e| e.c_fit).fold(0.0, f64::max);
    Ok(GronwallReport {
        coefficients: [c.alpha, c.beta, c.gamma],
        k,
        s,
        delta,
        entries,
        c_osc_max,
        c_fit_max,
        pass: c_fit_max <= GRONWALL_C_MAX && c_osc_max <= GRONWALL_C_MAX,
    })
}

/// One item of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepItem {
    pub case: ExperimentCase,
    #[serde(default = "default_level")]
    pub level: Level,
    #[serde(flatten)]
    pub params: ExperimentParams,
}

fn default_level() -> Level {
    Level::Ode
}

/// Worker count from `DNLS_LAB_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("DNLS_LAB_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs every item, in parallel, returning results in input order.
pub fn run_sweep(items: &[SweepItem]) -> Result<Vec<Result<ExperimentReport>>> {
    let work = || -> Vec<Result<ExperimentReport>> {
        items.par_iter().map(|it| run_experiment(it.case, &it.params, it.level)).collect()
    };
    match thread_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}

/// Flat CSV with one row per report.
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "N", "s", "delta", "T", "predicted", "measured", "pass"]).expect("in-memory write");
    for r in reports {
        let n = match r.params.n {
            Some(n) => n.to_string(),
            None => r.params.q.to_string(),
        };
        w.write_record([
            r.case.name().to_string(),
            n,
            r.params.s.to_string(),
            r.params.delta.to_string(),
            r.t_final.to_string(),
            r.predicted_norm.to_string(),
            r.measured_norm.to_string(),
            r.pass.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

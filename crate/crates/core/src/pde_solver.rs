//! Pseudo-spectral integration of the full system on `T^1` and `T^2`.
//!
//! First-order form:
//!
//! ```text
//! u_t = i alpha Lap u + i (div w) v
//! v_t = i beta  Lap v + i (div conj w) u
//! w_t = i gamma Lap w - i grad(u . conj v)
//! ```
//!
//! Time stepping is integrating-factor (Lawson) RK4: the linear part is applied
//! exactly as `exp(-i sigma |xi|^2 t)`, and products are formed on a grid large
//! enough that no alias lands inside the retained band.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Grid;
use crate::resonance::CoefficientTriple;
use crate::spectral_field::{charge_q, energy_h, norm_sq, SpectralField, SystemState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    /// Grid points per axis (power of two).
    pub grid_modes: usize,
    /// Fraction of the grid's Nyquist band that may carry energy.
    #[serde(default = "default_dealias")]
    pub dealias: f64,
    /// Steps between recorded snapshots.
    #[serde(default = "default_stride")]
    pub diag_stride: usize,
    /// Switches the quadratic terms off; the step then reduces to the exact linear flow.
    #[serde(default = "default_true")]
    pub nonlinear: bool,
}

fn default_dealias() -> f64 {
    2.0 / 3.0
}

fn default_stride() -> usize {
    50
}

fn default_true() -> bool {
    true
}

impl SolverConfig {
    /// Grid sized for band limit `b` (alias-free products), `dt = 0.1 / b^2`.
    pub fn for_bandlimit(b: usize) -> Self {
        let b = b.max(1);
        Self {
            dt: 0.1 / (b * b) as f64,
            grid_modes: (3 * b + 1).next_power_of_two().max(4),
            dealias: default_dealias(),
            diag_stride: default_stride(),
            nonlinear: true,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.diag_stride = stride;
        self
    }

    /// Largest band limit the grid supports under the de-aliasing fraction.
    pub fn max_bandlimit(&self) -> usize {
        (self.dealias * self.grid_modes as f64 / 2.0 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if self.grid_modes < 4 || !self.grid_modes.is_power_of_two() {
            return invalid(format!("grid_modes must be a power of two >= 4, got {}", self.grid_modes));
        }
        if !(self.dealias > 0.0 && self.dealias <= 1.0) {
            return invalid(format!("dealias must lie in (0, 1], got {}", self.dealias));
        }
        if self.diag_stride == 0 {
            return invalid("diag_stride must be positive");
        }
        Ok(())
    }
}

/// Spectral data of all components on the grid, `3 * d` arrays in the order
/// `u_0..u_{d-1}, v_0.., w_0..`.
#[derive(Clone)]
struct GridState {
    comps: Vec<Vec<Complex64>>,
}

impl GridState {
    fn axpy(&self, s: Complex64, k: &GridState) -> GridState {
        GridState {
            comps: self
                .comps
                .iter()
                .zip(&k.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * s).collect())
                .collect(),
        }
    }

    fn finite(&self) -> bool {
        self.comps.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Time stepper bound to one state shape. Owns its FFT workspace.
pub struct Integrator {
    c: CoefficientTriple,
    cfg: SolverConfig,
    d: usize,
    bandlimit: usize,
    grid: Grid,
    /// `|xi|^2` per grid slot.
    k2: Vec<f64>,
    /// Frequency vector per grid slot.
    freqs: Vec<[i64; 2]>,
    /// Retained-band mask per grid slot.
    mask: Vec<bool>,
    // scratch
    div_w: Vec<Complex64>,
    phys: Vec<Vec<Complex64>>,
    prod: Vec<Complex64>,
}

impl Integrator {
    pub fn new(c: &CoefficientTriple, cfg: SolverConfig, dim: usize, bandlimit: usize) -> Result<Self> {
        cfg.validate()?;
        if dim != 1 && dim != 2 {
            return invalid(format!("the solver runs in d = 1 or 2, got {dim}"));
        }
        if bandlimit > cfg.max_bandlimit() {
            return invalid(format!(
                "band limit {bandlimit} exceeds {} allowed by {} grid modes at dealias {}",
                cfg.max_bandlimit(),
                cfg.grid_modes,
                cfg.dealias
            ));
        }
        let grid = Grid::new(dim, cfg.grid_modes);
        let n = grid.len();
        let freqs: Vec<[i64; 2]> = (0..n).map(|i| grid.freq(i)).collect();
        let k2 = freqs.iter().map(|f| norm_sq(&f[..dim]) as f64).collect();
        let b = bandlimit as i64;
        let mask = freqs.iter().map(|f| f[..dim].iter().all(|k| k.abs() <= b)).collect();
        Ok(Self {
            c: c.clone(),
            cfg,
            d: dim,
            bandlimit,
            grid,
            k2,
            freqs,
            mask,
            div_w: vec![ZERO; n],
            phys: vec![vec![ZERO; n]; 2 * dim],
            prod: vec![ZERO; n],
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    fn check_shape(&self, st: &SystemState) -> Result<()> {
        if st.dim() != self.d || st.bandlimit() != self.bandlimit {
            return invalid(format!(
                "state has shape (d={}, B={}), integrator expects (d={}, B={})",
                st.dim(),
                st.bandlimit(),
                self.d,
                self.bandlimit
            ));
        }
        Ok(())
    }

    fn load(&self, st: &SystemState) -> GridState {
        let mut comps = Vec::with_capacity(3 * self.d);
        for f in [&st.u, &st.v, &st.w] {
            for j in 0..self.d {
                let mut buf = self.grid.zeros();
                f.fill_grid(j, &self.grid, &mut buf);
                comps.push(buf);
            }
        }
        GridState { comps }
    }

    fn store(&self, g: &GridState, time: f64) -> SystemState {
        let mut fields = Vec::with_capacity(3);
        for which in 0..3 {
            let mut f = SpectralField::zeros(self.d, self.bandlimit);
            let mut buf = vec![ZERO; self.d];
            for idx in 0..self.grid.len() {
                if !self.mask[idx] {
                    continue;
                }
                let mut any = false;
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = g.comps[which * self.d + j][idx];
                    any |= *b != ZERO;
                }
                if any {
                    f.set(&self.freqs[idx][..self.d], &buf).expect("masked slot is in band");
                }
            }
            fields.push(f);
        }
        let w = fields.pop().expect("three fields");
        let v = fields.pop().expect("three fields");
        let u = fields.pop().expect("three fields");
        SystemState { u, v, w, time }
    }

    /// Multiplies every component by its linear propagator over time `t`.
    fn propagate(&self, g: &mut GridState, t: f64) {
        let sig = [self.c.alpha, self.c.beta, self.c.gamma];
        for (ci, comp) in g.comps.iter_mut().enumerate() {
            let s = sig[ci / self.d];
            for (z, k2) in comp.iter_mut().zip(&self.k2) {
                if *z != ZERO {
                    *z *= Complex64::from_polar(1.0, -s * k2 * t);
                }
            }
        }
    }

    /// Quadratic terms `(N_u, N_v, N_w)` of the first-order form, restricted to the band.
    fn nonlinear_terms(&mut self, g: &GridState) -> GridState {
        let d = self.d;
        let n = self.grid.len();
        if !self.cfg.nonlinear {
            return GridState { comps: vec![vec![ZERO; n]; 3 * d] };
        }
        // div w in physical space
        self.div_w.iter_mut().for_each(|z| *z = ZERO);
        for j in 0..d {
            for (idx, z) in self.div_w.iter_mut().enumerate() {
                *z += I * self.freqs[idx][j] as f64 * g.comps[2 * d + j][idx];
            }
        }
        let mut div_w = std::mem::take(&mut self.div_w);
        self.grid.inverse(&mut div_w);
        // u and v in physical space
        let mut phys = std::mem::take(&mut self.phys);
        for j in 0..d {
            phys[j].copy_from_slice(&g.comps[j]);
            self.grid.inverse(&mut phys[j]);
            phys[d + j].copy_from_slice(&g.comps[d + j]);
            self.grid.inverse(&mut phys[d + j]);
        }
        let mut out = Vec::with_capacity(3 * d);
        // N_u = i (div w) v
        for j in 0..d {
            let mut buf: Vec<Complex64> = div_w.iter().zip(&phys[d + j]).map(|(a, b)| I * a * b).collect();
            self.grid.forward(&mut buf);
            out.push(buf);
        }
        // N_v = i conj(div w) u
        for j in 0..d {
            let mut buf: Vec<Complex64> =
                div_w.iter().zip(&phys[j]).map(|(a, b)| I * a.conj() * b).collect();
            self.grid.forward(&mut buf);
            out.push(buf);
        }
        // N_w = -i grad(u . conj v): coefficient -i (i xi_j) b = xi_j b
        let mut prod = std::mem::take(&mut self.prod);
        prod.iter_mut().for_each(|z| *z = ZERO);
        for j in 0..d {
            for ((p, a), b) in prod.iter_mut().zip(&phys[j]).zip(&phys[d + j]) {
                *p += a * b.conj();
            }
        }
        self.grid.forward(&mut prod);
        for j in 0..d {
            out.push(prod.iter().enumerate().map(|(idx, b)| b * self.freqs[idx][j] as f64).collect());
        }
        for comp in out.iter_mut() {
            for (z, keep) in comp.iter_mut().zip(&self.mask) {
                if !keep {
                    *z = ZERO;
                }
            }
        }
        self.div_w = div_w;
        self.phys = phys;
        self.prod = prod;
        GridState { comps: out }
    }

    /// One Lawson RK4 step of signed length `h`.
    fn lawson_step(&mut self, y: &GridState, h: f64) -> GridState {
        let half = Complex64::new(0.5 * h, 0.0);
        let k1 = self.nonlinear_terms(y);
        let mut e_y = y.clone();
        self.propagate(&mut e_y, 0.5 * h);
        let mut e_k1 = k1.clone();
        self.propagate(&mut e_k1, 0.5 * h);
        let a = e_y.axpy(half, &e_k1);
        let k2 = self.nonlinear_terms(&a);
        let b = e_y.axpy(half, &k2);
        let k3 = self.nonlinear_terms(&b);
        let mut e_k3 = k3.clone();
        self.propagate(&mut e_k3, 0.5 * h);
        let mut c = y.clone();
        self.propagate(&mut c, h);
        let c = c.axpy(Complex64::new(h, 0.0), &e_k3);
        let k4 = self.nonlinear_terms(&c);
        // y_{n+1} = E(h) y + h/6 (E(h) k1 + 2 E(h/2) (k2 + k3) + k4)
        let mut acc = y.axpy(Complex64::new(h / 6.0, 0.0), &k1);
        self.propagate(&mut acc, 0.5 * h);
        let acc = acc.axpy(Complex64::new(h / 3.0, 0.0), &k2).axpy(Complex64::new(h / 3.0, 0.0), &k3);
        let mut acc = acc;
        self.propagate(&mut acc, 0.5 * h);
        acc.axpy(Complex64::new(h / 6.0, 0.0), &k4)
    }

    /// Quadratic terms of `st` as fields.
    pub fn nonlinearity(&mut self, st: &SystemState) -> Result<SystemState> {
        self.check_shape(st)?;
        let g = self.load(st);
        let n = self.nonlinear_terms(&g);
        Ok(self.store(&n, st.time))
    }

    /// Advances `st` by a signed step `h`.
    pub fn step_by(&mut self, st: &SystemState, h: f64) -> Result<SystemState> {
        self.check_shape(st)?;
        let y = self.load(st);
        let next = self.lawson_step(&y, h);
        if !next.finite() {
            return Err(Error::Diverged { step: 1, time: st.time + h });
        }
        Ok(self.store(&next, st.time + h))
    }

    /// Advances `st` by the configured `dt`.
    pub fn step(&mut self, st: &SystemState) -> Result<SystemState> {
        self.step_by(st, self.cfg.dt)
    }

    /// Integrates from `st.time` over a duration `t_span` (negative runs backwards).
    pub fn run(&mut self, st: &SystemState, t_span: f64) -> std::result::Result<Trajectory, Diverged> {
        let shape_err = |e: Error| Diverged { error: e, last: st.clone() };
        self.check_shape(st).map_err(shape_err)?;
        let dt = self.cfg.dt;
        let steps = ((t_span.abs() / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let sign = t_span.signum();
        let t0 = st.time;
        let mut y = self.load(st);
        let mut traj = Trajectory::default();
        traj.record(st.clone(), &self.c);
        let mut t = t0;
        for n in 0..steps {
            let h = if n + 1 == steps { t0 + t_span - t } else { sign * dt };
            let next = self.lawson_step(&y, h);
            let t_next = if n + 1 == steps { t0 + t_span } else { t0 + sign * dt * (n + 1) as f64 };
            if !next.finite() {
                return Err(Diverged {
                    error: Error::Diverged { step: n + 1, time: t_next },
                    last: self.store(&y, t),
                });
            }
            y = next;
            t = t_next;
            if (n + 1) % self.cfg.diag_stride == 0 || n + 1 == steps {
                traj.record(self.store(&y, t), &self.c);
            }
        }
        Ok(traj)
    }
}

/// Failure of an integration, carrying the last finite state.
#[derive(Debug, Clone)]
pub struct Diverged {
    pub error: Error,
    pub last: SystemState,
}

impl std::fmt::Display for Diverged {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (last finite state at t = {})", self.error, self.last.time)
    }
}

impl std::error::Error for Diverged {}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<SystemState>,
    pub q_series: Vec<f64>,
    pub h_series: Vec<f64>,
}

impl Trajectory {
    fn record(&mut self, st: SystemState, c: &CoefficientTriple) {
        self.q_series.push(charge_q(&st));
        self.h_series.push(energy_h(&st, c));
        self.states.push(st);
    }

    pub fn last(&self) -> &SystemState {
        self.states.last().expect("trajectory records the initial state")
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    /// Largest relative deviation of Q from its initial value.
    pub fn q_drift(&self) -> f64 {
        rel_drift(&self.q_series)
    }

    /// Same for H.
    pub fn h_drift(&self) -> f64 {
        rel_drift(&self.h_series)
    }

    /// CSV with `t, Q, H` and the real and imaginary parts of each tracked mode.
    /// A mode is `(field, component, xi)` with field 0, 1, 2 for u, v, w.
    pub fn to_csv(&self, modes: &[(usize, usize, Vec<i64>)]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string(), "Q".to_string(), "H".to_string()];
        for (f, comp, xi) in modes {
            let name = ["u", "v", "w"][*f];
            let tag = xi.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("_");
            header.push(format!("re_{name}{comp}_{tag}"));
            header.push(format!("im_{name}{comp}_{tag}"));
        }
        w.write_record(&header).expect("in-memory write");
        for ((st, q), h) in self.states.iter().zip(&self.q_series).zip(&self.h_series) {
            let mut row = vec![st.time.to_string(), q.to_string(), h.to_string()];
            for (f, comp, xi) in modes {
                let field = [&st.u, &st.v, &st.w][*f];
                let z = field.get(xi).get(*comp).copied().unwrap_or(ZERO);
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn rel_drift(series: &[f64]) -> f64 {
    let Some(&x0) = series.first() else { return 0.0 };
    let worst = series.iter().map(|x| (x - x0).abs()).fold(0.0, f64::max);
    if x0 == 0.0 {
        worst
    } else {
        worst / x0.abs()
    }
}

/// One step of length `cfg.dt`.
pub fn step_ifrk4(st: &SystemState, c: &CoefficientTriple, cfg: SolverConfig) -> Result<SystemState> {
    Integrator::new(c, cfg, st.dim(), st.bandlimit())?.step(st)
}

/// Integrates to `st.time + t_end`, recording Q and H every `cfg.diag_stride` steps.
pub fn integrate(
    st: &SystemState,
    c: &CoefficientTriple,
    t_end: f64,
    cfg: SolverConfig,
) -> std::result::Result<Trajectory, Diverged> {
    if !(t_end > 0.0) {
        return Err(Diverged { error: Error::InvalidParameter("T must be positive".into()), last: st.clone() });
    }
    let mut it = Integrator::new(c, cfg, st.dim(), st.bandlimit()).map_err(|e| Diverged { error: e, last: st.clone() })?;
    it.run(st, t_end)
}

/// Observed order of accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConvergenceOrder {
    /// Errors are at rounding level: the problem is integrated exactly.
    Exact,
    Observed(f64),
}

/// Least-squares slope of `log(error)` against `log(dt)`, errors measured against
/// the run with the finest step.
pub fn convergence_order(
    st: &SystemState,
    c: &CoefficientTriple,
    t_end: f64,
    dt_list: &[f64],
    base: SolverConfig,
) -> Result<ConvergenceOrder> {
    if dt_list.len() < 3 {
        return invalid("convergence study needs at least three step sizes");
    }
    let mut dts = dt_list.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    if dts.iter().any(|d| !(*d > 0.0)) {
        return invalid("step sizes must be positive");
    }
    let r0 = dts[0] / dts[1];
    for w in dts.windows(2) {
        if ((w[0] / w[1]) / r0 - 1.0).abs() > 1e-9 || r0 <= 1.0 {
            return invalid("step sizes must form a strictly geometric progression");
        }
    }
    let finals: Result<Vec<SystemState>> = dts
        .iter()
        .map(|&dt| {
            integrate(st, c, t_end, base.with_dt(dt).with_stride(usize::MAX))
                .map(|t| t.last().clone())
                .map_err(|e| e.error)
        })
        .collect();
    let finals = finals?;
    let reference = finals.last().expect("non-empty");
    let scale = reference.total_l2_sq().sqrt().max(1e-300);
    let errs: Vec<f64> = finals[..finals.len() - 1].iter().map(|s| s.max_abs_diff(reference) / scale).collect();
    if errs.iter().all(|e| *e <= 1e-13) {
        return Ok(ConvergenceOrder::Exact);
    }
    let xs: Vec<f64> = dts[..dts.len() - 1].iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(ConvergenceOrder::Observed(sxy / sxx))
}

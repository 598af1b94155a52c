//! Plane-wave reduction of the system.
//!
//! With `u = f e^{-i t alpha p^2} e^{i p x_1}`, `v = g e^{-i t beta (p-q)^2} e^{i (p-q) x_1}`
//! and `w = h e^{-i t gamma q^2} e^{i q x_1}` (first vector components), the system
//! closes on the amplitudes:
//!
//! ```text
//! f' = -q g h e^{i t c},   g' = q f conj(h) e^{-i t c},   h' = q f conj(g) e^{-i t c}
//! ```
//!
//! where `c = alpha p^2 - beta (p-q)^2 - gamma q^2`. Both `|f|^2 + |g|^2` and
//! `|f|^2 + |h|^2` are invariants.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::quad;
use crate::resonance::CoefficientTriple;
use crate::spectral_field::{SpectralField, SystemState};

pub type Amplitudes = [Complex64; 3];

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWaveTriple {
    pub p: i64,
    pub q: i64,
    pub f: Complex64,
    pub g: Complex64,
    pub h: Complex64,
    c_osc: f64,
    coupling: f64,
}

impl PlaneWaveTriple {
    pub fn new(
        c: &CoefficientTriple,
        p: i64,
        q: i64,
        f: Complex64,
        g: Complex64,
        h: Complex64,
    ) -> Result<Self> {
        if q == 0 {
            return invalid("the frequency q of w must be nonzero");
        }
        Ok(Self { p, q, f, g, h, c_osc: c.oscillation(p, q), coupling: q as f64 })
    }

    /// Oscillation constant `alpha p^2 - beta (p-q)^2 - gamma q^2`.
    pub fn c_osc(&self) -> f64 {
        self.c_osc
    }

    /// Coupling factor multiplying the quadratic terms (the signed frequency `q`).
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// Copy with the oscillation constant overridden. Used to compare the
    /// oscillatory reduction with its resonant counterpart.
    pub fn with_c_osc(mut self, c_osc: f64) -> Self {
        self.c_osc = c_osc;
        self
    }

    pub fn with_amplitudes(mut self, a: Amplitudes) -> Self {
        [self.f, self.g, self.h] = a;
        self
    }

    pub fn amplitudes(&self) -> Amplitudes {
        [self.f, self.g, self.h]
    }

    /// Derivative of the amplitudes `a` at time `t`.
    pub fn rhs(&self, t: f64, a: &Amplitudes) -> Amplitudes {
        let [f, g, h] = *a;
        let e = Complex64::from_polar(1.0, t * self.c_osc);
        let n = self.coupling;
        [-n * g * h * e, n * f * h.conj() * e.conj(), n * f * g.conj() * e.conj()]
    }

    /// Lattice frequencies of `u`, `v`, `w`.
    pub fn frequencies(&self) -> [i64; 3] {
        [self.p, self.p - self.q, self.q]
    }
}

/// Derivative of the stored amplitudes at time `t`.
pub fn ode_rhs(pw: &PlaneWaveTriple, t: f64) -> Amplitudes {
    pw.rhs(t, &pw.amplitudes())
}

/// Initial state of the full system in `d` dimensions carrying the triple on the
/// first axis and first vector component.
pub fn make_ansatz(pw: &PlaneWaveTriple, bandlimit: usize, dim: usize) -> Result<SystemState> {
    if dim == 0 {
        return invalid("dimension must be positive");
    }
    let [pu, pv, pw_] = pw.frequencies();
    let maxf = pu.unsigned_abs().max(pv.unsigned_abs()).max(pw_.unsigned_abs());
    if maxf as usize > bandlimit {
        return invalid(format!("ansatz frequency {maxf} exceeds band limit {bandlimit}"));
    }
    let field = |amp: Complex64, k: i64| -> Result<SpectralField> {
        let mut a = vec![Complex64::new(0.0, 0.0); dim];
        a[0] = amp;
        let mut xi = vec![0i64; dim];
        xi[0] = k;
        let mut out = SpectralField::zeros(dim, bandlimit);
        out.set(&xi, &a)?;
        Ok(out)
    };
    SystemState::new(field(pw.f, pu)?, field(pw.g, pv)?, field(pw.h, pw_)?, 0.0)
}

fn axpy(a: &Amplitudes, s: f64, k: &Amplitudes) -> Amplitudes {
    [a[0] + k[0] * s, a[1] + k[1] * s, a[2] + k[2] * s]
}

fn rk4_step(pw: &PlaneWaveTriple, t: f64, a: &Amplitudes, dt: f64) -> Amplitudes {
    let k1 = pw.rhs(t, a);
    let k2 = pw.rhs(t + 0.5 * dt, &axpy(a, 0.5 * dt, &k1));
    let k3 = pw.rhs(t + 0.5 * dt, &axpy(a, 0.5 * dt, &k2));
    let k4 = pw.rhs(t + dt, &axpy(a, dt, &k3));
    let mut out = *a;
    for i in 0..3 {
        out[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
    }
    out
}

fn finite(a: &Amplitudes) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    pub amps: Vec<Amplitudes>,
    /// Largest relative deviation of `|f|^2 + |g|^2` from its initial value.
    pub drift_fg: f64,
    /// Same for `|f|^2 + |h|^2`.
    pub drift_fh: f64,
}

impl AmplitudeTrajectory {
    pub fn last(&self) -> Amplitudes {
        *self.amps.last().expect("trajectory is never empty")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "re_f", "im_f", "re_g", "im_g", "re_h", "im_h", "drift_fg", "drift_fh"])
            .expect("in-memory write");
        let (fg0, fh0) = invariants(&self.amps[0]);
        for (t, a) in self.times.iter().zip(&self.amps) {
            let (fg, fh) = invariants(a);
            let row = [
                *t,
                a[0].re,
                a[0].im,
                a[1].re,
                a[1].im,
                a[2].re,
                a[2].im,
                rel(fg, fg0),
                rel(fh, fh0),
            ];
            w.write_record(row.iter().map(|x| x.to_string())).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// `(|f|^2 + |g|^2, |f|^2 + |h|^2)`
pub fn invariants(a: &Amplitudes) -> (f64, f64) {
    let f2 = a[0].norm_sqr();
    (f2 + a[1].norm_sqr(), f2 + a[2].norm_sqr())
}

fn rel(x: f64, x0: f64) -> f64 {
    if x0 == 0.0 {
        x.abs()
    } else {
        ((x - x0) / x0).abs()
    }
}

/// Classical RK4 from `t = 0` to `t_end`; the last step is shortened to land on `t_end`.
/// Every `stride`-th step is recorded, plus the endpoints.
pub fn ode_integrate_strided(
    pw: &PlaneWaveTriple,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<AmplitudeTrajectory> {
    if !(t_end > 0.0) || !(dt > 0.0) {
        return invalid("integration needs T > 0 and dt > 0");
    }
    let stride = stride.max(1);
    let mut a = pw.amplitudes();
    let (fg0, fh0) = invariants(&a);
    let mut traj = AmplitudeTrajectory { times: vec![0.0], amps: vec![a], drift_fg: 0.0, drift_fh: 0.0 };
    let steps = (t_end / dt).ceil() as usize;
    let mut t = 0.0;
    for n in 0..steps {
        let h = if n + 1 == steps { t_end - t } else { dt };
        if h <= 0.0 {
            break;
        }
        a = rk4_step(pw, t, &a, h);
        t = if n + 1 == steps { t_end } else { (n + 1) as f64 * dt };
        if !finite(&a) {
            return Err(Error::Diverged { step: n + 1, time: t });
        }
        let (fg, fh) = invariants(&a);
        traj.drift_fg = traj.drift_fg.max(rel(fg, fg0));
        traj.drift_fh = traj.drift_fh.max(rel(fh, fh0));
        if (n + 1) % stride == 0 || n + 1 == steps {
            traj.times.push(t);
            traj.amps.push(a);
        }
    }
    Ok(traj)
}

pub fn ode_integrate(pw: &PlaneWaveTriple, t_end: f64, dt: f64) -> Result<AmplitudeTrajectory> {
    ode_integrate_strided(pw, t_end, dt, 1)
}

/// Value at `s` in `[0, dt]` of the cubic Hermite interpolant through `(y0, d0)` and `(y1, d1)`.
fn hermite(y0: Complex64, d0: Complex64, y1: Complex64, d1: Complex64, dt: f64, s: f64) -> Complex64 {
    let u = s / dt;
    let h00 = 2.0 * u * u * u - 3.0 * u * u + 1.0;
    let h10 = u * u * u - 2.0 * u * u + u;
    let h01 = -2.0 * u * u * u + 3.0 * u * u;
    let h11 = u * u * u - u * u;
    y0 * h00 + d0 * (h10 * dt) + y1 * h01 + d1 * (h11 * dt)
}

/// First time in `(0, t_max]` at which `event(amplitudes, derivative)` changes sign, and
/// the amplitudes there. Located by bisection on the Hermite dense output to `1e-10` in `t`.
pub fn integrate_until(
    pw: &PlaneWaveTriple,
    event: impl Fn(&Amplitudes, &Amplitudes) -> f64,
    t_max: f64,
    dt: f64,
) -> Result<Option<(f64, Amplitudes)>> {
    if !(t_max > 0.0) || !(dt > 0.0) {
        return invalid("event search needs t_max > 0 and dt > 0");
    }
    let mut a = pw.amplitudes();
    let mut da = pw.rhs(0.0, &a);
    let mut e0 = event(&a, &da);
    let mut t = 0.0;
    let mut n = 0usize;
    while t < t_max {
        let h = dt.min(t_max - t);
        let b = rk4_step(pw, t, &a, h);
        if !finite(&b) {
            return Err(Error::Diverged { step: n + 1, time: t + h });
        }
        let db = pw.rhs(t + h, &b);
        let e1 = event(&b, &db);
        if e0 == 0.0 && n == 0 {
            // starting exactly on the event surface does not count
        } else if e0 * e1 <= 0.0 {
            let interp = |s: f64| -> (Amplitudes, Amplitudes) {
                let y = [0, 1, 2].map(|i| hermite(a[i], da[i], b[i], db[i], h, s));
                (y, pw.rhs(t + s, &y))
            };
            let (mut lo, mut hi) = (0.0, h);
            let mut elo = e0;
            while hi - lo > 1e-10 * 0.25 {
                let mid = 0.5 * (lo + hi);
                let (y, dy) = interp(mid);
                let em = event(&y, &dy);
                if elo * em <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    elo = em;
                }
            }
            let s = 0.5 * (lo + hi);
            return Ok(Some((t + s, interp(s).0)));
        }
        a = b;
        da = db;
        e0 = e1;
        t += h;
        n += 1;
    }
    Ok(None)
}

/// Second-order equation satisfied by `h`:
/// `h'' = -q^2 h (2|h|^2 - omega) - i c h'` (with `c = 0` for the resonant comparison).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HEquation {
    pub q: f64,
    pub omega: f64,
    pub c_osc: f64,
}

impl HEquation {
    /// Equation for the `h` component of `pw`; `omega = |f|^2 - |g|^2 + 2|h|^2`.
    pub fn from_triple(pw: &PlaneWaveTriple) -> Self {
        Self {
            q: pw.coupling,
            omega: pw.f.norm_sqr() - pw.g.norm_sqr() + 2.0 * pw.h.norm_sqr(),
            c_osc: pw.c_osc,
        }
    }

    fn rhs(&self, y: &[Complex64; 2]) -> [Complex64; 2] {
        let [h, dh] = *y;
        [dh, -self.q * self.q * h * (2.0 * h.norm_sqr() - self.omega) - I * self.c_osc * dh]
    }

    /// RK4 samples of `h` at `t = j * dt` up to `t_end` (last step shortened).
    pub fn integrate(&self, h0: Complex64, dh0: Complex64, t_end: f64, dt: f64) -> Result<Vec<(f64, Complex64)>> {
        if !(t_end > 0.0) || !(dt > 0.0) {
            return invalid("integration needs T > 0 and dt > 0");
        }
        let mut y = [h0, dh0];
        let mut out = vec![(0.0, h0)];
        let steps = (t_end / dt).ceil() as usize;
        let mut t = 0.0;
        for n in 0..steps {
            let step = if n + 1 == steps { t_end - t } else { dt };
            let k1 = self.rhs(&y);
            let k2 = self.rhs(&[y[0] + k1[0] * (0.5 * step), y[1] + k1[1] * (0.5 * step)]);
            let k3 = self.rhs(&[y[0] + k2[0] * (0.5 * step), y[1] + k2[1] * (0.5 * step)]);
            let k4 = self.rhs(&[y[0] + k3[0] * step, y[1] + k3[1] * step]);
            for i in 0..2 {
                y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (step / 6.0);
            }
            t = if n + 1 == steps { t_end } else { (n + 1) as f64 * dt };
            if !(y[0].re.is_finite() && y[0].im.is_finite()) {
                return Err(Error::Diverged { step: n + 1, time: t });
            }
            out.push((t, y[0]));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseVariant {
    /// `kappa'' = -kappa (kappa^2 - 1)`
    Focusing,
    /// `kappa'' = kappa (kappa^2 - 1)`
    Defocusing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePlanePoint {
    pub x: f64,
    pub y: f64,
}

fn potential(v: PhaseVariant, x: f64) -> f64 {
    let x2 = x * x;
    match v {
        PhaseVariant::Focusing => x2 * x2 / 4.0 - x2 / 2.0,
        PhaseVariant::Defocusing => -x2 * x2 / 4.0 + x2 / 2.0,
    }
}

/// Energy `y^2/2 + V(x)` of the phase-plane point.
pub fn phase_energy(v: PhaseVariant, pt: PhasePlanePoint) -> f64 {
    pt.y * pt.y / 2.0 + potential(v, pt.x)
}

/// Time for the orbit of energy `e0` to travel from `x_from` to `x_to`:
/// `integral dx / sqrt(2 (e0 - V(x)))`.
///
/// Both halves of the interval are mapped by `x = endpoint -/+ u^2`, which removes
/// the inverse square root at a turning point.
pub fn hitting_time(v: PhaseVariant, e0: f64, x_from: f64, x_to: f64) -> Result<f64> {
    if !(e0.is_finite() && x_from.is_finite() && x_to.is_finite()) {
        return invalid("hitting time needs finite arguments");
    }
    if x_from == x_to {
        return Ok(0.0);
    }
    let (a, b) = if x_from < x_to { (x_from, x_to) } else { (x_to, x_from) };
    let y2 = |x: f64| 2.0 * (e0 - potential(v, x));
    let scale = 1.0 + e0.abs() + a.abs().max(b.abs()).powi(4);
    for end in [a, b] {
        if y2(end) < -1e-12 * scale {
            return domain(format!("no orbit of energy {e0} reaches x = {end}"));
        }
    }
    let samples = 2048;
    for j in 1..samples {
        let x = a + (b - a) * j as f64 / samples as f64;
        if y2(x) <= 0.0 {
            return domain(format!(
                "orbit of energy {e0} turns at x = {x} before connecting {x_from} to {x_to}"
            ));
        }
    }
    let m = 0.5 * (a + b);
    let half = (m - a).sqrt();
    let t = end_integral(v, e0, a, 1.0, half, scale) + end_integral(v, e0, b, -1.0, half, scale);
    if !t.is_finite() {
        return domain("hitting-time integral diverges");
    }
    Ok(t)
}

/// `integral_0^{u_max} 2u du / sqrt(y2(x0 + dir u^2))`.
///
/// `y2(x0 + dir s) = y2(x0) - 2 dir s D(s)` is expanded around `x0` so the
/// difference carries no cancellation near a turning point.
fn end_integral(v: PhaseVariant, e0: f64, x0: f64, dir: f64, u_max: f64, scale: f64) -> f64 {
    let (c4, c2) = match v {
        PhaseVariant::Focusing => (0.25, -0.5),
        PhaseVariant::Defocusing => (-0.25, 0.5),
    };
    let mut y0 = 2.0 * (e0 - potential(v, x0));
    if y0.abs() <= 1e-12 * scale {
        y0 = 0.0;
    }
    // (V(x0 + t) - V(x0)) / t with t = dir * s
    let dv = |t: f64| {
        c4 * (4.0 * x0.powi(3) + 6.0 * x0 * x0 * t + 4.0 * x0 * t * t + t.powi(3)) + c2 * (2.0 * x0 + t)
    };
    let integrand = |u: f64| {
        let t = dir * u * u;
        // y2 / u^2 = y0 / u^2 - 2 dir dv(t)
        let slope = -2.0 * dir * dv(t);
        if y0 == 0.0 {
            if slope > 0.0 { 2.0 / slope.sqrt() } else { 0.0 }
        } else {
            let r = y0 + u * u * slope;
            if r > 0.0 { 2.0 * u / r.sqrt() } else { 0.0 }
        }
    };
    quad::integrate(integrand, 0.0, u_max, 1e-13)
}

/// Ill-posedness constructions, each with its own rescaling to the phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExperimentCase {
    /// `beta + gamma = 0`, `s > 0`: norm inflation of `v`.
    #[serde(rename = "NI_bg_pos_s")]
    NiBgPosS,
    /// `beta + gamma = 0`, `s < 0`: norm inflation of `u`.
    #[serde(rename = "NI_bg_neg_s")]
    NiBgNegS,
    /// `beta + gamma = 0`, `s = 0`: discontinuity in `L^2`.
    #[serde(rename = "Disc_L2")]
    DiscL2,
    /// `alpha = gamma`, `s < 0`: norm inflation of `v`.
    #[serde(rename = "NI_ag_neg_s")]
    NiAgNegS,
    /// `alpha = gamma`: pair of solutions separating in `u`.
    #[serde(rename = "NU_alpha_gamma")]
    NuAlphaGamma,
    /// `mu <= 0` with an irrational resonance root: pair separating in `w`.
    #[serde(rename = "NU_mu_nonpos")]
    NuMuNonpos,
}

impl ExperimentCase {
    pub const ALL: [ExperimentCase; 6] = [
        ExperimentCase::NiBgPosS,
        ExperimentCase::NiBgNegS,
        ExperimentCase::DiscL2,
        ExperimentCase::NiAgNegS,
        ExperimentCase::NuAlphaGamma,
        ExperimentCase::NuMuNonpos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentCase::NiBgPosS => "NI_bg_pos_s",
            ExperimentCase::NiBgNegS => "NI_bg_neg_s",
            ExperimentCase::DiscL2 => "Disc_L2",
            ExperimentCase::NiAgNegS => "NI_ag_neg_s",
            ExperimentCase::NuAlphaGamma => "NU_alpha_gamma",
            ExperimentCase::NuMuNonpos => "NU_mu_nonpos",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment case {name:?}")))
    }
}

/// Parameters of a rescaling. `n` is the frequency scale (`q` for the irrational case),
/// `omega` is only read by [`ExperimentCase::NuMuNonpos`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleParams {
    pub n: f64,
    pub s: f64,
    pub delta: f64,
    pub omega: f64,
}

/// `(scale_amp, scale_time)` with `kappa(t) = scale_amp * a(scale_time * t)`, `a` the
/// tracked amplitude. A phase-plane time `t` corresponds to physical time `scale_time * t`.
pub fn rescale_amplitude(case: ExperimentCase, p: RescaleParams) -> Result<(f64, f64)> {
    let RescaleParams { n, s, delta, omega } = p;
    if !(n >= 1.0) {
        return invalid("frequency scale must be at least 1");
    }
    let needs_delta = !matches!(case, ExperimentCase::NuMuNonpos);
    if needs_delta && !(delta > 0.0) {
        return invalid("delta must be positive");
    }
    let eps2 = n.powf(-2.0 * s);
    match case {
        ExperimentCase::NiBgPosS => {
            if !(s > 0.0) {
                return invalid("this case needs s > 0");
            }
            let r = (1.0 - eps2).sqrt();
            Ok((2f64.sqrt() / (delta * r), 1.0 / (delta * n * r)))
        }
        ExperimentCase::NiBgNegS => {
            if !(s < 0.0) {
                return invalid("this case needs s < 0");
            }
            let a = delta * n.powf(-s);
            Ok((1.0 / a, 1.0 / (2f64.sqrt() * a * n)))
        }
        ExperimentCase::DiscL2 => {
            let r = (1.0 + 2.0 * delta).sqrt();
            Ok((2f64.sqrt() / r, 1.0 / (n * r)))
        }
        ExperimentCase::NiAgNegS => {
            if !(s < 0.0) {
                return invalid("this case needs s < 0");
            }
            let r = (2.0 + eps2).sqrt();
            Ok((2f64.sqrt() / (delta * r), 1.0 / (delta * n * r)))
        }
        ExperimentCase::NuAlphaGamma => {
            let r = (delta * delta + eps2).sqrt();
            Ok((2f64.sqrt() / r, 1.0 / (n * r)))
        }
        ExperimentCase::NuMuNonpos => {
            if !(omega > 0.0) {
                return invalid("omega must be positive");
            }
            Ok(((2.0 / omega).sqrt(), 1.0 / (omega.sqrt() * n)))
        }
    }
}

/// Which amplitude a reduction tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tracked {
    F,
    G,
    H,
}

/// Rescaling derived from the invariants of a real resonant triple.
///
/// `f` obeys a defocusing equation with `omega = 2|f|^2 + |g|^2 + |h|^2`; `g` and `h`
/// obey focusing ones with `omega = |f|^2 + 2|g|^2 - |h|^2` and `|f|^2 - |g|^2 + 2|h|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reduction {
    pub tracked: Tracked,
    pub variant: PhaseVariant,
    pub omega: f64,
    pub scale_amp: f64,
    pub scale_time: f64,
    /// Phase-plane point at `t = 0`.
    pub start: PhasePlanePoint,
}

impl Reduction {
    pub fn of(pw: &PlaneWaveTriple, tracked: Tracked) -> Result<Self> {
        let [f2, g2, h2] = pw.amplitudes().map(|z| z.norm_sqr());
        let (variant, omega, idx) = match tracked {
            Tracked::F => (PhaseVariant::Defocusing, 2.0 * f2 + g2 + h2, 0),
            Tracked::G => (PhaseVariant::Focusing, f2 + 2.0 * g2 - h2, 1),
            Tracked::H => (PhaseVariant::Focusing, f2 - g2 + 2.0 * h2, 2),
        };
        if !(omega > 0.0) {
            return domain(format!("reduction constant omega = {omega} is not positive"));
        }
        let scale_amp = (2.0 / omega).sqrt();
        let scale_time = 1.0 / (omega.sqrt() * pw.coupling.abs());
        let a0 = pw.amplitudes()[idx];
        let d0 = pw.rhs(0.0, &pw.amplitudes())[idx];
        let start = PhasePlanePoint {
            x: scale_amp * a0.re,
            y: scale_amp * scale_time * d0.re,
        };
        Ok(Self { tracked, variant, omega, scale_amp, scale_time, start })
    }

    pub fn energy(&self) -> f64 {
        phase_energy(self.variant, self.start)
    }

    pub fn component(&self, a: &Amplitudes) -> Complex64 {
        match self.tracked {
            Tracked::F => a[0],
            Tracked::G => a[1],
            Tracked::H => a[2],
        }
    }

    /// Phase-plane point of amplitudes `a` (real part of the tracked component).
    pub fn point(&self, pw: &PlaneWaveTriple, t: f64, a: &Amplitudes) -> PhasePlanePoint {
        let idx = self.tracked as usize;
        let d = pw.rhs(t, a)[idx];
        PhasePlanePoint {
            x: self.scale_amp * self.component(a).re,
            y: self.scale_amp * self.scale_time * d.re,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn triple(a: f64, b: f64, g: f64) -> CoefficientTriple {
        CoefficientTriple::new(a, b, g).unwrap()
    }

    #[test]
    fn rhs_examples() {
        let cf = triple(1.0, 1.0, -1.0);
        let n = 7;
        let pw = PlaneWaveTriple::new(&cf, 0, n, c(1.0), c(1.0), c(1.0)).unwrap();
        assert_eq!(pw.c_osc(), 0.0);
        let d = ode_rhs(&pw, 0.3);
        assert_eq!(d, [c(-7.0), c(7.0), c(7.0)]);
        let z = pw.with_amplitudes([c(0.0); 3]);
        assert_eq!(ode_rhs(&z, 1.0), [c(0.0); 3]);

        let cf = triple(2.0, 1.0, 1.0);
        let f = Complex64::new(0.3, -0.2);
        let g = Complex64::new(-0.1, 0.5);
        let h = Complex64::new(0.7, 0.4);
        let pw = PlaneWaveTriple::new(&cf, 3, 4, f, g, h).unwrap();
        assert_eq!(pw.c_osc(), 2.0 * 9.0 - 1.0 - 16.0);
        let d = ode_rhs(&pw, 0.0);
        assert!((d[0] + 4.0 * g * h).norm() < 1e-15);
        assert!((d[1] - 4.0 * f * h.conj()).norm() < 1e-15);
        assert!((d[2] - 4.0 * f * g.conj()).norm() < 1e-15);
        assert!(PlaneWaveTriple::new(&cf, 3, 0, f, g, h).is_err());
    }

    #[test]
    fn resonant_pairs_have_small_oscillation() {
        let cf = triple(2.0, 1.0, 1.0);
        for k in crate::resonance::resonance_k_roots(&cf) {
            let n = 4096i64;
            let p = (k * n as f64).round() as i64;
            // rounding moves p by at most 1/2, so c is at worst O(N)
            let pw = PlaneWaveTriple::new(&cf, p, n, c(1.0), c(0.0), c(0.0)).unwrap();
            assert!(pw.c_osc().abs() <= 8.0 * n as f64);
        }
        let cf = triple(1.0, 1.0, 1.0);
        let n = 1 << 20;
        let pw = PlaneWaveTriple::new(&cf, n, n, c(1.0), c(0.0), c(0.0)).unwrap();
        assert!(pw.c_osc().abs() <= 1e-9 * (n * n) as f64);
    }

    #[test]
    fn ansatz_places_modes() {
        let cf = triple(1.0, 1.0, -1.0);
        let (n, s, delta) = (8i64, 0.5, 0.3);
        let pw = PlaneWaveTriple::new(&cf, 0, n, c(delta), c(0.0), c(delta * (n as f64).powf(-s))).unwrap();
        let st = make_ansatz(&pw, 8, 1).unwrap();
        assert_eq!(st.u.get(&[0])[0], c(delta));
        assert_eq!(st.w.get(&[8])[0], pw.h);
        assert_eq!(st.v.l2_sq(), 0.0);
        let st2 = make_ansatz(&pw, 8, 2).unwrap();
        assert_eq!(st2.w.get(&[8, 0]), vec![pw.h, c(0.0)]);
        assert!(make_ansatz(&pw, 7, 1).is_err());
    }

    #[test]
    fn conservation_at_fine_step() {
        let cf = triple(2.0, 1.0, 1.0);
        let pw = PlaneWaveTriple::new(
            &cf,
            11,
            16,
            Complex64::new(0.5, 0.1),
            Complex64::new(0.2, -0.3),
            Complex64::new(-0.4, 0.25),
        )
        .unwrap();
        let tr = ode_integrate(&pw, 5.0, 1e-3 / 16.0).unwrap();
        assert!(tr.drift_fg <= 1e-10 && tr.drift_fh <= 1e-10, "{} {}", tr.drift_fg, tr.drift_fh);
        assert_eq!(*tr.times.last().unwrap(), 5.0);
        let z = ode_integrate(&pw.with_amplitudes([c(0.0); 3]), 1.0, 0.1).unwrap();
        assert!(z.amps.iter().all(|a| a.iter().all(|x| *x == c(0.0))));
    }

    #[test]
    fn step_count_for_exact_multiple() {
        let cf = triple(1.0, 1.0, -1.0);
        let pw = PlaneWaveTriple::new(&cf, 0, 2, c(0.1), c(0.1), c(0.1)).unwrap();
        let tr = ode_integrate(&pw, 0.3, 0.1).unwrap();
        assert_eq!(tr.times.len(), 4);
        assert_eq!(tr.times[3], 0.3);
    }

    #[test]
    fn real_data_stays_real() {
        let cf = triple(1.0, 1.0, -1.0);
        let pw = PlaneWaveTriple::new(&cf, 0, 16, c(0.3), c(0.2), c(0.1)).unwrap();
        let tr = ode_integrate(&pw, 2.0, 1e-3 / 16.0).unwrap();
        let worst = tr.amps.iter().flatten().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-13);
    }

    #[test]
    fn phase_energy_examples() {
        let o = PhasePlanePoint { x: 0.0, y: 0.0 };
        assert_eq!(phase_energy(PhaseVariant::Focusing, o), 0.0);
        assert_eq!(phase_energy(PhaseVariant::Defocusing, o), 0.0);
        let p = PhasePlanePoint { x: 1.0, y: 0.0 };
        assert_eq!(phase_energy(PhaseVariant::Focusing, p), -0.25);
        assert_eq!(phase_energy(PhaseVariant::Defocusing, p), 0.25);
        let q = PhasePlanePoint { x: 0.0, y: -1.0 / 2f64.sqrt() };
        assert!((phase_energy(PhaseVariant::Defocusing, q) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn separatrix_hitting_time() {
        let t = hitting_time(PhaseVariant::Defocusing, 0.25, 0.0, 0.5).unwrap();
        let want = 3f64.ln() / 2f64.sqrt();
        assert!((t - want).abs() < 1e-12, "{t} vs {want}");
        let back = hitting_time(PhaseVariant::Defocusing, 0.25, 0.0, -0.5).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn focusing_hitting_time_matches_trapezoid_oracle() {
        let e0 = 16.0 / 225.0;
        let t = hitting_time(PhaseVariant::Focusing, e0, 0.0, 1.0).unwrap();
        // integrand is smooth on [0, 1]; composite Simpson with many panels
        let n = 200_000;
        let f = |x: f64| 1.0 / (2.0 * e0 - x.powi(4) / 2.0 + x * x).sqrt();
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for j in 1..n {
            s += f(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = s * h / 3.0;
        assert!((t - oracle).abs() < 1e-10);
        assert!((t - 1.794).abs() < 1e-2);
    }

    #[test]
    fn turning_point_endpoint() {
        // Focusing orbit starting at rest at x0 inside the well: E = V(x0).
        let x0 = 0.6f64;
        let e = x0.powi(4) / 4.0 - x0 * x0 / 2.0;
        let t = hitting_time(PhaseVariant::Focusing, e, x0, 1.0).unwrap();
        // reference: Simpson after the same substitution done by hand near x0 only
        let y2 = |x: f64| 2.0 * (e - (x.powi(4) / 4.0 - x * x / 2.0));
        let n = 400_000;
        let ub = (1.0 - x0).sqrt();
        let g = |u: f64| if u == 0.0 { 2.0 / (2.0 * (x0 - x0.powi(3))).sqrt() } else { 2.0 * u / y2(x0 + u * u).sqrt() };
        let h = ub / n as f64;
        let mut s = g(0.0) + g(ub);
        for j in 1..n {
            s += g(j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = s * h / 3.0;
        assert!((t - oracle).abs() < 1e-9, "{t} vs {oracle}");
        assert!(hitting_time(PhaseVariant::Focusing, e, 0.0, 1.0).is_err());
    }

    #[test]
    fn separatrix_solution_point() {
        // f(0)=0, g=h=a: f follows the separatrix and reaches -a/2 at t* scale_time
        let cf = triple(1.0, 1.0, -1.0);
        let (n, s, delta) = (16.0f64, -0.5, 0.1);
        let a = delta * n.powf(-s);
        let pw = PlaneWaveTriple::new(&cf, 0, 16, c(0.0), c(a), c(a)).unwrap();
        let (_, st) = rescale_amplitude(ExperimentCase::NiBgNegS, RescaleParams { n, s, delta, omega: 0.0 }).unwrap();
        let t_star = 3f64.ln() / 2f64.sqrt();
        let tr = ode_integrate(&pw, t_star * st, 1e-3 * st).unwrap();
        assert!((tr.last()[0].re + a / 2.0).abs() < 1e-6 * a);
        let red = Reduction::of(&pw, Tracked::F).unwrap();
        assert!((red.energy() - 0.25).abs() < 1e-15);
        let mut worst: f64 = 0.0;
        for (t, amp) in tr.times.iter().zip(&tr.amps) {
            let e = phase_energy(PhaseVariant::Defocusing, red.point(&pw, *t, amp));
            worst = worst.max((e - 0.25).abs());
        }
        assert!(worst <= 1e-9);
    }

    #[test]
    fn closed_form_scales_match_invariants() {
        let cf_bg = triple(1.0, 1.0, -1.0);
        let cf_ag = triple(1.0, 1.0, 1.0);
        let (n, delta) = (64.0f64, 0.2);
        let ni = n as i64;
        let close = |a: (f64, f64), r: &Reduction| {
            assert!((a.0 - r.scale_amp).abs() < 1e-12 * a.0);
            assert!((a.1 - r.scale_time).abs() < 1e-12 * a.1);
        };
        let s = 0.5;
        let pw = PlaneWaveTriple::new(&cf_bg, 0, ni, c(delta), c(0.0), c(delta * n.powf(-s))).unwrap();
        let r = Reduction::of(&pw, Tracked::G).unwrap();
        close(rescale_amplitude(ExperimentCase::NiBgPosS, RescaleParams { n, s, delta, omega: 0.0 }).unwrap(), &r);
        let e0 = n.powf(-2.0 * s) / (1.0 - n.powf(-2.0 * s)).powi(2);
        assert!((r.energy() - e0).abs() < 1e-14);

        let pw = PlaneWaveTriple::new(&cf_bg, 0, ni, c(1.0 + delta), c(0.0), c(delta)).unwrap();
        let r = Reduction::of(&pw, Tracked::G).unwrap();
        close(rescale_amplitude(ExperimentCase::DiscL2, RescaleParams { n, s: 0.0, delta, omega: 0.0 }).unwrap(), &r);

        let s = -0.5;
        let pw = PlaneWaveTriple::new(&cf_ag, ni, ni, c(delta * n.powf(-s)), c(delta), c(0.0)).unwrap();
        let r = Reduction::of(&pw, Tracked::G).unwrap();
        close(rescale_amplitude(ExperimentCase::NiAgNegS, RescaleParams { n, s, delta, omega: 0.0 }).unwrap(), &r);

        let s = 0.5;
        let pw = PlaneWaveTriple::new(&cf_ag, ni, ni, c(0.0), c(delta), c(n.powf(-s))).unwrap();
        let r = Reduction::of(&pw, Tracked::F).unwrap();
        close(rescale_amplitude(ExperimentCase::NuAlphaGamma, RescaleParams { n, s, delta, omega: 0.0 }).unwrap(), &r);

        assert!(rescale_amplitude(ExperimentCase::NiBgPosS, RescaleParams { n, s: -1.0, delta, omega: 0.0 }).is_err());
    }

    #[test]
    fn h_equation_agrees_with_first_order_system() {
        let cf = triple(2.0, 1.0, 1.0);
        let (p, q) = (11i64, 15i64);
        let s = 0.5;
        let delta = 0.05;
        let pf = (p as f64).powf(-s);
        let g0 = delta * ((p - q) as f64).abs().powf(-s);
        let h0 = delta * (q as f64).powf(-s);
        let pw = PlaneWaveTriple::new(&cf, p, q, c(pf), c(g0), c(h0)).unwrap();
        let eq = HEquation::from_triple(&pw);
        let t_end = 1.5;
        let dt = 1e-4;
        let dh0 = ode_rhs(&pw, 0.0)[2];
        let hs = eq.integrate(c(h0), dh0, t_end, dt).unwrap();
        let tr = ode_integrate(&pw, t_end, dt).unwrap();
        let diff = (hs.last().unwrap().1 - tr.last()[2]).norm();
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn event_detection_matches_quadrature() {
        let cf = triple(1.0, 1.0, -1.0);
        let (n, s, delta) = (16.0f64, 0.5, 1.0 / 16f64.ln());
        let pw = PlaneWaveTriple::new(&cf, 0, 16, c(delta), c(0.0), c(delta * n.powf(-s))).unwrap();
        let r = Reduction::of(&pw, Tracked::G).unwrap();
        let target = 1.0 / r.scale_amp;
        let t_q = hitting_time(PhaseVariant::Focusing, r.energy(), 0.0, 1.0).unwrap() * r.scale_time;
        let hit = integrate_until(&pw, |a, _| a[1].re - target, 10.0 * t_q, 1e-3 * r.scale_time)
            .unwrap()
            .unwrap();
        assert!((hit.0 - t_q).abs() < 1e-9 * t_q.max(1.0), "{} vs {}", hit.0, t_q);
    }

    #[test]
    fn case_names_round_trip() {
        for case in ExperimentCase::ALL {
            assert_eq!(ExperimentCase::parse(case.name()).unwrap(), case);
            let js = serde_json::to_string(&case).unwrap();
            assert_eq!(js, format!("\"{}\"", case.name()));
        }
        assert!(ExperimentCase::parse("nope").is_err());
    }
}

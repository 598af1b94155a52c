//! Band-limited `C^d`-valued fields on `T^d`.
//!
//! A field is stored by its amplitudes `a(xi)` in `f(x) = sum a(xi) exp(i xi.x)`, for
//! lattice points with `|xi|_inf <= B`. Norms carry no `(2 pi)^d` factors.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fft::Grid;
use crate::resonance::CoefficientTriple;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest box (entries times components) stored densely.
const DENSE_LIMIT: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq)]
enum Coeffs {
    /// Box `[-B, B]^d` in lexicographic order, `dim` components per site.
    Dense(Vec<Complex64>),
    Sparse(BTreeMap<Vec<i64>, Vec<Complex64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    dim: usize,
    bandlimit: usize,
    coeffs: Coeffs,
}

/// `<xi>^2 = 1 + |xi|^2`
pub fn japanese_sq(xi: &[i64]) -> f64 {
    1.0 + norm_sq(xi) as f64
}

pub fn norm_sq(xi: &[i64]) -> i64 {
    xi.iter().map(|k| k * k).sum()
}

/// Smooth cutoff: 1 on `|r| <= 1`, 0 on `|r| >= 2`, `C^inf` in between.
pub fn chi(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let h = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let t = r - 1.0;
    h(1.0 - t) / (h(1.0 - t) + h(t))
}

/// Dyadic bump `psi_1 = chi`, `psi_N(r) = chi(r/N) - chi(2r/N)` for `N >= 2`.
pub fn psi(n: u64, r: f64) -> f64 {
    if n <= 1 {
        chi(r)
    } else {
        let n = n as f64;
        chi(r / n) - chi(2.0 * r / n)
    }
}

impl SpectralField {
    pub fn zeros(dim: usize, bandlimit: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        let sites = (2 * bandlimit + 1).checked_pow(dim as u32);
        let coeffs = match sites {
            Some(n) if dim <= 2 && n.saturating_mul(dim) <= DENSE_LIMIT => {
                Coeffs::Dense(vec![ZERO; n * dim])
            }
            _ => Coeffs::Sparse(BTreeMap::new()),
        };
        Self { dim, bandlimit, coeffs }
    }

    /// Sparse field regardless of size.
    pub fn zeros_sparse(dim: usize, bandlimit: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim, bandlimit, coeffs: Coeffs::Sparse(BTreeMap::new()) }
    }

    /// Single mode `amplitude * exp(i xi.x)`.
    pub fn plane_wave(amplitude: &[Complex64], xi: &[i64], bandlimit: usize) -> Result<Self> {
        let mut f = Self::zeros_sparse(xi.len().max(1), bandlimit);
        if amplitude.len() != f.dim {
            return invalid(format!(
                "amplitude has {} components, expected {}",
                amplitude.len(),
                f.dim
            ));
        }
        f.set(xi, amplitude)?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandlimit(&self) -> usize {
        self.bandlimit
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.coeffs, Coeffs::Dense(_))
    }

    fn in_band(&self, xi: &[i64]) -> bool {
        xi.iter().all(|k| k.unsigned_abs() as usize <= self.bandlimit)
    }

    fn dense_site(&self, xi: &[i64]) -> usize {
        let w = 2 * self.bandlimit + 1;
        xi.iter().fold(0, |acc, &k| acc * w + (k + self.bandlimit as i64) as usize)
    }

    fn dense_xi(&self, site: usize) -> Vec<i64> {
        let w = 2 * self.bandlimit + 1;
        let mut xi = vec![0i64; self.dim];
        let mut rest = site;
        for slot in xi.iter_mut().rev() {
            *slot = (rest % w) as i64 - self.bandlimit as i64;
            rest /= w;
        }
        xi
    }

    fn check_xi(&self, xi: &[i64]) -> Result<()> {
        if xi.len() != self.dim {
            return invalid(format!("frequency has {} entries, expected {}", xi.len(), self.dim));
        }
        if !self.in_band(xi) {
            return Err(Error::InvalidParameter(format!(
                "frequency {:?} exceeds band limit {}",
                xi, self.bandlimit
            )));
        }
        Ok(())
    }

    /// Overwrites the coefficient vector at `xi`.
    pub fn set(&mut self, xi: &[i64], value: &[Complex64]) -> Result<()> {
        self.check_xi(xi)?;
        if value.len() != self.dim {
            return invalid("coefficient vector length must equal the dimension");
        }
        let site = if self.is_dense() { self.dense_site(xi) } else { 0 };
        let dim = self.dim;
        match &mut self.coeffs {
            Coeffs::Dense(v) => v[site * dim..(site + 1) * dim].copy_from_slice(value),
            Coeffs::Sparse(m) => {
                if value.iter().all(|z| *z == ZERO) {
                    m.remove(xi);
                } else {
                    m.insert(xi.to_vec(), value.to_vec());
                }
            }
        }
        Ok(())
    }

    /// Coefficient vector at `xi` (zero outside the band or when absent).
    pub fn get(&self, xi: &[i64]) -> Vec<Complex64> {
        if xi.len() != self.dim || !self.in_band(xi) {
            return vec![ZERO; self.dim];
        }
        match &self.coeffs {
            Coeffs::Dense(v) => {
                let s = self.dense_site(xi);
                v[s * self.dim..(s + 1) * self.dim].to_vec()
            }
            Coeffs::Sparse(m) => m.get(xi).cloned().unwrap_or_else(|| vec![ZERO; self.dim]),
        }
    }

    /// Nonzero entries in lexicographic order of `xi`.
    pub fn entries(&self) -> Vec<(Vec<i64>, Vec<Complex64>)> {
        match &self.coeffs {
            Coeffs::Dense(v) => v
                .chunks(self.dim)
                .enumerate()
                .filter(|(_, c)| c.iter().any(|z| *z != ZERO))
                .map(|(s, c)| (self.dense_xi(s), c.to_vec()))
                .collect(),
            Coeffs::Sparse(m) => m.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }

    /// Applies `op(xi, coefficient)` to every stored site.
    pub fn map_modes(&self, op: impl Fn(&[i64], &mut [Complex64])) -> Self {
        let mut out = self.clone();
        let dim = self.dim;
        match &mut out.coeffs {
            Coeffs::Dense(v) => {
                for (s, c) in v.chunks_mut(dim).enumerate() {
                    let xi = self.dense_xi(s);
                    op(&xi, c);
                }
            }
            Coeffs::Sparse(m) => {
                for (k, c) in m.iter_mut() {
                    op(k, c);
                }
                m.retain(|_, c| c.iter().any(|z| *z != ZERO));
            }
        }
        out
    }

    /// Same coefficients under a different band limit; modes beyond it are dropped.
    pub fn with_bandlimit(&self, bandlimit: usize) -> Self {
        let mut out = if self.is_dense() {
            Self::zeros(self.dim, bandlimit)
        } else {
            Self::zeros_sparse(self.dim, bandlimit)
        };
        for (xi, c) in self.entries() {
            if out.in_band(&xi) {
                out.set(&xi, &c).expect("in band");
            }
        }
        out
    }

    /// `(sum <xi>^{2s} |a(xi)|^2)^{1/2}`
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.entries()
            .iter()
            .map(|(xi, c)| japanese_sq(xi).powf(s) * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Squared L2 norm `sum |a|^2`.
    pub fn l2_sq(&self) -> f64 {
        match &self.coeffs {
            Coeffs::Dense(v) => v.iter().map(|z| z.norm_sqr()).sum(),
            Coeffs::Sparse(m) => m.values().flatten().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// `sum |xi|^2 |a|^2`
    pub fn grad_sq(&self) -> f64 {
        self.entries()
            .iter()
            .map(|(xi, c)| norm_sq(xi) as f64 * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Multiplies each mode by `psi_N(|xi|)`.
    pub fn project_dyadic(&self, n: u64) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return invalid(format!("dyadic band must be a power of two, got {n}"));
        }
        Ok(self.map_modes(|xi, c| {
            let w = psi(n, (norm_sq(xi) as f64).sqrt());
            for z in c.iter_mut() {
                *z *= w;
            }
        }))
    }

    /// `exp(i t sigma Lap)`: multiplies `a(xi)` by `exp(-i t sigma |xi|^2)`.
    pub fn linear_propagate(&self, sigma: f64, t: f64) -> Self {
        self.map_modes(|xi, c| {
            let ph = Complex64::from_polar(1.0, -t * sigma * norm_sq(xi) as f64);
            for z in c.iter_mut() {
                *z *= ph;
            }
        })
    }

    /// Largest componentwise coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut keys: Vec<Vec<i64>> = self.entries().into_iter().map(|e| e.0).collect();
        keys.extend(other.entries().into_iter().map(|e| e.0));
        keys.iter()
            .map(|xi| {
                self.get(xi)
                    .iter()
                    .zip(other.get(xi))
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.map_modes(|_, c| c.iter_mut().for_each(|z| *z *= factor))
    }

    /// Component `comp` written into an FFT grid buffer (amplitude slots).
    pub(crate) fn fill_grid(&self, comp: usize, grid: &Grid, buf: &mut [Complex64]) {
        buf.iter_mut().for_each(|z| *z = ZERO);
        for (xi, c) in self.entries() {
            buf[grid.index(&xi)] = c[comp];
        }
    }

    pub fn to_record(&self) -> FieldRecord {
        FieldRecord {
            dim: self.dim,
            bandlimit: self.bandlimit,
            entries: self
                .entries()
                .into_iter()
                .map(|(xi, c)| EntryRecord {
                    xi,
                    re: c.iter().map(|z| z.re).collect(),
                    im: c.iter().map(|z| z.im).collect(),
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &FieldRecord) -> Result<Self> {
        if rec.dim == 0 {
            return Err(Error::Parse("dimension must be positive".into()));
        }
        let mut f = Self::zeros(rec.dim, rec.bandlimit);
        for e in &rec.entries {
            if e.re.len() != rec.dim || e.im.len() != rec.dim {
                return Err(Error::Parse(format!("entry {:?} has wrong component count", e.xi)));
            }
            let c: Vec<Complex64> =
                e.re.iter().zip(&e.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            f.set(&e.xi, &c).map_err(|err| Error::Parse(err.to_string()))?;
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FieldRecord =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_record(&rec)
    }
}

/// Serialized form of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldRecord {
    pub dim: usize,
    pub bandlimit: usize,
    pub entries: Vec<EntryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryRecord {
    pub xi: Vec<i64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// The unknowns `(u, v, w)` at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub u: SpectralField,
    pub v: SpectralField,
    pub w: SpectralField,
    pub time: f64,
}

impl SystemState {
    pub fn new(u: SpectralField, v: SpectralField, w: SpectralField, time: f64) -> Result<Self> {
        for f in [&v, &w] {
            if f.dim != u.dim || f.bandlimit != u.bandlimit {
                return invalid("u, v, w must share dimension and band limit");
            }
        }
        Ok(Self { u, v, w, time })
    }

    pub fn zeros(dim: usize, bandlimit: usize) -> Self {
        let z = SpectralField::zeros(dim, bandlimit);
        Self { u: z.clone(), v: z.clone(), w: z, time: 0.0 }
    }

    /// Seeded random data on the modes `|xi|_inf <= modes`, each component uniform in
    /// the square of half-width `amplitude / (1 + |xi|^2)`.
    pub fn random(dim: usize, bandlimit: usize, modes: usize, amplitude: f64, seed: u64) -> Result<Self> {
        if modes > bandlimit {
            return invalid(format!("random modes {modes} exceed band limit {bandlimit}"));
        }
        if dim == 0 {
            return invalid("dimension must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = modes as i64;
        let mut sites: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..dim {
            sites = sites
                .into_iter()
                .flat_map(|p| {
                    (-m..=m).map(move |k| {
                        let mut q = p.clone();
                        q.push(k);
                        q
                    })
                })
                .collect();
        }
        let mut fields = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut f = SpectralField::zeros(dim, bandlimit);
            for xi in &sites {
                let w = amplitude / (1.0 + norm_sq(xi) as f64);
                let a: Vec<Complex64> =
                    (0..dim).map(|_| Complex64::new(w * rng.gen_range(-1.0..1.0), w * rng.gen_range(-1.0..1.0))).collect();
                f.set(xi, &a)?;
            }
            fields.push(f);
        }
        let w = fields.pop().expect("three");
        let v = fields.pop().expect("three");
        let u = fields.pop().expect("three");
        Self::new(u, v, w, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.u.dim
    }

    pub fn bandlimit(&self) -> usize {
        self.u.bandlimit
    }

    /// Free evolution of each component with its own dispersion coefficient.
    pub fn linear_propagate(&self, c: &CoefficientTriple, t: f64) -> Self {
        Self {
            u: self.u.linear_propagate(c.alpha, t),
            v: self.v.linear_propagate(c.beta, t),
            w: self.w.linear_propagate(c.gamma, t),
            time: self.time + t,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.u
            .max_abs_diff(&other.u)
            .max(self.v.max_abs_diff(&other.v))
            .max(self.w.max_abs_diff(&other.w))
    }

    /// Sum of `|a|^2` over all modes and components of all three fields.
    pub fn total_l2_sq(&self) -> f64 {
        self.u.l2_sq() + self.v.l2_sq() + self.w.l2_sq()
    }
}

/// Charge `Q = 2 |u|^2 + |v|^2 + |w|^2`.
pub fn charge_q(st: &SystemState) -> f64 {
    2.0 * st.u.l2_sq() + st.v.l2_sq() + st.w.l2_sq()
}

/// Hamiltonian `alpha |grad u|^2 + beta |grad v|^2 + gamma |grad w|^2 + 2 Re(w, grad(u . conj v))`.
pub fn energy_h(st: &SystemState, c: &CoefficientTriple) -> f64 {
    c.alpha * st.u.grad_sq()
        + c.beta * st.v.grad_sq()
        + c.gamma * st.w.grad_sq()
        + 2.0 * cubic_pairing(st).re
}

/// `(w, grad(u . conj v))` in the amplitude inner product.
pub fn cubic_pairing(st: &SystemState) -> Complex64 {
    let dense = st.u.is_dense() || st.v.is_dense() || st.w.is_dense();
    if dense && st.dim() <= 2 {
        cubic_pairing_fft(st)
    } else {
        cubic_pairing_direct(st)
    }
}

/// `(w, grad g) = sum_xi (-i) (xi . a_w(xi)) conj(b(xi))` with `b` the coefficients of `g`.
fn pair_grad(xi: &[i64], aw: &[Complex64], b: Complex64) -> Complex64 {
    let dot: Complex64 = xi.iter().zip(aw).map(|(&k, z)| z * k as f64).sum();
    Complex64::new(0.0, -1.0) * dot * b.conj()
}

fn cubic_pairing_direct(st: &SystemState) -> Complex64 {
    let ws: BTreeMap<Vec<i64>, Vec<Complex64>> = st.w.entries().into_iter().collect();
    let vs = st.v.entries();
    let mut acc = ZERO;
    for (eta, au) in st.u.entries() {
        for (zeta, av) in &vs {
            let xi: Vec<i64> = eta.iter().zip(zeta).map(|(a, b)| a - b).collect();
            if let Some(aw) = ws.get(&xi) {
                let prod: Complex64 = au.iter().zip(av).map(|(a, b)| a * b.conj()).sum();
                acc += pair_grad(&xi, aw, prod);
            }
        }
    }
    acc
}

/// Smallest power-of-two grid that resolves products of band-`b` fields on the band.
pub fn padded_grid_modes(b: usize) -> usize {
    (3 * b + 1).next_power_of_two().max(4)
}

fn cubic_pairing_fft(st: &SystemState) -> Complex64 {
    let d = st.dim();
    let b = st.bandlimit();
    let mut grid = Grid::new(d, padded_grid_modes(b));
    let mut g = grid.zeros();
    let mut us = grid.zeros();
    let mut vs = grid.zeros();
    for j in 0..d {
        st.u.fill_grid(j, &grid, &mut us);
        st.v.fill_grid(j, &grid, &mut vs);
        grid.inverse(&mut us);
        grid.inverse(&mut vs);
        for ((gi, a), bb) in g.iter_mut().zip(&us).zip(&vs) {
            *gi += a * bb.conj();
        }
    }
    grid.forward(&mut g);
    st.w.entries()
        .iter()
        .map(|(xi, aw)| pair_grad(xi, aw, g[grid.index(xi)]))
        .sum()
}

//! Coefficient algebra for the three-wave system and the regime atlas.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative tolerance used for sign decisions on floating inputs.
pub const SIGN_TOL: f64 = 1e-12;

/// Dispersion coefficients `(alpha, beta, gamma)`.
///
/// When built from rationals the exact values are kept alongside the
/// floats and every sign decision is made on them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTriple {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    exact: Option<[BigRational; 3]>,
}

impl CoefficientTriple {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !v.is_finite() || v == 0.0 {
                return invalid(format!("{name} must be finite and nonzero, got {v}"));
            }
        }
        Ok(Self { alpha, beta, gamma, exact: None })
    }

    /// Builds a triple from exact fractions `num/den`.
    pub fn from_ratios(ratios: [(i64, i64); 3]) -> Result<Self> {
        let mut exact = Vec::with_capacity(3);
        for (i, &(n, d)) in ratios.iter().enumerate() {
            if d == 0 {
                return invalid(format!("coefficient {i} has zero denominator"));
            }
            if n == 0 {
                return invalid(format!("coefficient {i} must be nonzero"));
            }
            exact.push(BigRational::new(BigInt::from(n), BigInt::from(d)));
        }
        let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
        let exact: [BigRational; 3] = exact.try_into().expect("three entries");
        Ok(Self {
            alpha: f(&exact[0]),
            beta: f(&exact[1]),
            gamma: f(&exact[2]),
            exact: Some(exact),
        })
    }

    /// Parses `"a,b,c"` where each entry is a decimal or a fraction `n/d`.
    /// Integer and fraction entries keep exact values if all three do.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return invalid(format!("expected three comma-separated coefficients, got {text:?}"));
        }
        let mut ratios = Vec::new();
        for p in &parts {
            match parse_ratio(p) {
                Some(r) => ratios.push(r),
                None => break,
            }
        }
        if ratios.len() == 3 {
            return Self::from_ratios([ratios[0], ratios[1], ratios[2]]);
        }
        let mut vals = [0.0; 3];
        for (v, p) in vals.iter_mut().zip(&parts) {
            *v = p
                .parse::<f64>()
                .map_err(|_| crate::Error::InvalidParameter(format!("bad coefficient {p:?}")))?;
        }
        Self::new(vals[0], vals[1], vals[2])
    }

    pub fn exact(&self) -> Option<&[BigRational; 3]> {
        self.exact.as_ref()
    }

    pub fn max_abs(&self) -> f64 {
        self.alpha.abs().max(self.beta.abs()).max(self.gamma.abs())
    }

    /// `alpha k^2 - beta (k-1)^2 - gamma`
    pub fn k_residual(&self, k: f64) -> f64 {
        self.alpha * k * k - self.beta * (k - 1.0) * (k - 1.0) - self.gamma
    }

    /// Oscillation constant `alpha p^2 - beta (p-q)^2 - gamma q^2` of a plane-wave triple.
    pub fn oscillation(&self, p: i64, q: i64) -> f64 {
        let (p, q) = (p as f64, q as f64);
        self.alpha * p * p - self.beta * (p - q) * (p - q) - self.gamma * q * q
    }
}

/// Parses an integer or `n/d` entry.
pub(crate) fn parse_ratio(p: &str) -> Option<(i64, i64)> {
    if let Some((n, d)) = p.split_once('/') {
        Some((n.trim().parse().ok()?, d.trim().parse().ok()?))
    } else {
        Some((p.parse().ok()?, 1))
    }
}

/// Sign of a quantity, decided exactly for rational triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    fn of_float(x: f64, scale: f64) -> Sign {
        if x.abs() <= SIGN_TOL * scale {
            Sign::Zero
        } else if x > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    fn of_exact(x: &BigRational) -> Sign {
        if x.is_zero() {
            Sign::Zero
        } else if x.is_positive() {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceQuantities {
    pub mu: f64,
    pub kappa: f64,
    pub kappa_tilde: f64,
    pub s_c: f64,
}

/// `mu`, `kappa`, `kappa_tilde` and the critical exponent in dimension `d`.
///
/// `mu` is evaluated in the expanded form `beta gamma - alpha gamma - alpha beta`.
pub fn resonance_coefficients(c: &CoefficientTriple, d: u32) -> ResonanceQuantities {
    let (a, b, g) = (c.alpha, c.beta, c.gamma);
    ResonanceQuantities {
        mu: b * g - a * g - a * b,
        kappa: (a - b) * (a - g) * (b + g),
        kappa_tilde: (a - g) * (b + g),
        s_c: d as f64 / 2.0 - 1.0,
    }
}

/// Signs of `mu`, `kappa`, `kappa_tilde`, `beta + gamma`, `alpha - gamma`,
/// and of the k-equation discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignPattern {
    pub mu: Sign,
    pub kappa: Sign,
    pub kappa_tilde: Sign,
    pub beta_plus_gamma: Sign,
    pub alpha_minus_gamma: Sign,
    pub alpha_minus_beta: Sign,
    pub discriminant: Sign,
}

pub fn sign_pattern(c: &CoefficientTriple) -> SignPattern {
    if let Some([a, b, g]) = c.exact() {
        let bg = b + g;
        let ag = a - g;
        let ab = a - b;
        let mu = b * g - a * g - a * b;
        let disc = a * b - b * g + a * g;
        return SignPattern {
            mu: Sign::of_exact(&mu),
            kappa: Sign::of_exact(&(&ab * &ag * &bg)),
            kappa_tilde: Sign::of_exact(&(&ag * &bg)),
            beta_plus_gamma: Sign::of_exact(&bg),
            alpha_minus_gamma: Sign::of_exact(&ag),
            alpha_minus_beta: Sign::of_exact(&ab),
            discriminant: Sign::of_exact(&disc),
        };
    }
    let m = c.max_abs();
    let q = resonance_coefficients(c, 1);
    let bg = Sign::of_float(c.beta + c.gamma, m);
    let ag = Sign::of_float(c.alpha - c.gamma, m);
    let ab = Sign::of_float(c.alpha - c.beta, m);
    let prod = |s: &[Sign], v: f64| {
        if s.contains(&Sign::Zero) {
            Sign::Zero
        } else {
            Sign::of_float(v, 0.0)
        }
    };
    SignPattern {
        mu: Sign::of_float(q.mu, m * m),
        kappa: prod(&[ab, ag, bg], q.kappa),
        kappa_tilde: prod(&[ag, bg], q.kappa_tilde),
        beta_plus_gamma: bg,
        alpha_minus_gamma: ag,
        alpha_minus_beta: ab,
        discriminant: Sign::of_float(
            c.alpha * c.beta - c.beta * c.gamma + c.alpha * c.gamma,
            m * m,
        ),
    }
}

/// `mu(sigma)` and `kappa(sigma)` for a general triple of dispersion signs.
pub fn generalized_coefficients(s1: f64, s2: f64, s3: f64) -> Result<(f64, f64)> {
    if [s1, s2, s3].iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return invalid("generalized coefficients need finite nonzero sigma");
    }
    let mu = s2 * s3 + s1 * s3 + s1 * s2;
    let kappa = (s1 + s2) * (s2 + s3) * (s3 + s1);
    Ok((mu, kappa))
}

/// Real roots of `alpha k^2 - beta (k-1)^2 - gamma = 0`.
///
/// Uses the cancellation-free form of the quadratic formula.
pub fn resonance_k_roots(c: &CoefficientTriple) -> Vec<f64> {
    let signs = sign_pattern(c);
    let (a, b, g) = (c.alpha, c.beta, c.gamma);
    if signs.alpha_minus_beta == Sign::Zero {
        return vec![(b + g) / (2.0 * b)];
    }
    // (a-b) k^2 + 2 b k - (b+g) = 0, discriminant/4 = ab - bg + ag
    let qa = a - b;
    let qb = b;
    let qc = -(b + g);
    match signs.discriminant {
        Sign::Negative => vec![],
        Sign::Zero => vec![-qb / qa],
        Sign::Positive => {
            let disc = (a * b - b * g + a * g).max(0.0);
            let root = disc.sqrt();
            let t = -(qb + qb.signum() * root);
            let mut ks = vec![t / qa, qc / t];
            // order as (-b + root)/(a-b), (-b - root)/(a-b)
            let plus = (-qb + root) / qa;
            if (ks[0] - plus).abs() > (ks[1] - plus).abs() {
                ks.swap(0, 1);
            }
            ks.iter().map(|&k| polish(c, k)).collect()
        }
    }
}

fn polish(c: &CoefficientTriple, k: f64) -> f64 {
    let d = 2.0 * c.alpha * k - 2.0 * c.beta * (k - 1.0);
    if d == 0.0 {
        return k;
    }
    let next = k - c.k_residual(k) / d;
    if c.k_residual(next).abs() <= c.k_residual(k).abs() {
        next
    } else {
        k
    }
}

/// Exact root `(num + sign*sqrt(disc)) / den` of the k-equation for a rational triple,
/// after scaling the coefficients to integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RootSurd {
    pub num: i128,
    pub root_coeff: i128,
    pub disc: i128,
    pub den: i128,
}

/// Exact k-roots of a rational triple as quadratic surds. `None` for float triples
/// or when the scaled integers overflow.
pub fn resonance_k_surds(c: &CoefficientTriple) -> Option<Vec<RootSurd>> {
    let ex = c.exact()?;
    let lcm = ex.iter().fold(BigInt::from(1), |acc, r| num_integer::lcm(acc, r.denom().clone()));
    let ints: Vec<i128> = ex
        .iter()
        .map(|r| (r * BigRational::from_integer(lcm.clone())).to_integer().to_i128())
        .collect::<Option<_>>()?;
    let (a, b, g) = (ints[0], ints[1], ints[2]);
    if a == b {
        return Some(vec![RootSurd { num: b + g, root_coeff: 0, disc: 0, den: 2 * b }]);
    }
    let disc = a.checked_mul(b)?.checked_sub(b.checked_mul(g)?)?.checked_add(a.checked_mul(g)?)?;
    if disc < 0 {
        return Some(vec![]);
    }
    if disc == 0 {
        return Some(vec![RootSurd { num: -b, root_coeff: 0, disc: 0, den: a - b }]);
    }
    Some(vec![
        RootSurd { num: -b, root_coeff: 1, disc, den: a - b },
        RootSurd { num: -b, root_coeff: -1, disc, den: a - b },
    ])
}

impl RootSurd {
    pub fn value(&self) -> f64 {
        (self.num as f64 + self.root_coeff as f64 * (self.disc as f64).sqrt()) / self.den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeKind {
    CriticalLWP,
    SubcriticalLWP,
    GlobalSmallData,
    NormInflation,
    FlowDiscontinuous,
    NotUniformlyContinuous,
    NotC3,
    EnergyMethodWP,
    Unknown,
}

/// Statement identifiers a claim may cite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Citation {
    #[serde(rename = "Theorem 1.1 (i)")]
    Thm11i,
    #[serde(rename = "Theorem 1.1 (ii)")]
    Thm11ii,
    #[serde(rename = "Theorem 1.1 (iii)")]
    Thm11iii,
    #[serde(rename = "Theorem 1.2 (i)")]
    Thm12i,
    #[serde(rename = "Theorem 1.2 (ii)")]
    Thm12ii,
    #[serde(rename = "Theorem 1.3 (i)")]
    Thm13i,
    #[serde(rename = "Theorem 1.3 (ii)")]
    Thm13ii,
    #[serde(rename = "Theorem 1.4 (i)")]
    Thm14i,
    #[serde(rename = "Theorem 1.4 (ii)")]
    Thm14ii,
    #[serde(rename = "Theorem 1.5")]
    Thm15,
    #[serde(rename = "Theorem 1.6 (i)")]
    Thm16i,
    #[serde(rename = "Theorem 1.6 (ii)")]
    Thm16ii,
    #[serde(rename = "Theorem 1.6 (remark)")]
    Thm16Remark,
    #[serde(rename = "Table 3")]
    Table3,
}

impl Citation {
    pub fn label(self) -> &'static str {
        match self {
            Citation::Thm11i => "Theorem 1.1 (i)",
            Citation::Thm11ii => "Theorem 1.1 (ii)",
            Citation::Thm11iii => "Theorem 1.1 (iii)",
            Citation::Thm12i => "Theorem 1.2 (i)",
            Citation::Thm12ii => "Theorem 1.2 (ii)",
            Citation::Thm13i => "Theorem 1.3 (i)",
            Citation::Thm13ii => "Theorem 1.3 (ii)",
            Citation::Thm14i => "Theorem 1.4 (i)",
            Citation::Thm14ii => "Theorem 1.4 (ii)",
            Citation::Thm15 => "Theorem 1.5",
            Citation::Thm16i => "Theorem 1.6 (i)",
            Citation::Thm16ii => "Theorem 1.6 (ii)",
            Citation::Thm16Remark => "Theorem 1.6 (remark)",
            Citation::Table3 => "Table 3",
        }
    }
}

impl fmt::Display for Citation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeClaim {
    pub kind: RegimeKind,
    pub citation: Citation,
    pub condition: String,
}

struct Ctx {
    d: u32,
    s: f64,
    s_c: f64,
    signs: SignPattern,
    same_sign: bool,
}

impl Ctx {
    fn s_eq(&self, x: f64) -> bool {
        (self.s - x).abs() <= SIGN_TOL * (1.0 + x.abs())
    }
    fn s_gt(&self, x: f64) -> bool {
        self.s > x && !self.s_eq(x)
    }
    fn s_lt(&self, x: f64) -> bool {
        self.s < x && !self.s_eq(x)
    }
    fn mu(&self) -> Sign {
        self.signs.mu
    }
}

struct Rule {
    kind: RegimeKind,
    citation: Citation,
    condition: &'static str,
    applies: fn(&Ctx) -> bool,
}

const RULES: &[Rule] = &[
    Rule {
        kind: RegimeKind::CriticalLWP,
        citation: Citation::Thm11i,
        condition: "d >= 3, mu > 0, s = s_c",
        applies: |x| x.d >= 3 && x.mu() == Sign::Positive && x.s_eq(x.s_c),
    },
    Rule {
        kind: RegimeKind::CriticalLWP,
        citation: Citation::Thm11ii,
        condition: "d >= 4, mu = 0, s = s_c",
        applies: |x| x.d >= 4 && x.mu() == Sign::Zero && x.s_eq(x.s_c),
    },
    Rule {
        kind: RegimeKind::CriticalLWP,
        citation: Citation::Thm11iii,
        condition: "d >= 5, mu < 0, kappa != 0, s = s_c",
        applies: |x| {
            x.d >= 5 && x.mu() == Sign::Negative && x.signs.kappa != Sign::Zero && x.s_eq(x.s_c)
        },
    },
    Rule {
        kind: RegimeKind::SubcriticalLWP,
        citation: Citation::Thm12i,
        condition: "mu > 0, s > s_c, s > 0",
        applies: |x| x.mu() == Sign::Positive && x.s_gt(x.s_c) && x.s_gt(0.0),
    },
    Rule {
        kind: RegimeKind::SubcriticalLWP,
        citation: Citation::Thm12ii,
        condition: "mu <= 0, kappa_tilde != 0, s > s_c, s >= 1, excluding mu < 0 with (d, s) = (3, 1)",
        applies: |x| {
            x.mu() != Sign::Positive
                && x.signs.kappa_tilde != Sign::Zero
                && x.s_gt(x.s_c)
                && (x.s_gt(1.0) || x.s_eq(1.0))
                && !(x.mu() == Sign::Negative && x.d == 3 && x.s_eq(1.0))
        },
    },
    Rule {
        kind: RegimeKind::GlobalSmallData,
        citation: Citation::Thm13i,
        condition: "alpha, beta, gamma of one sign, 1 <= d <= 4, mu >= 0, s = 1",
        applies: |x| x.same_sign && x.d <= 4 && x.mu() != Sign::Negative && x.s_eq(1.0),
    },
    Rule {
        kind: RegimeKind::GlobalSmallData,
        citation: Citation::Thm13ii,
        condition: "alpha, beta, gamma of one sign, 1 <= d <= 2, mu < 0, kappa_tilde != 0, s = 1",
        applies: |x| {
            x.same_sign
                && x.d <= 2
                && x.mu() == Sign::Negative
                && x.signs.kappa_tilde != Sign::Zero
                && x.s_eq(1.0)
        },
    },
    Rule {
        kind: RegimeKind::NormInflation,
        citation: Citation::Thm14i,
        condition: "beta + gamma = 0, s != 0",
        applies: |x| x.signs.beta_plus_gamma == Sign::Zero && !x.s_eq(0.0),
    },
    Rule {
        kind: RegimeKind::NormInflation,
        citation: Citation::Thm14ii,
        condition: "alpha - gamma = 0, s < 0",
        applies: |x| x.signs.alpha_minus_gamma == Sign::Zero && x.s_lt(0.0),
    },
    Rule {
        kind: RegimeKind::FlowDiscontinuous,
        citation: Citation::Thm15,
        condition: "beta + gamma = 0",
        applies: |x| x.signs.beta_plus_gamma == Sign::Zero,
    },
    Rule {
        kind: RegimeKind::NotUniformlyContinuous,
        citation: Citation::Thm16i,
        condition: "alpha - gamma = 0, s >= 0",
        applies: |x| x.signs.alpha_minus_gamma == Sign::Zero && !x.s_lt(0.0),
    },
    Rule {
        kind: RegimeKind::NotUniformlyContinuous,
        citation: Citation::Thm16ii,
        condition: "mu <= 0, s < 1",
        applies: |x| x.mu() != Sign::Positive && x.s_lt(1.0),
    },
    Rule {
        kind: RegimeKind::NotC3,
        citation: Citation::Thm16Remark,
        condition: "d = 1, mu > 0, s < 0",
        applies: |x| x.d == 1 && x.mu() == Sign::Positive && x.s_lt(0.0),
    },
    Rule {
        kind: RegimeKind::EnergyMethodWP,
        citation: Citation::Thm16Remark,
        condition: "alpha - gamma = 0, s > d/2 + 3",
        applies: |x| x.signs.alpha_minus_gamma == Sign::Zero && x.s_gt(x.d as f64 / 2.0 + 3.0),
    },
    Rule {
        kind: RegimeKind::Unknown,
        citation: Citation::Thm16Remark,
        condition: "alpha - gamma = 0, 0 <= s <= d/2 + 3: continuity of the flow is open",
        applies: |x| {
            x.signs.alpha_minus_gamma == Sign::Zero
                && !x.s_lt(0.0)
                && !x.s_gt(x.d as f64 / 2.0 + 3.0)
        },
    },
    Rule {
        kind: RegimeKind::Unknown,
        citation: Citation::Table3,
        condition: "d = 3, mu < 0, kappa != 0, s = 1: well-posedness is open",
        applies: |x| {
            x.d == 3 && x.mu() == Sign::Negative && x.signs.kappa != Sign::Zero && x.s_eq(1.0)
        },
    },
];

/// Every regime statement whose hypothesis holds for `(c, d, s)`.
pub fn classify_regime(c: &CoefficientTriple, d: u32, s: f64) -> Result<Vec<RegimeClaim>> {
    if d == 0 {
        return invalid("dimension must be at least 1");
    }
    if !s.is_finite() {
        return invalid("regularity s must be finite");
    }
    let same_sign = (c.alpha > 0.0) == (c.beta > 0.0) && (c.beta > 0.0) == (c.gamma > 0.0);
    let ctx = Ctx {
        d,
        s,
        s_c: d as f64 / 2.0 - 1.0,
        signs: sign_pattern(c),
        same_sign,
    };
    let mut claims: Vec<RegimeClaim> = RULES
        .iter()
        .filter(|r| (r.applies)(&ctx))
        .map(|r| RegimeClaim {
            kind: r.kind,
            citation: r.citation,
            condition: r.condition.to_string(),
        })
        .collect();
    if claims.is_empty() {
        claims.push(RegimeClaim {
            kind: RegimeKind::Unknown,
            citation: Citation::Table3,
            condition: "no listed statement applies".to_string(),
        });
    }
    Ok(claims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(c: &CoefficientTriple, d: u32, s: f64) -> Vec<(RegimeKind, Citation)> {
        classify_regime(c, d, s).unwrap().into_iter().map(|c| (c.kind, c.citation)).collect()
    }

    #[test]
    fn rejects_zero_coefficient() {
        assert!(CoefficientTriple::new(1.0, 0.0, 2.0).is_err());
        assert!(CoefficientTriple::from_ratios([(1, 1), (0, 3), (1, 1)]).is_err());
    }

    #[test]
    fn coefficients_one_two_three() {
        let c = CoefficientTriple::new(1.0, 2.0, 3.0).unwrap();
        let q = resonance_coefficients(&c, 3);
        assert_eq!(q.mu, 1.0);
        assert_eq!(q.kappa, 10.0);
        assert_eq!(q.kappa_tilde, -10.0);
        assert_eq!(q.s_c, 0.5);
        // product form of mu agrees
        let prod = 1.0 * 2.0 * 3.0 * (1.0 / 1.0 - 1.0 / 2.0 - 1.0 / 3.0);
        assert!((prod - q.mu).abs() < 1e-14);
    }

    #[test]
    fn vanishing_factors() {
        let c = CoefficientTriple::new(1.0, 1.0, -1.0).unwrap();
        let q = resonance_coefficients(&c, 1);
        assert_eq!(q.kappa, 0.0);
        assert_eq!(q.s_c, -0.5);
        let c = CoefficientTriple::new(1.0, 1.0, 1.0).unwrap();
        let q = resonance_coefficients(&c, 2);
        assert_eq!((q.mu, q.kappa, q.kappa_tilde, q.s_c), (-1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn generalized_examples() {
        assert_eq!(generalized_coefficients(1.0, -2.0, 1.0).unwrap().0, -3.0);
        assert_eq!(generalized_coefficients(1.0, 1.0, -1.0).unwrap().1, 0.0);
        assert_eq!(generalized_coefficients(1.0, -2.0, -3.0).unwrap().1, -10.0);
        assert!(generalized_coefficients(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn k_roots_examples() {
        let c = CoefficientTriple::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(resonance_k_roots(&c), vec![1.0]);
        let c = CoefficientTriple::new(1.0, 2.0, 3.0).unwrap();
        assert!(resonance_k_roots(&c).is_empty());
        let c = CoefficientTriple::new(2.0, 1.0, 1.0).unwrap();
        let r = resonance_k_roots(&c);
        assert_eq!(r.len(), 2);
        assert!((r[0] - (3f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((r[1] + 3f64.sqrt() + 1.0).abs() < 1e-15);
        for k in r {
            assert!((2.0 * k * k - (k - 1.0) * (k - 1.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn surd_roots_match_floats() {
        let c = CoefficientTriple::from_ratios([(2, 1), (1, 1), (1, 1)]).unwrap();
        let s = resonance_k_surds(&c).unwrap();
        assert_eq!(s[0], RootSurd { num: -1, root_coeff: 1, disc: 3, den: 1 });
        let f = resonance_k_roots(&c);
        for (a, b) in s.iter().zip(&f) {
            assert!((a.value() - b).abs() < 1e-14);
        }
        let c = CoefficientTriple::from_ratios([(1, 2), (1, 3), (1, 1)]).unwrap();
        let s = resonance_k_surds(&c).unwrap();
        let f = resonance_k_roots(&c);
        assert_eq!(s.len(), f.len());
        for (a, b) in s.iter().zip(&f) {
            assert!((a.value() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_sign_decisions() {
        // 1/3 + 2/3 - 1 = 0 exactly, not in binary floating point
        let c = CoefficientTriple::from_ratios([(1, 1), (1, 3), (-1, 3)]).unwrap();
        assert_eq!(sign_pattern(&c).beta_plus_gamma, Sign::Zero);
        let c = CoefficientTriple::parse("1, 1/3, -1/3").unwrap();
        assert!(c.exact().is_some());
        let c = CoefficientTriple::parse("1.5, 2, 3").unwrap();
        assert!(c.exact().is_none());
    }

    #[test]
    fn atlas_examples() {
        let c = CoefficientTriple::new(1.0, 1.0, -1.0).unwrap();
        let k = kinds(&c, 2, 0.5);
        assert!(k.contains(&(RegimeKind::NormInflation, Citation::Thm14i)));
        assert!(k.contains(&(RegimeKind::FlowDiscontinuous, Citation::Thm15)));

        let c = CoefficientTriple::new(1.0, 2.0, 3.0).unwrap();
        assert!(kinds(&c, 3, 0.5).contains(&(RegimeKind::CriticalLWP, Citation::Thm11i)));

        let c = CoefficientTriple::new(1.0, 1.0, 1.0).unwrap();
        assert!(kinds(&c, 2, 0.5).contains(&(RegimeKind::NotUniformlyContinuous, Citation::Thm16ii)));
    }

    #[test]
    fn atlas_open_cases() {
        // alpha = gamma, moderate regularity
        let c = CoefficientTriple::new(1.0, 2.0, 1.0).unwrap();
        let k = kinds(&c, 1, 2.0);
        assert!(k.iter().any(|(kind, _)| *kind == RegimeKind::Unknown));
        assert!(kinds(&c, 1, 4.0).contains(&(RegimeKind::EnergyMethodWP, Citation::Thm16Remark)));

        // mu < 0, kappa != 0 in H^1(T^3)
        let c = CoefficientTriple::new(2.0, 1.0, 1.5).unwrap();
        let q = resonance_coefficients(&c, 3);
        assert!(q.mu < 0.0 && q.kappa != 0.0);
        let k = kinds(&c, 3, 1.0);
        assert!(k.contains(&(RegimeKind::Unknown, Citation::Table3)));
        assert!(!k.iter().any(|(kind, _)| *kind == RegimeKind::SubcriticalLWP));
        assert!(kinds(&c, 3, 1.01).contains(&(RegimeKind::SubcriticalLWP, Citation::Thm12ii)));
    }

    #[test]
    fn atlas_is_never_empty() {
        let c = CoefficientTriple::new(1.0, 2.0, 3.0).unwrap();
        // mu > 0, d = 1, s = -0.25 > s_c but s < 0: only NotC3
        let k = kinds(&c, 1, -0.25);
        assert_eq!(k, vec![(RegimeKind::NotC3, Citation::Thm16Remark)]);
        let k = kinds(&c, 2, 0.0);
        assert_eq!(k[0].0, RegimeKind::Unknown);
    }

    #[test]
    fn global_small_data() {
        let c = CoefficientTriple::new(1.0, 2.0, 3.0).unwrap();
        assert!(kinds(&c, 4, 1.0).contains(&(RegimeKind::GlobalSmallData, Citation::Thm13i)));
        let c = CoefficientTriple::new(-1.0, 2.0, 3.0).unwrap();
        assert!(!kinds(&c, 2, 1.0).iter().any(|(k, _)| *k == RegimeKind::GlobalSmallData));
    }
}

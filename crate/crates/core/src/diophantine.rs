//! Continued-fraction convergents `p/q` of a real number.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::resonance::RootSurd;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergent {
    pub p: i64,
    pub q: i64,
    /// `|k - p/q|`
    pub err: f64,
}

/// Collects convergents from partial quotients, dropping an earlier one whenever the
/// next shares its denominator (this happens only for the first two when `a_1 = 1`).
struct Builder {
    prev: (i128, i128),
    cur: (i128, i128),
    out: Vec<(i64, i64)>,
}

impl Builder {
    fn new() -> Self {
        Self { prev: (0, 1), cur: (1, 0), out: Vec::new() }
    }

    /// Returns false on overflow.
    fn push(&mut self, a: i128) -> bool {
        let p = a.checked_mul(self.cur.0).and_then(|x| x.checked_add(self.prev.0));
        let q = a.checked_mul(self.cur.1).and_then(|x| x.checked_add(self.prev.1));
        let (Some(p), Some(q)) = (p, q) else { return false };
        let (Ok(pi), Ok(qi)) = (i64::try_from(p), i64::try_from(q)) else { return false };
        self.prev = self.cur;
        self.cur = (p, q);
        if let Some(last) = self.out.last() {
            if last.1 == qi {
                self.out.pop();
            }
        }
        self.out.push((pi, qi));
        true
    }
}

/// Appends `(j p, j q)` for `j = 2, 3, ...` once a rational expansion terminates.
fn extend_with_multiples(out: &mut Vec<(i64, i64)>, count: usize) {
    let (p, q) = *out.last().expect("at least one convergent");
    let mut j = 2i64;
    while out.len() < count {
        out.push((j * p, j * q));
        j += 1;
    }
}

/// The first `count` convergents of `k`, with strictly increasing denominators.
///
/// The expansion runs on the exact binary value of `k`. It is exact for
/// denominators until they approach the resolution of `k` (about `1e8` for a
/// float near 1). Use [`convergents_surd`] for exact long runs.
pub fn convergents(k: f64, count: usize) -> Result<Vec<Convergent>> {
    if !k.is_finite() {
        return invalid("k must be finite");
    }
    if count == 0 {
        return invalid("count must be positive");
    }
    let exact = BigRational::from_float(k).expect("finite float");
    let (mut num, mut den) = (exact.numer().clone(), exact.denom().clone());
    let mut b = Builder::new();
    let mut terminated = false;
    while b.out.len() < count {
        let (a, r) = num.div_mod_floor(&den);
        let Some(a) = a.to_i128() else { break };
        if !b.push(a) {
            break;
        }
        if r.is_zero() {
            terminated = true;
            break;
        }
        num = den;
        den = r;
    }
    if terminated {
        extend_with_multiples(&mut b.out, count);
    }
    Ok(b.out
        .into_iter()
        .take(count)
        .map(|(p, q)| Convergent { p, q, err: rational_err(&exact, p, q) })
        .collect())
}

fn rational_err(k: &BigRational, p: i64, q: i64) -> f64 {
    let d = k - BigRational::new(BigInt::from(p), BigInt::from(q));
    d.abs().to_f64().unwrap_or(f64::INFINITY)
}

fn isqrt(n: i128) -> i128 {
    let mut x = (n as f64).sqrt() as i128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Convergents of an exact root `(num + root_coeff sqrt(disc)) / den`.
pub fn convergents_surd(k: &RootSurd, count: usize) -> Result<Vec<Convergent>> {
    if count == 0 {
        return invalid("count must be positive");
    }
    if k.den == 0 {
        return invalid("surd denominator must be nonzero");
    }
    let s = isqrt(k.disc.max(0));
    let rational = k.root_coeff == 0 || k.disc == 0 || s * s == k.disc;
    if rational {
        let num = k.num + k.root_coeff * s;
        let r = BigRational::new(BigInt::from(num), BigInt::from(k.den));
        return exact_rational_convergents(&r, count)
            .ok_or_else(|| crate::Error::InvalidParameter("convergent overflow".into()));
    }
    // x = (P + sqrt(D)) / Q with Q | D - P^2
    let (num, den) = if k.root_coeff > 0 { (k.num, k.den) } else { (-k.num, -k.den) };
    let b2d = k.root_coeff.checked_mul(k.root_coeff).and_then(|r| r.checked_mul(k.disc));
    let Some(b2d) = b2d else { return invalid("surd too large") };
    let ad = den.abs();
    let (mut p, mut q, d) = (
        num * ad,
        den * ad,
        b2d.checked_mul(den * den).ok_or_else(|| crate::Error::InvalidParameter("surd too large".into()))?,
    );
    let sd = isqrt(d);
    let value = (num as f64 + (b2d as f64).sqrt()) / den as f64;
    let mut b = Builder::new();
    let mut a_terms = 0;
    while b.out.len() < count && a_terms < 400 {
        let a = if q > 0 { floor_div(p + sd, q) } else { floor_div(p + sd + 1, q) };
        if !b.push(a) {
            break;
        }
        a_terms += 1;
        p = a * q - p;
        q = match (d - p * p).checked_div(q) {
            Some(v) if v != 0 => v,
            _ => break,
        };
    }
    Ok(b.out
        .into_iter()
        .take(count)
        .map(|(pp, qq)| Convergent { p: pp, q: qq, err: surd_err(num, b2d, den, pp, qq, value) })
        .collect())
}

fn floor_div(a: i128, b: i128) -> i128 {
    let (q, r) = (a / b, a % b);
    if r != 0 && ((r < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

/// `|(num + sqrt(b2d))/den - p/q|` without cancellation:
/// with `X = q num - p den` the numerator is `|X + q sqrt(b2d)| = |X^2 - q^2 b2d| / |X - q sqrt(b2d)|`.
fn surd_err(num: i128, b2d: i128, den: i128, p: i64, q: i64, value: f64) -> f64 {
    let (p, q) = (p as i128, q as i128);
    let x = q.checked_mul(num).and_then(|a| p.checked_mul(den).and_then(|b| a.checked_sub(b)));
    let direct = (value - p as f64 / q as f64).abs();
    let Some(x) = x else { return direct };
    let prod = x.checked_mul(x).and_then(|xx| q.checked_mul(q).and_then(|qq| qq.checked_mul(b2d)).map(|r| xx - r));
    let Some(prod) = prod else { return direct };
    let conj = (x as f64 - q as f64 * (b2d as f64).sqrt()).abs();
    if conj == 0.0 {
        return direct;
    }
    (prod as f64).abs() / conj / (q as f64 * den.abs() as f64)
}

fn exact_rational_convergents(r: &BigRational, count: usize) -> Option<Vec<Convergent>> {
    let (mut num, mut den) = (r.numer().clone(), r.denom().clone());
    let mut b = Builder::new();
    loop {
        let (a, rem) = num.div_mod_floor(&den);
        if !b.push(a.to_i128()?) {
            return None;
        }
        if rem.is_zero() || b.out.len() >= count {
            break;
        }
        num = den;
        den = rem;
    }
    if b.out.len() < count {
        extend_with_multiples(&mut b.out, count);
    }
    Some(
        b.out
            .into_iter()
            .take(count)
            .map(|(p, q)| Convergent { p, q, err: rational_err(r, p, q) })
            .collect(),
    )
}

//! FFT workspace on the uniform grid of `T^1` or `T^2`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Plans and scratch space for `m`-point transforms along each of `d <= 2` axes.
///
/// Physical samples sit at `x_n = 2 pi n / m`. Layout is row-major with axis 0 slowest.
pub struct Grid {
    d: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Grid {
    pub fn new(d: usize, m: usize) -> Self {
        assert!(d == 1 || d == 2, "grid supports d = 1 or 2");
        assert!(m >= 2);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            d,
            m,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            tmp: if d == 2 { vec![Complex64::new(0.0, 0.0); m * m] } else { Vec::new() },
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.len()]
    }

    /// Grid slot of lattice frequency `xi` (wrapped modulo `m`).
    pub fn index(&self, xi: &[i64]) -> usize {
        let m = self.m as i64;
        xi.iter().fold(0usize, |acc, &k| acc * self.m + k.rem_euclid(m) as usize)
    }

    /// Signed frequency stored at slot `i` along one axis.
    pub fn freq_1d(&self, i: usize) -> i64 {
        if i <= self.m / 2 {
            i as i64
        } else {
            i as i64 - self.m as i64
        }
    }

    /// Signed frequency vector of slot `idx`.
    pub fn freq(&self, idx: usize) -> [i64; 2] {
        if self.d == 1 {
            [self.freq_1d(idx), 0]
        } else {
            [self.freq_1d(idx / self.m), self.freq_1d(idx % self.m)]
        }
    }

    /// Amplitudes to physical samples: `f_n = sum_k a_k exp(2 pi i k n / m)`.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        let plan = self.inv.clone();
        self.apply(&*plan, buf);
    }

    /// Physical samples to amplitudes (normalized by the number of grid points).
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        let plan = self.fwd.clone();
        self.apply(&*plan, buf);
        let scale = 1.0 / self.len() as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    fn apply(&mut self, plan: &dyn Fft<f64>, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.len());
        plan.process_with_scratch(buf, &mut self.scratch);
        if self.d == 2 {
            transpose(buf, &mut self.tmp, self.m);
            plan.process_with_scratch(&mut self.tmp, &mut self.scratch);
            transpose(&self.tmp, buf, self.m);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in 0..m {
            dst[j * m + i] = src[i * m + j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(a: &[Complex64], m: usize, d: usize) -> Vec<Complex64> {
        let g = Grid::new(d, m);
        let mut out = g.zeros();
        for (n, o) in out.iter_mut().enumerate() {
            let xn = if d == 1 { [n as f64, 0.0] } else { [(n / m) as f64, (n % m) as f64] };
            for (k, ak) in a.iter().enumerate() {
                let kk = g.freq(k);
                let ph = 2.0 * std::f64::consts::PI * (kk[0] as f64 * xn[0] + kk[1] as f64 * xn[1])
                    / m as f64;
                *o += ak * Complex64::from_polar(1.0, ph);
            }
        }
        out
    }

    #[test]
    fn inverse_matches_direct_sum() {
        for d in [1, 2] {
            let m = 8;
            let g0 = Grid::new(d, m);
            let a: Vec<Complex64> = (0..g0.len())
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let mut buf = a.clone();
            let mut g = Grid::new(d, m);
            g.inverse(&mut buf);
            let want = direct(&a, m, d);
            for (x, y) in buf.iter().zip(&want) {
                assert!((x - y).norm() < 1e-12);
            }
            g.forward(&mut buf);
            for (x, y) in buf.iter().zip(&a) {
                assert!((x - y).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(2, 16);
        for idx in [0, 5, 17, 100, 255] {
            let f = g.freq(idx);
            assert_eq!(g.index(&f), idx);
        }
    }
}

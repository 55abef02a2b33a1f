//! Band-limited 2D FFT synthesis/analysis between half-lattice spectra and
//! packed grids `z = u₁ + i u₂` (row-major `(j1, j2)`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectral::{half_lattice, half_lattice_len, ModeIndex, Vec2c};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub struct GridTransform {
    cutoff: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Distinct residues `k mod m` for `|k| ≤ cutoff`.
    band: Vec<usize>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl GridTransform {
    /// Loss-free transform pair; requires `m ≥ 2N + 2`.
    pub fn new(cutoff: usize, m: usize) -> Result<Self> {
        if m < 2 * cutoff + 2 {
            return Err(Error::Resolution { m, need: 2 * cutoff + 2, why: "m >= 2N + 2 for an exact transform pair" });
        }
        Ok(Self::with_resolution(cutoff, m))
    }

    /// Any `m ≥ 1`; coarser grids fold (alias) modes onto each other.
    pub fn with_resolution(cutoff: usize, m: usize) -> Self {
        assert!(m >= 1);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let n = cutoff as i64;
        let mut band: Vec<usize> = (-n..=n).map(|k| k.rem_euclid(m as i64) as usize).collect();
        band.sort_unstable();
        band.dedup();
        Self {
            cutoff,
            m,
            fwd,
            inv,
            band,
            tmp: vec![ZERO; m * m],
            scratch: vec![ZERO; scratch_len],
        }
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Evaluates `Σ mul(s) û_s e^{is·x} / 2π` over the full lattice, packed as
    /// `u₁ + i u₂`. `mul` must satisfy `mul(-s) = conj(mul(s))` for real output.
    pub fn synthesize(&mut self, coeffs: &[Vec2c], mul: impl Fn(ModeIndex) -> Complex64, out: &mut [Complex64]) {
        let m = self.m;
        assert_eq!(coeffs.len(), half_lattice_len(self.cutoff));
        assert_eq!(out.len(), m * m);
        let i = Complex64::new(0.0, 1.0);
        let scale = 1.0 / (2.0 * PI);
        // Spectrum laid out as [k2][k1].
        let spec = &mut self.tmp;
        spec.fill(ZERO);
        for (p, c) in half_lattice(self.cutoff).zip(coeffs) {
            let q = p.neg();
            let a = mul(p) * scale;
            let b = mul(q) * scale;
            let zp = (c[0] + i * c[1]) * a;
            let zq = (c[0].conj() + i * c[1].conj()) * b;
            spec[wrap(p.s2, m) * m + wrap(p.s1, m)] += zp;
            spec[wrap(q.s2, m) * m + wrap(q.s1, m)] += zq;
        }
        for &r in &self.band {
            self.inv.process_with_scratch(&mut spec[r * m..(r + 1) * m], &mut self.scratch);
        }
        // [k2][x1] → [x1][k2]
        for a in 0..m {
            for b in 0..m {
                out[b * m + a] = spec[a * m + b];
            }
        }
        self.inv.process_with_scratch(out, &mut self.scratch);
    }

    /// Inverse of [`synthesize`](Self::synthesize) restricted to the band.
    /// Consumes `grid` as workspace; returns raw half-lattice coefficients.
    pub fn analyze(&mut self, grid: &mut [Complex64]) -> Vec<Vec2c> {
        let m = self.m;
        assert_eq!(grid.len(), m * m);
        self.fwd.process_with_scratch(grid, &mut self.scratch);
        // [x1][k2] → [k2][x1], band rows only.
        let spec = &mut self.tmp;
        for &r in &self.band {
            for a in 0..m {
                spec[r * m + a] = grid[a * m + r];
            }
            self.fwd.process_with_scratch(&mut spec[r * m..(r + 1) * m], &mut self.scratch);
        }
        let f = 2.0 * PI / (m * m) as f64;
        let half_i = Complex64::new(0.0, -0.5);
        half_lattice(self.cutoff)
            .map(|p| {
                let zp = spec[wrap(p.s2, m) * m + wrap(p.s1, m)];
                let zq = spec[wrap(-p.s2, m) * m + wrap(-p.s1, m)].conj();
                [(zp + zq) * (0.5 * f), (zp - zq) * half_i * f]
            })
            .collect()
    }
}

#[inline]
fn wrap(k: i32, m: usize) -> usize {
    (k as i64).rem_euclid(m as i64) as usize
}

/// Smallest integer `≥ n` whose prime factors are 2, 3 and 5.
pub fn fft_friendly(n: usize) -> usize {
    let mut k = n.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random_field;

    #[test]
    fn friendly_sizes() {
        assert_eq!(fft_friendly(25), 25);
        assert_eq!(fft_friendly(49), 50);
        assert_eq!(fft_friendly(7), 8);
        assert_eq!(fft_friendly(1), 1);
    }

    #[test]
    fn round_trip_raw() {
        let u = random_field(5, 2, 0.0);
        let mut t = GridTransform::new(5, 12).unwrap();
        let mut z = vec![ZERO; 144];
        t.synthesize(u.coeffs(), |_| Complex64::new(1.0, 0.0), &mut z);
        assert!(z.iter().all(|c| c.re.is_finite()));
        let back = t.analyze(&mut z);
        for (a, b) in back.iter().zip(u.coeffs()) {
            assert!((a[0] - b[0]).norm() < 1e-13 && (a[1] - b[1]).norm() < 1e-13);
        }
    }
}

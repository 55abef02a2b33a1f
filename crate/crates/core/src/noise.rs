//! Truncated Q-Wiener noise `W(t) = Σ q_s β_s(t) e_s` and the time-periodic
//! multiplicative coefficient `σ(t, h)`.
//!
//! `σ` acts diagonally on the noise modes:
//! `(σ(t, h) dβ)_s = g(t) ρ(‖h‖²) q_s dβ_s` with `g(t) = 1 + γ cos(2πt/P)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mode_stream, Namespace, Stream};
use crate::spectral::{basis_coefficient, slot_of, ModeIndex, SpectralField, Vec2c};

/// Active modes and their amplitudes `q_s`. Each `s ∈ ℤ²₀` is its own real
/// direction `e_s`, so `s` and `-s` are independent.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    modes: Vec<ModeIndex>,
    q: Vec<f64>,
}

impl NoiseModel {
    pub fn new(modes: Vec<ModeIndex>, q: Vec<f64>) -> Result<Self> {
        if modes.len() != q.len() {
            return Err(Error::Config(format!("noise: {} modes but {} amplitudes", modes.len(), q.len())));
        }
        if q.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config("noise amplitudes must be finite and nonnegative".into()));
        }
        let mut seen = modes.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != modes.len() {
            return Err(Error::Config("noise modes must be distinct".into()));
        }
        if modes.iter().any(|s| s.s1 == 0 && s.s2 == 0) {
            return Err(Error::ZeroMode);
        }
        Ok(Self { modes, q })
    }

    pub fn off() -> Self {
        Self { modes: Vec::new(), q: Vec::new() }
    }

    /// Every mode with `|s|∞ ≤ cutoff`, `q_s = amplitude · |s|^{-exponent}`.
    pub fn power_law(cutoff: usize, amplitude: f64, exponent: f64) -> Result<Self> {
        let n = cutoff as i32;
        let modes: Vec<ModeIndex> = (-n..=n)
            .flat_map(|a| (-n..=n).map(move |b| (a, b)))
            .filter(|&ab| ab != (0, 0))
            .map(|(a, b)| ModeIndex::new_unchecked(a, b))
            .collect();
        let q = modes.iter().map(|s| amplitude * s.norm().powf(-exponent)).collect();
        Self::new(modes, q)
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `(Σ q_s²)^{1/2} = ‖Q‖_HS`.
    pub fn hs_norm(&self) -> f64 {
        self.q.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_mode(&self) -> usize {
        self.modes.iter().map(|s| s.linf()).max().unwrap_or(0)
    }

    /// Precomputed `(slot, coefficient of e_s)` for each mode at `cutoff`.
    pub fn embed(&self, cutoff: usize) -> Result<NoiseEmbedding> {
        let slots = self
            .modes
            .iter()
            .map(|&s| {
                let (p, c) = basis_coefficient(s);
                let k = slot_of(cutoff, p).ok_or(Error::OutsideBand { s1: s.s1, s2: s.s2, cutoff })?;
                Ok((k, c))
            })
            .collect::<Result<_>>()?;
        Ok(NoiseEmbedding { cutoff, slots, q: self.q.clone() })
    }
}

/// Noise modes laid out in a field's storage.
#[derive(Clone, Debug)]
pub struct NoiseEmbedding {
    cutoff: usize,
    slots: Vec<(usize, Vec2c)>,
    q: Vec<f64>,
}

impl NoiseEmbedding {
    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// `coeffs += factor · Σ q_s dβ_s e_s`.
    pub fn accumulate(&self, factor: f64, dbeta: &[f64], coeffs: &mut [Vec2c]) {
        assert_eq!(dbeta.len(), self.slots.len());
        for ((&(k, c), &q), &w) in self.slots.iter().zip(&self.q).zip(dbeta) {
            let a = factor * q * w;
            coeffs[k][0] += c[0] * a;
            coeffs[k][1] += c[1] * a;
        }
    }

    pub fn field(&self, factor: f64, dbeta: &[f64]) -> SpectralField {
        let mut u = SpectralField::zeros(self.cutoff);
        self.accumulate(factor, dbeta, u.coeffs_mut());
        u
    }
}

/// State gain `ρ(y)` evaluated at `y = ‖h‖²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    /// `ρ(y) = ρ₀ / (1 + y)`.
    Decaying,
    /// `ρ(y) = ρ₀`; makes the noise additive.
    Constant,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigmaModel {
    pub period: f64,
    pub gamma: f64,
    pub rho0: f64,
    pub gain: Gain,
    pub noise: NoiseModel,
}

impl SigmaModel {
    pub fn new(period: f64, gamma: f64, rho0: f64, gain: Gain, noise: NoiseModel) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Config(format!("sigma period must be positive, got {period}")));
        }
        if !(gamma.abs() <= 1.0) {
            return Err(Error::Config(format!("sigma gamma must satisfy |gamma| <= 1, got {gamma}")));
        }
        if !rho0.is_finite() {
            return Err(Error::Config("sigma rho0 must be finite".into()));
        }
        Ok(Self { period, gamma, rho0, gain, noise })
    }

    /// No noise at all.
    pub fn off() -> Self {
        Self { period: 1.0, gamma: 0.0, rho0: 0.0, gain: Gain::Constant, noise: NoiseModel::off() }
    }

    /// `g(t) = 1 + γ cos(2π t/P)`. The phase is reduced with `fmod`, which is
    /// exact, so `g(t + P) == g(t)` whenever `t + P` is representable.
    pub fn g(&self, t: f64) -> f64 {
        let r = t.rem_euclid(self.period);
        1.0 + self.gamma * (TAU * r / self.period).cos()
    }

    /// `ḡ = (1/P) ∫₀ᴾ g`. The cosine integrates to zero over a period.
    pub fn g_bar(&self) -> f64 {
        1.0
    }

    pub fn rho(&self, y: f64) -> f64 {
        match self.gain {
            Gain::Decaying => self.rho0 / (1.0 + y),
            Gain::Constant => self.rho0,
        }
    }

    /// Scalar multiplier `g(t) ρ(‖h‖²)`.
    pub fn factor(&self, t: f64, h: &SpectralField) -> f64 {
        let n = h.norm();
        self.g(t) * self.rho(n * n)
    }

    pub fn averaged_factor(&self, h: &SpectralField) -> f64 {
        let n = h.norm();
        self.g_bar() * self.rho(n * n)
    }

    /// `L` with `‖σ(t,h₁)dβ − σ(t,h₂)dβ‖ ≤ L ‖h₁ − h₂‖ ‖Q dβ‖`.
    ///
    /// With `r = ‖h‖`, `|d/dr ρ₀/(1 + r²)| = 2ρ₀ r/(1 + r²)²` peaks at
    /// `r = 1/√3` with value `ρ₀ 3√3/8`; `‖h₁‖ - ‖h₂‖` is bounded by
    /// `‖h₁ - h₂‖`, and `sup|g| = 1 + |γ|`.
    pub fn lipschitz_constant(&self) -> f64 {
        match self.gain {
            Gain::Decaying => (1.0 + self.gamma.abs()) * self.rho0.abs() * 3.0 * 3f64.sqrt() / 8.0,
            Gain::Constant => 0.0,
        }
    }

    /// `(Σ (g ρ q_s)²)^{1/2}`.
    pub fn hs_norm(&self, t: f64, h: &SpectralField) -> f64 {
        self.factor(t, h).abs() * self.noise.hs_norm()
    }

    /// `σ(t, h) dβ`.
    pub fn apply(&self, t: f64, h: &SpectralField, dbeta: &[f64]) -> Result<SpectralField> {
        Ok(self.noise.embed(h.cutoff())?.field(self.factor(t, h), dbeta))
    }

    /// `σ̄(h) dβ = ḡ ρ(‖h‖²) Q dβ`.
    pub fn apply_averaged(&self, h: &SpectralField, dbeta: &[f64]) -> Result<SpectralField> {
        Ok(self.noise.embed(h.cutoff())?.field(self.averaged_factor(h), dbeta))
    }
}

pub fn apply_sigma(m: &SigmaModel, t: f64, h: &SpectralField, dbeta: &[f64]) -> Result<SpectralField> {
    m.apply(t, h, dbeta)
}

pub fn averaged_sigma(m: &SigmaModel, h: &SpectralField, dbeta: &[f64]) -> Result<SpectralField> {
    m.apply_averaged(h, dbeta)
}

/// Brownian increments `Δβ_s` (standard deviation `√dt`) for every noise
/// mode and step. The Q-Wiener increment is `ΔW_s = q_s Δβ_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementTable {
    dt: f64,
    steps: usize,
    q: Vec<f64>,
    /// Step-major: `beta[step * modes + j]`.
    beta: Vec<f64>,
}

impl IncrementTable {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn modes(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    /// `Δβ` for every mode at `step`.
    pub fn beta(&self, step: usize) -> &[f64] {
        let n = self.q.len();
        &self.beta[step * n..(step + 1) * n]
    }

    /// `ΔW_s = q_s Δβ_s` for mode `j` at `step`.
    pub fn wiener(&self, step: usize, j: usize) -> f64 {
        self.q[j] * self.beta[step * self.q.len() + j]
    }

    /// Sums groups of `factor` consecutive steps: the same Brownian path
    /// observed at step `factor · dt`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::Config(format!("cannot coarsen {} steps by {factor}", self.steps)));
        }
        let n = self.q.len();
        let steps = self.steps / factor;
        let mut beta = vec![0.0; steps * n];
        for k in 0..steps {
            for i in 0..factor {
                let src = self.beta(k * factor + i);
                for (b, s) in beta[k * n..(k + 1) * n].iter_mut().zip(src) {
                    *b += s;
                }
            }
        }
        Ok(Self { dt: self.dt * factor as f64, steps, q: self.q.clone(), beta })
    }
}

/// Draws `steps` increments per mode. Mode `s` reads its own counter stream
/// sequentially, so the table does not depend on mode order or threading.
pub fn sample_increments(noise: &NoiseModel, dt: f64, steps: usize, seed: u64) -> Result<IncrementTable> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let n = noise.len();
    let sq = dt.sqrt();
    let mut beta = vec![0.0; steps * n];
    for (j, &s) in noise.modes.iter().enumerate() {
        let mut st = Stream::new(seed, mode_stream(Namespace::Noise, s));
        for k in 0..steps {
            beta[k * n + j] = sq * st.normal();
        }
    }
    Ok(IncrementTable { dt, steps, q: noise.q.clone(), beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::random_field;

    fn small_noise() -> NoiseModel {
        NoiseModel::new(
            vec![ModeIndex::new_unchecked(1, 0), ModeIndex::new_unchecked(-1, 0), ModeIndex::new_unchecked(1, 2)],
            vec![0.5, 1.0, 0.25],
        )
        .unwrap()
    }

    fn model(gamma: f64) -> SigmaModel {
        SigmaModel::new(0.5, gamma, 1.5, Gain::Decaying, small_noise()).unwrap()
    }

    #[test]
    fn increments_have_the_right_variance() {
        let noise = small_noise();
        let dt = 0.01;
        let n = 100_000;
        let t = sample_increments(&noise, dt, n, 4).unwrap();
        for j in 0..noise.len() {
            let q = noise.amplitudes()[j];
            let var: f64 = (0..n).map(|k| t.wiener(k, j).powi(2)).sum::<f64>() / n as f64;
            let target = q * q * dt;
            // Var of a squared normal is 2 target².
            let band = 3.0 * (2.0f64).sqrt() * target / (n as f64).sqrt();
            assert!((var - target).abs() < band, "mode {j}: {var} vs {target}");
        }
        let cov: f64 = (0..n).map(|k| t.beta(k)[0] * t.beta(k)[1]).sum::<f64>() / n as f64;
        assert!(cov.abs() < 3.0 * dt / (n as f64).sqrt());
    }

    #[test]
    fn zero_steps_is_empty() {
        let t = sample_increments(&small_noise(), 0.1, 0, 1).unwrap();
        assert!(t.is_empty());
        assert!(sample_increments(&small_noise(), 0.0, 3, 1).is_err());
    }

    #[test]
    fn coarsening_sums_pairs() {
        let t = sample_increments(&small_noise(), 0.25, 8, 2).unwrap();
        let c = t.coarsen(2).unwrap();
        assert_eq!(c.steps(), 4);
        assert_eq!(c.dt(), 0.5);
        assert_eq!(c.beta(1)[2], t.beta(2)[2] + t.beta(3)[2]);
        assert!(t.coarsen(3).is_err());
    }

    #[test]
    fn additive_action_at_rest() {
        let m = SigmaModel::new(1.0, 0.0, 1.0, Gain::Decaying, small_noise()).unwrap();
        let h = SpectralField::zeros(3);
        let w = [0.3, -0.2, 1.1];
        let out = m.apply(0.7, &h, &w).unwrap();
        let expect =
            SpectralField::from_basis_coords(3, &[(m.noise.modes()[0], 0.15), (m.noise.modes()[1], -0.2), (m.noise.modes()[2], 0.275)])
                .unwrap();
        assert!(out.sub(&expect).norm() < 1e-15);
        assert!(out.divergence_residual() < 1e-12);
    }

    #[test]
    fn periodic_in_time() {
        let m = model(0.7);
        let h = random_field(3, 1, 1.0);
        let w = [0.3, -0.2, 1.1];
        for k in 0..64 {
            let t = k as f64 / 64.0;
            assert_eq!(m.apply(t, &h, &w).unwrap(), m.apply(t + m.period, &h, &w).unwrap());
        }
    }

    #[test]
    fn lipschitz_bound_is_respected_and_nearly_tight() {
        let m = model(0.4);
        let w = [0.3, -0.2, 1.1];
        let qw = (0..3).map(|j| (m.noise.amplitudes()[j] * w[j]).powi(2)).sum::<f64>().sqrt();
        let mut worst: f64 = 0.0;
        for k in 0..400 {
            let mut a = random_field(3, 2 * k, 1.0);
            a.scale(0.577 / a.norm());
            let mut b = a.clone();
            b.scale(1.0 + 1e-4);
            let d = m.apply(0.0, &a, &w).unwrap().sub(&m.apply(0.0, &b, &w).unwrap()).norm();
            let ratio = d / (a.sub(&b).norm() * qw);
            assert!(ratio <= m.lipschitz_constant());
            worst = worst.max(ratio);
        }
        assert!(worst > 0.99 * m.lipschitz_constant(), "{worst}");
        let documented = (1.0 + 0.4) * 1.5 * (3.0 * 3f64.sqrt() / 16.0 + 1.0);
        assert!(m.lipschitz_constant() <= documented);
    }

    #[test]
    fn average_of_g_is_one() {
        for gamma in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let m = model(gamma);
            let k = 10_000;
            let h = m.period / k as f64;
            let simpson: f64 = (0..=k)
                .map(|i| {
                    let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * m.g(i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((simpson / m.period - m.g_bar()).abs() < 1e-12);
        }
    }

    #[test]
    fn hs_norm_is_uniform_in_state() {
        let m = model(0.5);
        let sup = (0..200).map(|k| m.hs_norm(k as f64 * 0.01, &random_field(3, k, 0.5))).fold(0.0, f64::max);
        assert!(sup <= 1.5 * m.rho0 * m.noise.hs_norm());
    }

    #[test]
    fn rejects_bad_models() {
        assert!(SigmaModel::new(0.0, 0.1, 1.0, Gain::Decaying, NoiseModel::off()).is_err());
        assert!(SigmaModel::new(1.0, 1.5, 1.0, Gain::Decaying, NoiseModel::off()).is_err());
        let s = ModeIndex::new_unchecked(1, 1);
        assert!(NoiseModel::new(vec![s, s], vec![1.0, 1.0]).is_err());
        assert!(NoiseModel::new(vec![s], vec![-1.0]).is_err());
        assert!(small_noise().embed(1).is_err());
    }

    #[test]
    fn power_law_covers_the_band() {
        let n = NoiseModel::power_law(4, 1.0, 1.5).unwrap();
        assert_eq!(n.len(), 80);
        assert_eq!(n.max_mode(), 4);
    }
}

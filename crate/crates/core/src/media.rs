//! Stationary ergodic random potentials built from random-phase cosines,
//! `q(x, ω) = a₀ + Σ_j a_j cos(k_j·x + θ_j)` with i.i.d. uniform phases, and
//! their rescalings `q(x/ε, ω)` for `ε = 1/n`.
//!
//! Shifting the medium by `y` acts on the phases only, `θ_j ↦ θ_j + k_j·y`,
//! which preserves the uniform law; hence the field is statistically
//! homogeneous and `E q(0, ω) = a₀`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{index_stream, Namespace, Stream};
use crate::spectral::{half_lattice, project_mode, SpectralField, Vec2c};
use crate::transform::{fft_friendly, GridTransform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialComponent {
    pub k: [i32; 2],
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub a0: f64,
    #[serde(default)]
    pub components: Vec<PotentialComponent>,
}

impl PotentialSpec {
    pub fn constant(a0: f64) -> Self {
        Self { a0, components: Vec::new() }
    }

    /// `|a₀| + Σ|a_j|`, a uniform bound on `|q|`.
    pub fn bound(&self) -> f64 {
        self.a0.abs() + self.components.iter().map(|c| c.a.abs()).sum::<f64>()
    }

    /// Largest `max(|k1|, |k2|)` over the components (0 if none).
    pub fn max_frequency(&self) -> usize {
        self.components.iter().map(|c| c.k[0].unsigned_abs().max(c.k[1].unsigned_abs()) as usize).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.a0.is_finite() || self.components.iter().any(|c| !c.a.is_finite()) {
            return Err(Error::Config("potential amplitudes must be finite".into()));
        }
        if self.components.iter().any(|c| c.k == [0, 0]) {
            return Err(Error::Config("potential wavevectors must be nonzero (put constants in a0)".into()));
        }
        Ok(())
    }
}

/// One sample `q(·, ω)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialRealization {
    spec: PotentialSpec,
    phases: Vec<f64>,
}

impl PotentialRealization {
    pub fn new(spec: PotentialSpec, phases: Vec<f64>) -> Self {
        assert_eq!(spec.components.len(), phases.len());
        Self { spec, phases }
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// `q(x, ω)` at unit scale.
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        self.spec.a0
            + self
                .spec
                .components
                .iter()
                .zip(&self.phases)
                .map(|(c, th)| c.a * (c.k[0] as f64 * x[0] + c.k[1] as f64 * x[1] + th).cos())
                .sum::<f64>()
    }

    /// The medium seen from `y`: `q(x, T_y ω) = q(x + y, ω)`.
    pub fn shifted(&self, y: [f64; 2]) -> Self {
        let phases = self
            .spec
            .components
            .iter()
            .zip(&self.phases)
            .map(|(c, th)| (th + c.k[0] as f64 * y[0] + c.k[1] as f64 * y[1]).rem_euclid(TAU))
            .collect();
        Self { spec: self.spec.clone(), phases }
    }
}

/// Oscillation scale `ε = 1/n`; integer `n` keeps `q(x/ε)` 2π-periodic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EpsilonScale {
    n: u32,
}

impl EpsilonScale {
    pub fn from_n(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidEpsilon(f64::INFINITY));
        }
        Ok(Self { n })
    }

    /// Accepts `eps` within `1e-9` (relative in `1/eps`) of some `1/n`.
    pub fn from_eps(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidEpsilon(eps));
        }
        let inv = 1.0 / eps;
        let n = inv.round();
        if (inv - n).abs() > 1e-9 * inv {
            return Err(Error::InvalidEpsilon(eps));
        }
        Self::from_n(n as u32)
    }

    pub fn n(self) -> u32 {
        self.n
    }

    pub fn eps(self) -> f64 {
        1.0 / self.n as f64
    }
}

pub fn sample_potential(spec: &PotentialSpec, seed: u64) -> PotentialRealization {
    let mut st = Stream::new(seed, index_stream(Namespace::Medium, 0));
    let phases = spec.components.iter().map(|_| TAU * st.uniform()).collect();
    PotentialRealization { spec: spec.clone(), phases }
}

/// `q(x/ε, ω) = a₀ + Σ a_j cos(n k_j·x + θ_j)`.
pub fn evaluate_q_eps(r: &PotentialRealization, x: [f64; 2], eps: EpsilonScale) -> f64 {
    let n = eps.n as f64;
    r.evaluate([n * x[0], n * x[1]])
}

/// `q̄ = E q(0, ω)`; every random-phase cosine has zero mean.
pub fn effective_q(spec: &PotentialSpec) -> f64 {
    spec.a0
}

/// Minimal grid for which the trapezoid rule integrates `q(x/ε) u·φ` exactly.
pub fn pairing_resolution(spec: &PotentialSpec, eps: EpsilonScale, cutoff: usize) -> usize {
    eps.n as usize * spec.max_frequency() + 2 * cutoff + 1
}

/// `∫_{𝕋²} q(x/ε, ω) (u·φ)(x) dx` by the trapezoid rule on an `m × m` grid.
pub fn oscillation_pairing(
    r: &PotentialRealization,
    eps: EpsilonScale,
    u: &SpectralField,
    phi: &SpectralField,
    m: usize,
) -> Result<f64> {
    if u.cutoff() != phi.cutoff() {
        return Err(Error::CutoffMismatch { left: u.cutoff(), right: phi.cutoff() });
    }
    let need = pairing_resolution(&r.spec, eps, u.cutoff()).max(2 * u.cutoff() + 2);
    if m < need {
        return Err(Error::Resolution { m, need, why: "quadrature must resolve n·max|k| + 2N" });
    }
    let gu = u.to_grid(m)?;
    let gp = phi.to_grid(m)?;
    let h = TAU / m as f64;
    let (u1, u2) = gu.components();
    let (p1, p2) = gp.components();
    let mut acc = 0.0;
    for j1 in 0..m {
        for j2 in 0..m {
            let k = j1 * m + j2;
            let q = evaluate_q_eps(r, [h * j1 as f64, h * j2 as f64], eps);
            acc += q * (u1[k] * p1[k] + u2[k] * p2[k]);
        }
    }
    Ok(acc * h * h)
}

/// [`oscillation_pairing`] on the smallest FFT-friendly exact grid.
pub fn oscillation_pairing_auto(
    r: &PotentialRealization,
    eps: EpsilonScale,
    u: &SpectralField,
    phi: &SpectralField,
) -> Result<f64> {
    let m = fft_friendly(pairing_resolution(&r.spec, eps, u.cutoff()).max(2 * u.cutoff() + 2));
    oscillation_pairing(r, eps, u, phi, m)
}

/// `Π(q(x/ε, ω) u)` truncated to the cutoff, as an exact modal convolution.
///
/// Each cosine shifts the spectrum of `u` by `±n k_j`:
/// `(q u)_s = a₀ u_s + Σ_j (a_j/2)(e^{iθ_j} u_{s−nk_j} + e^{−iθ_j} u_{s+nk_j})`.
#[derive(Clone, Debug)]
pub struct PotentialOperator {
    a0: f64,
    shifts: Vec<([i32; 2], Complex64)>,
}

impl PotentialOperator {
    pub fn new(r: &PotentialRealization, eps: EpsilonScale) -> Self {
        let n = eps.n as i32;
        let shifts = r
            .spec
            .components
            .iter()
            .zip(&r.phases)
            .map(|(c, th)| ([n * c.k[0], n * c.k[1]], Complex64::from_polar(0.5 * c.a, *th)))
            .collect();
        Self { a0: r.spec.a0, shifts }
    }

    /// Multiplication by a constant.
    pub fn constant(a0: f64) -> Self {
        Self { a0, shifts: Vec::new() }
    }

    pub fn apply_into(&self, u: &SpectralField, out: &mut Vec<Vec2c>) {
        out.clear();
        for (s, c) in u.modes() {
            let mut acc = [c[0] * self.a0, c[1] * self.a0];
            for &([d1, d2], w) in &self.shifts {
                let lo = u.get(s.s1 - d1, s.s2 - d2);
                let hi = u.get(s.s1 + d1, s.s2 + d2);
                let wc = w.conj();
                acc[0] += w * lo[0] + wc * hi[0];
                acc[1] += w * lo[1] + wc * hi[1];
            }
            out.push(if self.shifts.is_empty() { acc } else { project_mode(s, acc) });
        }
    }

    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let mut out = Vec::with_capacity(u.coeffs().len());
        self.apply_into(u, &mut out);
        SpectralField::from_coeffs(u.cutoff(), out)
    }
}

/// `Π(q(x/ε, ω) u)` formed pointwise on an `m × m` grid and truncated;
/// exact (alias-free) when `m ≥ n·max|k| + 2N + 1`.
pub fn potential_product_grid(
    r: &PotentialRealization,
    eps: EpsilonScale,
    u: &SpectralField,
    m: usize,
) -> Result<SpectralField> {
    let need = pairing_resolution(&r.spec, eps, u.cutoff()).max(2 * u.cutoff() + 2);
    if m < need {
        return Err(Error::Resolution { m, need, why: "product grid must resolve n·max|k| + 2N" });
    }
    let mut t = GridTransform::new(u.cutoff(), m)?;
    let mut z = vec![Complex64::new(0.0, 0.0); m * m];
    t.synthesize(u.coeffs(), |_| Complex64::new(1.0, 0.0), &mut z);
    let h = TAU / m as f64;
    for j1 in 0..m {
        for j2 in 0..m {
            z[j1 * m + j2] *= evaluate_q_eps(r, [h * j1 as f64, h * j2 as f64], eps);
        }
    }
    let raw = t.analyze(&mut z);
    let coeffs = half_lattice(u.cutoff()).zip(raw).map(|(s, c)| project_mode(s, c)).collect();
    Ok(SpectralField::from_coeffs(u.cutoff(), coeffs))
}

/// Cell average `(2π)⁻² ∫ q(x/ε) dx` by the trapezoid rule on an exact grid.
pub fn cell_average(r: &PotentialRealization, eps: EpsilonScale) -> f64 {
    let m = eps.n as usize * r.spec.max_frequency() + 1;
    let h = TAU / m as f64;
    let mut acc = 0.0;
    for j1 in 0..m {
        for j2 in 0..m {
            acc += evaluate_q_eps(r, [h * j1 as f64, h * j2 as f64], eps);
        }
    }
    acc / (m * m) as f64
}

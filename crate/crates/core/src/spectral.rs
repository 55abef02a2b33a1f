//! Divergence-free, mean-zero vector fields on the torus `[0, 2π)²`.
//!
//! A field is stored as Fourier coefficients `û_s ∈ ℂ²` with the convention
//!
//! ```text
//! u(x) = (1/2π) Σ_{s ∈ ℤ²\{0}, |s|∞ ≤ N} û_s e^{i s·x},      û_{-s} = conj(û_s),
//! ```
//!
//! so that `∫|u|² dx = Σ |û_s|²` exactly. Only the half lattice
//! (`s1 > 0`, or `s1 = 0` and `s2 > 0`) is stored; the other half is implied by
//! conjugation. With this scaling the sine/cosine basis `e_s` has unit norm
//! both as a grid function and under the mode-sum inner product.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mode_stream, Namespace, Stream};
use crate::transform::GridTransform;

/// Complex 2-vector: one Fourier coefficient of a planar velocity field.
pub type Vec2c = [Complex64; 2];

pub(crate) const ZERO2: Vec2c = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];

/// A nonzero wavevector `s ∈ ℤ²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub s1: i32,
    pub s2: i32,
}

impl ModeIndex {
    pub fn new(s1: i32, s2: i32) -> Result<Self> {
        if s1 == 0 && s2 == 0 {
            return Err(Error::ZeroMode);
        }
        Ok(Self { s1, s2 })
    }

    /// Caller guarantees `(s1, s2) != (0, 0)`.
    pub const fn new_unchecked(s1: i32, s2: i32) -> Self {
        Self { s1, s2 }
    }

    /// Exactly one of `s`, `-s` is on the half lattice.
    pub fn is_half_lattice(self) -> bool {
        self.s1 > 0 || (self.s1 == 0 && self.s2 > 0)
    }

    pub fn neg(self) -> Self {
        Self { s1: -self.s1, s2: -self.s2 }
    }

    /// Half-lattice representative of `{s, -s}`.
    pub fn canonical(self) -> Self {
        if self.is_half_lattice() {
            self
        } else {
            self.neg()
        }
    }

    pub fn norm_sq(self) -> f64 {
        let (a, b) = (self.s1 as f64, self.s2 as f64);
        a * a + b * b
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn linf(self) -> usize {
        self.s1.unsigned_abs().max(self.s2.unsigned_abs()) as usize
    }

    /// `s⊥ = (-s2, s1)`.
    pub fn perp(self) -> [f64; 2] {
        [-(self.s2 as f64), self.s1 as f64]
    }

    pub fn as_f64(self) -> [f64; 2] {
        [self.s1 as f64, self.s2 as f64]
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.s1, self.s2)
    }
}

/// Number of stored (half-lattice) modes for cutoff `n`.
pub fn half_lattice_len(cutoff: usize) -> usize {
    2 * cutoff * (cutoff + 1)
}

/// Storage slot of a half-lattice mode inside the band.
pub fn slot_of(cutoff: usize, s: ModeIndex) -> Option<usize> {
    if !s.is_half_lattice() || s.linf() > cutoff {
        return None;
    }
    let n = cutoff as i32;
    if s.s1 == 0 {
        Some((s.s2 - 1) as usize)
    } else {
        Some(cutoff + (s.s1 as usize - 1) * (2 * cutoff + 1) + (s.s2 + n) as usize)
    }
}

/// Half-lattice modes in storage order.
pub fn half_lattice(cutoff: usize) -> impl Iterator<Item = ModeIndex> + Clone {
    let n = cutoff as i32;
    let axis = (1..=n).map(|s2| ModeIndex::new_unchecked(0, s2));
    let rest = (1..=n).flat_map(move |s1| (-n..=n).map(move |s2| ModeIndex::new_unchecked(s1, s2)));
    axis.chain(rest)
}

/// `|s|²` for every stored slot.
pub fn slot_norms_sq(cutoff: usize) -> Vec<f64> {
    half_lattice(cutoff).map(ModeIndex::norm_sq).collect()
}

/// Orthogonal projection of one coefficient onto `s⊥`, i.e. `(I - s sᵀ/|s|²) v`.
#[inline]
pub(crate) fn project_mode(s: ModeIndex, v: Vec2c) -> Vec2c {
    let [p1, p2] = s.perp();
    let c = (v[0] * p1 + v[1] * p2) / s.norm_sq();
    [c * p1, c * p2]
}

/// Single projection pass iterated to a floating-point fixed point, so that a
/// second application returns bit-identical output.
fn project_mode_exact(s: ModeIndex, v: Vec2c) -> Vec2c {
    let mut w = project_mode(s, v);
    for _ in 0..16 {
        let next = project_mode(s, w);
        if next == w {
            break;
        }
        w = next;
    }
    w
}

/// Fourier coefficients of `e_s` at the half-lattice slot of `s`.
///
/// For `s ∈ ℤ²₊`, `e_s = c_s s⊥ sin(s·x)` gives `û_s = -i s⊥ /(√2 |s|)`.
/// For `s = -p ∈ -ℤ²₊`, `e_s = -c_p p⊥ cos(p·x)` gives `û_p = -p⊥ /(√2 |p|)`.
pub fn basis_coefficient(s: ModeIndex) -> (ModeIndex, Vec2c) {
    let p = s.canonical();
    let [a, b] = p.perp();
    let k = 1.0 / (std::f64::consts::SQRT_2 * p.norm());
    if s.is_half_lattice() {
        (p, [Complex64::new(0.0, -a * k), Complex64::new(0.0, -b * k)])
    } else {
        (p, [Complex64::new(-a * k, 0.0), Complex64::new(-b * k, 0.0)])
    }
}

/// Divergence-free mean-zero field truncated at `|s|∞ ≤ cutoff`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    cutoff: usize,
    coeffs: Vec<Vec2c>,
}

impl SpectralField {
    pub fn zeros(cutoff: usize) -> Self {
        Self { cutoff, coeffs: vec![ZERO2; half_lattice_len(cutoff)] }
    }

    /// Wraps coefficients that are already divergence-free.
    pub(crate) fn from_coeffs(cutoff: usize, coeffs: Vec<Vec2c>) -> Self {
        debug_assert_eq!(coeffs.len(), half_lattice_len(cutoff));
        Self { cutoff, coeffs }
    }

    /// The basis vector `e_s`.
    pub fn basis(cutoff: usize, s: ModeIndex) -> Result<Self> {
        let (p, c) = basis_coefficient(s);
        let slot = slot_of(cutoff, p).ok_or(Error::OutsideBand { s1: s.s1, s2: s.s2, cutoff })?;
        let mut u = Self::zeros(cutoff);
        u.coeffs[slot] = c;
        Ok(u)
    }

    /// `Σ a_s e_s` over the given real coordinates.
    pub fn from_basis_coords(cutoff: usize, coords: &[(ModeIndex, f64)]) -> Result<Self> {
        let mut u = Self::zeros(cutoff);
        for &(s, a) in coords {
            u.add_scaled(a, &Self::basis(cutoff, s)?);
        }
        Ok(u)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeffs(&self) -> &[Vec2c] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Vec2c] {
        &mut self.coeffs
    }

    pub fn modes(&self) -> impl Iterator<Item = (ModeIndex, &Vec2c)> {
        half_lattice(self.cutoff).zip(self.coeffs.iter())
    }

    /// Coefficient at any lattice point; conjugated for the implied half,
    /// zero outside the band or at `s = 0`.
    pub fn get(&self, s1: i32, s2: i32) -> Vec2c {
        if s1 == 0 && s2 == 0 {
            return ZERO2;
        }
        let s = ModeIndex::new_unchecked(s1, s2);
        match slot_of(self.cutoff, s.canonical()) {
            None => ZERO2,
            Some(k) if s.is_half_lattice() => self.coeffs[k],
            Some(k) => [self.coeffs[k][0].conj(), self.coeffs[k][1].conj()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    pub fn scale(&mut self, a: f64) {
        for c in &mut self.coeffs {
            c[0] *= a;
            c[1] *= a;
        }
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &Self) {
        assert_eq!(self.cutoff, other.cutoff, "cutoff mismatch");
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            c[0] += o[0] * a;
            c[1] += o[1] * a;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut d = self.clone();
        d.add_scaled(-1.0, other);
        d
    }

    /// Largest per-mode `|s·u_s| / |u_s|` (zero modes skipped).
    pub fn divergence_residual(&self) -> f64 {
        self.modes()
            .filter_map(|(s, c)| {
                let norm = (c[0].norm_sqr() + c[1].norm_sqr()).sqrt();
                (norm > 0.0).then(|| (c[0] * s.s1 as f64 + c[1] * s.s2 as f64).norm() / norm)
            })
            .fold(0.0, f64::max)
    }

    /// `‖u‖_r = (Σ_{full lattice} |u_s|² |s|^{2r})^{1/2}`.
    pub fn sobolev_norm(&self, r: f64) -> f64 {
        sobolev_norm(self, r)
    }

    pub fn norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    /// Squared norms `(‖u‖², ‖u‖₁², ‖u‖₂²)` in a single pass.
    pub fn norms_sq(&self) -> [f64; 3] {
        let mut acc = [0.0; 3];
        for (s, c) in self.modes() {
            let a = c[0].norm_sqr() + c[1].norm_sqr();
            let k2 = s.norm_sq();
            acc[0] += a;
            acc[1] += a * k2;
            acc[2] += a * k2 * k2;
        }
        acc.map(|x| 2.0 * x)
    }

    /// Real coordinate `⟨u, e_s⟩`.
    pub fn basis_coord(&self, s: ModeIndex) -> f64 {
        let (p, e) = basis_coefficient(s);
        match slot_of(self.cutoff, p) {
            Some(k) => {
                let c = self.coeffs[k];
                2.0 * (c[0] * e[0].conj() + c[1] * e[1].conj()).re
            }
            None => 0.0,
        }
    }

    /// Complex mode observable `⟨u, e_s⟩ + i ⟨u, e_{-s}⟩`.
    pub fn mode_observable(&self, s: ModeIndex) -> Complex64 {
        Complex64::new(self.basis_coord(s), self.basis_coord(s.neg()))
    }

    /// Applies the Leray projector again (exactly idempotent).
    pub fn leray_projected(&self) -> Self {
        let coeffs = self.modes().map(|(s, c)| project_mode_exact(s, *c)).collect();
        Self { cutoff: self.cutoff, coeffs }
    }

    /// Grid samples on an `m × m` grid; `m ≥ 2N + 2`.
    pub fn to_grid(&self, m: usize) -> Result<GridField> {
        transform(self, m)
    }

    pub fn to_json(&self) -> SpectralJson {
        SpectralJson {
            cutoff: self.cutoff,
            modes: self
                .modes()
                .filter(|(_, c)| **c != ZERO2)
                .map(|(s, c)| JsonMode { s: [s.s1, s.s2], re: [c[0].re, c[1].re], im: [c[0].im, c[1].im] })
                .collect(),
        }
    }

    pub fn from_json(j: &SpectralJson) -> Result<Self> {
        let raw = j.modes.iter().map(|m| {
            let s = ModeIndex::new(m.s[0], m.s[1])?;
            Ok((s, [Complex64::new(m.re[0], m.im[0]), Complex64::new(m.re[1], m.im[1])]))
        });
        leray_project(j.cutoff, raw.collect::<Result<Vec<_>>>()?)
    }
}

/// Serialized form: half-lattice modes only, zero modes omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralJson {
    pub cutoff: usize,
    pub modes: Vec<JsonMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JsonMode {
    pub s: [i32; 2],
    pub re: [f64; 2],
    pub im: [f64; 2],
}

/// Projects raw coefficients onto divergence-free fields.
///
/// Entries in the negative half lattice are conjugated onto their half-lattice
/// partner; `s = 0` is discarded.
pub fn leray_project<I>(cutoff: usize, raw: I) -> Result<SpectralField>
where
    I: IntoIterator<Item = (ModeIndex, Vec2c)>,
{
    let mut u = SpectralField::zeros(cutoff);
    for (s, v) in raw {
        if s.s1 == 0 && s.s2 == 0 {
            continue;
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("leray_project input"));
        }
        let slot = slot_of(cutoff, s.canonical()).ok_or(Error::OutsideBand { s1: s.s1, s2: s.s2, cutoff })?;
        let p = s.canonical();
        let v = if s.is_half_lattice() { v } else { [v[0].conj(), v[1].conj()] };
        u.coeffs[slot] = project_mode_exact(p, v);
    }
    Ok(u)
}

/// `A u`: multiplies each mode by `|s|²`.
pub fn stokes_apply(u: &SpectralField) -> SpectralField {
    let coeffs = u
        .modes()
        .map(|(s, c)| {
            let k = s.norm_sq();
            [c[0] * k, c[1] * k]
        })
        .collect();
    SpectralField { cutoff: u.cutoff, coeffs }
}

fn weight(s: ModeIndex, r: f64) -> f64 {
    let k2 = s.norm_sq();
    if r == 0.0 {
        1.0
    } else if r.fract() == 0.0 {
        k2.powi(r as i32)
    } else {
        k2.powf(r)
    }
}

pub fn sobolev_norm(u: &SpectralField, r: f64) -> f64 {
    let sum: f64 = u.modes().map(|(s, c)| (c[0].norm_sqr() + c[1].norm_sqr()) * weight(s, r)).sum();
    (2.0 * sum).sqrt()
}

/// `⟨u, v⟩ = Σ_{full lattice} Re(u_s · conj(v_s))`.
pub fn inner_product(u: &SpectralField, v: &SpectralField) -> Result<f64> {
    if u.cutoff != v.cutoff {
        return Err(Error::CutoffMismatch { left: u.cutoff, right: v.cutoff });
    }
    let sum: f64 = u
        .coeffs
        .iter()
        .zip(&v.coeffs)
        .map(|(a, b)| (a[0] * b[0].conj() + a[1] * b[1].conj()).re)
        .sum();
    Ok(2.0 * sum)
}

/// Real velocity samples on the uniform `m × m` grid, row-major in `(j1, j2)`
/// at `x = (2π j1/m, 2π j2/m)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    m: usize,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

impl GridField {
    pub fn new(m: usize, u1: Vec<f64>, u2: Vec<f64>) -> Self {
        assert_eq!(u1.len(), m * m);
        assert_eq!(u2.len(), m * m);
        Self { m, u1, u2 }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(m: usize, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let h = 2.0 * PI / m as f64;
        let mut u1 = Vec::with_capacity(m * m);
        let mut u2 = Vec::with_capacity(m * m);
        for j1 in 0..m {
            for j2 in 0..m {
                let [a, b] = f([h * j1 as f64, h * j2 as f64]);
                u1.push(a);
                u2.push(b);
            }
        }
        Self { m, u1, u2 }
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn at(&self, j1: usize, j2: usize) -> [f64; 2] {
        let k = j1 * self.m + j2;
        [self.u1[k], self.u2[k]]
    }

    pub fn components(&self) -> (&[f64], &[f64]) {
        (&self.u1, &self.u2)
    }

    fn cell(&self) -> f64 {
        let h = 2.0 * PI / self.m as f64;
        h * h
    }

    /// Trapezoid-rule `(∫|u|² dx)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.u1.iter().zip(&self.u2).map(|(a, b)| a * a + b * b).sum();
        (s * self.cell()).sqrt()
    }

    /// Trapezoid-rule `(∫|u|⁴ dx)^{1/4}`; exact for band-limited data when
    /// `m ≥ 4N + 1`.
    pub fn l4_norm(&self) -> f64 {
        let s: f64 = self
            .u1
            .iter()
            .zip(&self.u2)
            .map(|(a, b)| {
                let q = a * a + b * b;
                q * q
            })
            .sum();
        (s * self.cell()).powf(0.25)
    }

    /// Trapezoid-rule `∫ u·v dx`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.m, other.m);
        let s: f64 = (0..self.u1.len()).map(|k| self.u1[k] * other.u1[k] + self.u2[k] * other.u2[k]).sum();
        s * self.cell()
    }
}

/// Grid samples of `e_s` on an `m × m` grid, by direct evaluation.
pub fn synthesize_basis(s: ModeIndex, m: usize) -> GridField {
    let c = 1.0 / (std::f64::consts::SQRT_2 * PI * s.norm());
    let [p1, p2] = s.perp();
    let half = s.is_half_lattice();
    GridField::from_fn(m, |x| {
        let phase = s.s1 as f64 * x[0] + s.s2 as f64 * x[1];
        let a = c * if half { phase.sin() } else { phase.cos() };
        [a * p1, a * p2]
    })
}

/// Spectral synthesis on an `m × m` grid.
pub fn transform(u: &SpectralField, m: usize) -> Result<GridField> {
    let mut t = GridTransform::new(u.cutoff, m)?;
    let mut z = vec![Complex64::new(0.0, 0.0); m * m];
    t.synthesize(u.coeffs(), |_| Complex64::new(1.0, 0.0), &mut z);
    Ok(GridField { m, u1: z.iter().map(|c| c.re).collect(), u2: z.iter().map(|c| c.im).collect() })
}

/// Spectral analysis back to cutoff `n`, followed by the Leray projection.
/// The grid mean is discarded.
pub fn inverse(g: &GridField, cutoff: usize) -> Result<SpectralField> {
    let coeffs = inverse_raw(g, cutoff)?;
    Ok(SpectralField {
        cutoff,
        coeffs: half_lattice(cutoff).zip(coeffs).map(|(s, c)| project_mode_exact(s, c)).collect(),
    })
}

/// Spectral analysis without projection (half-lattice raw coefficients).
pub fn inverse_raw(g: &GridField, cutoff: usize) -> Result<Vec<Vec2c>> {
    let m = g.m;
    if g.u1.iter().chain(&g.u2).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("grid field"));
    }
    let mut t = GridTransform::new(cutoff, m)?;
    let mut z: Vec<Complex64> = g.u1.iter().zip(&g.u2).map(|(&a, &b)| Complex64::new(a, b)).collect();
    Ok(t.analyze(&mut z))
}

/// Band-limited random field with mode amplitudes `~ |s|^{-decay}`.
///
/// Each mode draws from its own counter stream, so the field at a larger
/// cutoff extends the one at a smaller cutoff with the same `seed`.
pub fn random_field(cutoff: usize, seed: u64, decay: f64) -> SpectralField {
    let coeffs = half_lattice(cutoff)
        .map(|s| {
            let mut st = Stream::new(seed, mode_stream(Namespace::TestField, s));
            let amp = s.norm_sq().powf(-decay / 2.0);
            let a = Complex64::new(st.normal(), st.normal()) * amp;
            let [p1, p2] = s.perp();
            let r = 1.0 / s.norm();
            [a * (p1 * r), a * (p2 * r)]
        })
        .collect();
    SpectralField { cutoff, coeffs }
}

/// Vorticity `∂₁u₂ − ∂₂u₁` on an `m × m` grid.
pub fn vorticity_grid(u: &SpectralField, m: usize) -> Result<Vec<f64>> {
    let mut t = GridTransform::new(u.cutoff, m)?;
    // Pack the scalar vorticity into the first component.
    let coeffs: Vec<Vec2c> = u
        .modes()
        .map(|(s, c)| {
            let w = (c[1] * s.s1 as f64 - c[0] * s.s2 as f64) * Complex64::new(0.0, 1.0);
            [w, Complex64::new(0.0, 0.0)]
        })
        .collect();
    let mut z = vec![Complex64::new(0.0, 0.0); m * m];
    t.synthesize(&coeffs, |_| Complex64::new(1.0, 0.0), &mut z);
    Ok(z.iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn half_lattice_slots_are_dense() {
        for n in 1..6 {
            let modes: Vec<_> = half_lattice(n).collect();
            assert_eq!(modes.len(), half_lattice_len(n));
            for (k, s) in modes.iter().enumerate() {
                assert!(s.is_half_lattice());
                assert_eq!(slot_of(n, *s), Some(k));
                assert_eq!(slot_of(n, s.neg()), None);
            }
        }
    }

    #[test]
    fn exactly_one_of_pair_is_half_lattice() {
        for a in -4..=4 {
            for b in -4..=4 {
                if (a, b) == (0, 0) {
                    continue;
                }
                let s = ModeIndex::new_unchecked(a, b);
                assert!(s.is_half_lattice() ^ s.neg().is_half_lattice());
            }
        }
        assert!(ModeIndex::new(0, 0).is_err());
    }

    #[test]
    fn leray_kills_gradients() {
        let s = ModeIndex::new_unchecked(2, -3);
        let u = leray_project(4, [(s, [c(2.0, 0.0), c(-3.0, 0.0)])]).unwrap();
        let k = slot_of(4, s).unwrap();
        assert_eq!(u.coeffs()[k], ZERO2);
        // Pure gradient direction s with complex amplitude.
        let u = leray_project(4, [(s, [c(0.0, 2.0), c(0.0, -3.0)])]).unwrap();
        assert!(u.norm() == 0.0);
    }

    #[test]
    fn leray_worked_example() {
        // (I - ssᵀ/|s|²)(1,0) with s = (1,1) is (1/2, -1/2).
        let s = ModeIndex::new_unchecked(1, 1);
        let u = leray_project(2, [(s, [c(1.0, 0.0), c(0.0, 0.0)])]).unwrap();
        let v = u.get(1, 1);
        assert_eq!(v, [c(0.5, 0.0), c(-0.5, 0.0)]);
        // The implied partner carries the conjugate.
        assert_eq!(u.get(-1, -1), [c(0.5, 0.0), c(-0.5, 0.0)]);
    }

    #[test]
    fn leray_rejects_non_finite() {
        let s = ModeIndex::new_unchecked(1, 0);
        assert!(matches!(
            leray_project(2, [(s, [c(f64::NAN, 0.0), c(0.0, 0.0)])]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn leray_folds_negative_half_and_drops_mean() {
        let s = ModeIndex::new_unchecked(-1, -2);
        let zero = ModeIndex::new_unchecked(0, 0);
        let v = [c(2.0, 1.0), c(-1.0, 3.0)];
        let u = leray_project(3, [(zero, v), (s, v)]).unwrap();
        let w = u.get(-1, -2);
        let expect = project_mode(s, v);
        for i in 0..2 {
            assert_relative_eq!(w[i].re, expect[i].re, epsilon = 1e-15);
            assert_relative_eq!(w[i].im, expect[i].im, epsilon = 1e-15);
        }
    }

    #[test]
    fn divergence_free_input_unchanged() {
        let u = random_field(6, 3, 1.0);
        let p = u.leray_projected();
        for (a, b) in u.coeffs().iter().zip(p.coeffs()) {
            for i in 0..2 {
                assert!((a[i] - b[i]).norm() <= 1e-15 * (1.0 + a[i].norm()));
            }
        }
    }

    #[test]
    fn stokes_eigenvalues() {
        let e = SpectralField::basis(3, ModeIndex::new_unchecked(1, 0)).unwrap();
        assert_eq!(stokes_apply(&e), e);
        let e = SpectralField::basis(3, ModeIndex::new_unchecked(1, 2)).unwrap();
        let mut five = e.clone();
        five.scale(5.0);
        assert_eq!(stokes_apply(&e), five);
        let z = SpectralField::zeros(3);
        assert_eq!(stokes_apply(&z), z);
    }

    #[test]
    fn sobolev_norm_worked_example() {
        // |u_s|² = 1 at s = (1,2) plus its conjugate, r = 1 → sqrt(2·5).
        let s = ModeIndex::new_unchecked(1, 2);
        let [p1, p2] = s.perp();
        let k = 1.0 / s.norm();
        let u = leray_project(2, [(s, [c(p1 * k, 0.0), c(p2 * k, 0.0)])]).unwrap();
        assert_relative_eq!(u.sobolev_norm(1.0), 10f64.sqrt(), max_relative = 1e-15);
        assert_eq!(SpectralField::zeros(4).sobolev_norm(-1.0), 0.0);
        assert_eq!(SpectralField::zeros(4).sobolev_norm(2.5), 0.0);
    }

    #[test]
    fn basis_has_unit_norm_and_correct_branches() {
        for s in [(1, 0), (-1, 0), (2, -1), (0, -3)] {
            let s = ModeIndex::new_unchecked(s.0, s.1);
            let e = SpectralField::basis(4, s).unwrap();
            assert_relative_eq!(e.norm(), 1.0, max_relative = 1e-15);
            assert_relative_eq!(e.basis_coord(s), 1.0, max_relative = 1e-15);
            assert!(e.basis_coord(s.neg()).abs() < 1e-16);
        }
        // e_(1,0) = (1/(√2 π)) (0, 1) sin(x1)
        let g = synthesize_basis(ModeIndex::new_unchecked(1, 0), 16);
        let k = 1.0 / (std::f64::consts::SQRT_2 * PI);
        for j1 in 0..16 {
            let x1 = 2.0 * PI * j1 as f64 / 16.0;
            let [a, b] = g.at(j1, 5);
            assert!(a.abs() < 1e-15);
            assert_relative_eq!(b, k * x1.sin(), epsilon = 1e-15);
        }
        // e_(-1,0) uses the cosine branch: c s⊥ cos(s·x) with s⊥ = (0, -1).
        let g = synthesize_basis(ModeIndex::new_unchecked(-1, 0), 16);
        for j1 in 0..16 {
            let x1 = 2.0 * PI * j1 as f64 / 16.0;
            assert_relative_eq!(g.at(j1, 3)[1], -k * x1.cos(), epsilon = 1e-15);
        }
    }

    #[test]
    fn inner_product_identities() {
        let u = random_field(5, 1, 0.5);
        let v = random_field(5, 2, 0.5);
        let w = random_field(5, 3, 0.5);
        let uu = inner_product(&u, &u).unwrap();
        assert_relative_eq!(uu, u.norm().powi(2), max_relative = 1e-12);
        let mut vw = v.clone();
        vw.add_scaled(1.0, &w);
        let lhs = inner_product(&u, &vw).unwrap();
        let rhs = inner_product(&u, &v).unwrap() + inner_product(&u, &w).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * (u.norm() * (v.norm() + w.norm())));
        assert_eq!(inner_product(&u, &v).unwrap(), inner_product(&v, &u).unwrap());
        let a = SpectralField::basis(5, ModeIndex::new_unchecked(1, 0)).unwrap();
        let b = SpectralField::basis(5, ModeIndex::new_unchecked(-1, 0)).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), 0.0);
        assert!(matches!(inner_product(&a, &SpectralField::zeros(4)), Err(Error::CutoffMismatch { .. })));
    }

    #[test]
    fn transform_round_trip() {
        let u = random_field(8, 9, 0.0);
        let g = transform(&u, 24).unwrap();
        let back = inverse(&g, 8).unwrap();
        let err = back.sub(&u).norm() / u.norm();
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn transform_matches_direct_basis_samples() {
        for s in [(1, 0), (-1, 0), (2, 3), (-3, 1)] {
            let s = ModeIndex::new_unchecked(s.0, s.1);
            let g = transform(&SpectralField::basis(4, s).unwrap(), 12).unwrap();
            let d = synthesize_basis(s, 12);
            for j1 in 0..12 {
                for j2 in 0..12 {
                    let (a, b) = (g.at(j1, j2), d.at(j1, j2));
                    assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_grid_has_no_modes() {
        let g = GridField::from_fn(10, |_| [3.0, -1.5]);
        let u = inverse(&g, 4).unwrap();
        assert!(u.norm() < 1e-14);
    }

    #[test]
    fn transform_rejects_coarse_grid() {
        let u = random_field(8, 1, 0.0);
        assert!(matches!(transform(&u, 17), Err(Error::Resolution { .. })));
        let g = GridField::from_fn(17, |_| [0.0, 0.0]);
        assert!(matches!(inverse(&g, 8), Err(Error::Resolution { .. })));
    }

    #[test]
    fn parseval_by_quadrature() {
        let u = random_field(8, 4, 1.0);
        let g = transform(&u, 18).unwrap();
        let (a, b) = (u.norm().powi(2), g.l2_norm().powi(2));
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn json_round_trip() {
        let u = random_field(3, 2, 1.0);
        let text = serde_json::to_string(&u.to_json()).unwrap();
        let back: SpectralJson = serde_json::from_str(&text).unwrap();
        let v = SpectralField::from_json(&back).unwrap();
        assert!(v.sub(&u).norm() <= 1e-15 * u.norm());
        assert!(text.starts_with("{\"cutoff\":3,\"modes\":[{\"s\":[0,1]"));
    }

    #[test]
    fn vorticity_of_single_mode() {
        // e_(1,0) = k (0,1) sin x1 → ω = k cos x1.
        let e = SpectralField::basis(2, ModeIndex::new_unchecked(1, 0)).unwrap();
        let w = vorticity_grid(&e, 8).unwrap();
        let k = 1.0 / (std::f64::consts::SQRT_2 * PI);
        for j1 in 0..8 {
            let x1 = 2.0 * PI * j1 as f64 / 8.0;
            assert_relative_eq!(w[j1 * 8 + 3], k * x1.cos(), epsilon = 1e-14);
        }
    }
}

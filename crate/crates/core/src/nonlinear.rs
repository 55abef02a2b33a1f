//! Projected advection `B(u, v) = Π((u·∇)v)`, evaluated pseudospectrally on a
//! padded grid and truncated back to the cutoff.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::write_csv_atomic;
use crate::spectral::{half_lattice, inner_product, project_mode, stokes_apply, SpectralField, Vec2c};
use crate::transform::{fft_friendly, GridTransform};

/// Padded grid size used for quadratic products.
///
/// A product of two band-`N` factors carries modes up to `2N`; folding by `M`
/// leaves `|k| ≤ N` untouched iff `M ≥ 3N + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DealiasRule;

impl DealiasRule {
    pub fn minimum(cutoff: usize) -> usize {
        3 * cutoff + 1
    }

    pub fn resolution(cutoff: usize) -> usize {
        fft_friendly(Self::minimum(cutoff))
    }
}

/// Reusable FFT plans and buffers for repeated `B` evaluations.
pub struct NonlinearWorkspace {
    transform: GridTransform,
    zu: Vec<Complex64>,
    zd1: Vec<Complex64>,
    zd2: Vec<Complex64>,
}

impl NonlinearWorkspace {
    /// Dealiased workspace for `cutoff`.
    pub fn new(cutoff: usize) -> Self {
        Self::with_resolution(cutoff, DealiasRule::resolution(cutoff))
    }

    /// Workspace on an arbitrary grid. Grids below `3N + 1` alias.
    pub fn with_resolution(cutoff: usize, m: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            transform: GridTransform::with_resolution(cutoff, m),
            zu: vec![zero; m * m],
            zd1: vec![zero; m * m],
            zd2: vec![zero; m * m],
        }
    }

    pub fn cutoff(&self) -> usize {
        self.transform.cutoff()
    }

    pub fn resolution(&self) -> usize {
        self.transform.resolution()
    }

    /// Projected coefficients of `(u·∇)v`, written into `out`.
    pub fn bilinear_into(&mut self, u: &[Vec2c], v: &[Vec2c], out: &mut Vec<Vec2c>) -> Result<()> {
        let one = |_| Complex64::new(1.0, 0.0);
        self.transform.synthesize(u, one, &mut self.zu);
        self.transform.synthesize(v, |s| Complex64::new(0.0, s.s1 as f64), &mut self.zd1);
        self.transform.synthesize(v, |s| Complex64::new(0.0, s.s2 as f64), &mut self.zd2);
        for ((a, d1), d2) in self.zu.iter_mut().zip(&self.zd1).zip(&self.zd2) {
            let (u1, u2) = (a.re, a.im);
            *a = Complex64::new(u1 * d1.re + u2 * d2.re, u1 * d1.im + u2 * d2.im);
        }
        let raw = self.transform.analyze(&mut self.zu);
        out.clear();
        for (s, c) in half_lattice(self.cutoff()).zip(raw) {
            if !(c[0].re.is_finite() && c[0].im.is_finite() && c[1].re.is_finite() && c[1].im.is_finite()) {
                return Err(Error::NonFinite("advection product"));
            }
            out.push(project_mode(s, c));
        }
        Ok(())
    }

    pub fn bilinear(&mut self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        check_cutoff(u, v)?;
        if u.cutoff() != self.cutoff() {
            return Err(Error::CutoffMismatch { left: u.cutoff(), right: self.cutoff() });
        }
        let mut out = Vec::new();
        self.bilinear_into(u.coeffs(), v.coeffs(), &mut out)?;
        Ok(SpectralField::from_coeffs(u.cutoff(), out))
    }
}

fn check_cutoff(u: &SpectralField, v: &SpectralField) -> Result<()> {
    if u.cutoff() != v.cutoff() {
        return Err(Error::CutoffMismatch { left: u.cutoff(), right: v.cutoff() });
    }
    Ok(())
}

/// `B(u, v)`, dealiased.
pub fn bilinear_b(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    NonlinearWorkspace::new(u.cutoff()).bilinear(u, v)
}

/// Normalized residuals of the trilinear identities
/// `⟨B(u,v),v⟩ = 0`, `⟨B(u,v),w⟩ = −⟨B(u,w),v⟩` and `⟨B(u,u),Δu⟩ = 0`.
///
/// Each residual is divided by the product of the `V¹` norms of its three
/// factors (the natural scale of `|⟨B(a,b),c⟩|` in two dimensions).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct IdentityReport {
    pub residual_i: f64,
    pub residual_skew: f64,
    pub residual_ii: f64,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.residual_i.max(self.residual_skew).max(self.residual_ii)
    }
}

fn normalized(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x.abs() / scale
    } else {
        x.abs()
    }
}

pub fn identity_report(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<IdentityReport> {
    identity_report_with(&mut NonlinearWorkspace::new(u.cutoff()), u, v, w)
}

pub fn identity_report_with(
    ws: &mut NonlinearWorkspace,
    u: &SpectralField,
    v: &SpectralField,
    w: &SpectralField,
) -> Result<IdentityReport> {
    check_cutoff(u, v)?;
    check_cutoff(u, w)?;
    let (nu, nv, nw) = (u.sobolev_norm(1.0), v.sobolev_norm(1.0), w.sobolev_norm(1.0));
    let buv = ws.bilinear(u, v)?;
    let buw = ws.bilinear(u, w)?;
    let buu = ws.bilinear(u, u)?;
    let mut lap = stokes_apply(u);
    lap.scale(-1.0);
    let r_i = inner_product(&buv, v)?;
    let r_skew = inner_product(&buv, w)? + inner_product(&buw, v)?;
    let r_ii = inner_product(&buu, &lap)?;
    Ok(IdentityReport {
        residual_i: normalized(r_i, nu * nv * nv),
        residual_skew: normalized(r_skew, nu * nv * nw),
        residual_ii: normalized(r_ii, nu * nu * lap.sobolev_norm(1.0)),
    })
}

/// Writes `id, residual_i, residual_skew, residual_ii` rows.
pub fn write_identity_csv(path: &Path, rows: &[IdentityReport]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        id: usize,
        residual_i: f64,
        residual_skew: f64,
        residual_ii: f64,
    }
    write_csv_atomic(
        path,
        rows.iter().enumerate().map(|(id, r)| Row {
            id,
            residual_i: r.residual_i,
            residual_skew: r.residual_skew,
            residual_ii: r.residual_ii,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{leray_project, random_field, ModeIndex};

    /// Direct convolution: `(1/2π) Σ_{m+n=k} (i n·û_m) v̂_n`, then projection.
    fn convolution_oracle(u: &SpectralField, v: &SpectralField) -> SpectralField {
        let n = u.cutoff() as i32;
        let i = Complex64::new(0.0, 1.0);
        let mut raw = Vec::new();
        for s in half_lattice(u.cutoff()) {
            let mut acc = [Complex64::new(0.0, 0.0); 2];
            for m1 in -n..=n {
                for m2 in -n..=n {
                    let (n1, n2) = (s.s1 - m1, s.s2 - m2);
                    let um = u.get(m1, m2);
                    let vn = v.get(n1, n2);
                    let adv = i * (um[0] * n1 as f64 + um[1] * n2 as f64);
                    acc[0] += adv * vn[0];
                    acc[1] += adv * vn[1];
                }
            }
            let k = 1.0 / (2.0 * std::f64::consts::PI);
            raw.push((s, [acc[0] * k, acc[1] * k]));
        }
        leray_project(u.cutoff(), raw).unwrap()
    }

    #[test]
    fn single_modes_are_steady() {
        for a in -4..=4 {
            for b in -4..=4 {
                if (a, b) == (0, 0) {
                    continue;
                }
                let e = SpectralField::basis(4, ModeIndex::new_unchecked(a, b)).unwrap();
                let out = bilinear_b(&e, &e).unwrap();
                assert!(out.norm() < 1e-12, "mode ({a},{b}): {}", out.norm());
            }
        }
    }

    #[test]
    fn zero_factors() {
        let u = random_field(4, 1, 1.0);
        let z = SpectralField::zeros(4);
        assert_eq!(bilinear_b(&z, &u).unwrap().norm(), 0.0);
        assert_eq!(bilinear_b(&u, &z).unwrap().norm(), 0.0);
    }

    #[test]
    fn two_mode_products_match_convolution() {
        // e_(1,0) + e_(0,1) advects itself by a pure gradient: B = 0.
        let u = SpectralField::from_basis_coords(
            4,
            &[(ModeIndex::new_unchecked(1, 0), 1.0), (ModeIndex::new_unchecked(0, 1), 1.0)],
        )
        .unwrap();
        let b = bilinear_b(&u, &u).unwrap();
        let o = convolution_oracle(&u, &u);
        assert!(o.norm() < 1e-15);
        assert!(b.sub(&o).norm() < 1e-12);

        let u = SpectralField::from_basis_coords(
            4,
            &[(ModeIndex::new_unchecked(1, 0), 0.7), (ModeIndex::new_unchecked(-1, 1), 1.3)],
        )
        .unwrap();
        let b = bilinear_b(&u, &u).unwrap();
        let o = convolution_oracle(&u, &u);
        assert!(o.norm() > 1e-3);
        assert!(b.sub(&o).norm() < 1e-12 * o.norm().max(1.0));
    }

    #[test]
    fn random_products_match_convolution() {
        let u = random_field(5, 11, 0.5);
        let v = random_field(5, 12, 0.5);
        let b = bilinear_b(&u, &v).unwrap();
        let o = convolution_oracle(&u, &v);
        assert!(b.sub(&o).norm() <= 1e-12 * o.norm());
        assert!(b.divergence_residual() <= 1e-12);
    }

    #[test]
    fn identities_hold_when_dealiased() {
        for seed in 0..5 {
            let u = random_field(16, 3 * seed, 1.0);
            let v = random_field(16, 3 * seed + 1, 1.0);
            let w = random_field(16, 3 * seed + 2, 1.0);
            let r = identity_report(&u, &v, &w).unwrap();
            assert!(r.max() <= 1e-10, "{r:?}");
        }
        let z = SpectralField::zeros(8);
        assert_eq!(identity_report(&z, &z, &z).unwrap(), IdentityReport::default());
    }

    #[test]
    fn aliased_product_breaks_energy_identity() {
        let n = 8;
        let mut ws = NonlinearWorkspace::with_resolution(n, n + 1);
        let u = random_field(n, 5, 0.0);
        let v = random_field(n, 6, 0.0);
        let w = random_field(n, 7, 0.0);
        let r = identity_report_with(&mut ws, &u, &v, &w).unwrap();
        assert!(r.residual_i > 1e-6, "{r:?}");
    }

    #[test]
    fn cutoff_mismatch_rejected() {
        let u = random_field(4, 1, 1.0);
        let v = random_field(5, 1, 1.0);
        assert!(matches!(bilinear_b(&u, &v), Err(Error::CutoffMismatch { .. })));
    }
}

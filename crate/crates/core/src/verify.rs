//! Pass/fail suites behind the `identities` and `verify` commands.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::harness::{
    convergence_sweep, decaying_field, hoelder_profile, term_limit_checks, Harness, HoelderTable, SweepOptions, SweepResult,
    TermLimitReport,
};
use crate::integrator::SimulationConfig;
use crate::nonlinear::{identity_report_with, NonlinearWorkspace};
use crate::media::{effective_q, oscillation_pairing_auto, sample_potential, EpsilonScale};
use crate::spectral::{half_lattice, inner_product, inverse, random_field, stokes_apply, SpectralField};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value >= threshold }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<40} value={:.3e} threshold={:.3e}", self.name, self.value, self.threshold)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Ladyzhenskaya ratio `‖u‖_{L⁴} / (‖u‖ ‖u‖₁)^{1/2}` with the quartic
/// integral taken on a grid fine enough to be exact.
pub fn ladyzhenskaya_ratio(u: &SpectralField) -> Result<f64> {
    let m = 4 * u.cutoff() + 4;
    let l4 = u.to_grid(m)?.l4_norm();
    Ok(l4 / (u.norm() * u.sobolev_norm(1.0)).sqrt())
}

/// `‖B(u) − B(v)‖₋₁ / ((‖u‖₁ + ‖v‖₁) ‖u − v‖₁)`.
pub fn continuity_ratio(ws: &mut NonlinearWorkspace, u: &SpectralField, v: &SpectralField) -> Result<f64> {
    let d = ws.bilinear(u, u)?.sub(&ws.bilinear(v, v)?).sobolev_norm(-1.0);
    Ok(d / ((u.sobolev_norm(1.0) + v.sobolev_norm(1.0)) * u.sub(v).sobolev_norm(1.0)))
}

fn spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(0.0, f64::max);
    hi / lo - 1.0
}

/// Structural identities of the spectral representation and of `B`.
pub fn identity_suite(seed: u64, triples: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in [8usize, 16] {
        let mut ws = NonlinearWorkspace::new(n);
        let mut worst = [0.0f64; 3];
        for k in 0..triples as u64 {
            let b = seed.wrapping_add(3 * k);
            let r = identity_report_with(&mut ws, &random_field(n, b, 1.0), &random_field(n, b + 1, 1.0), &random_field(n, b + 2, 1.0))?;
            worst[0] = worst[0].max(r.residual_i);
            worst[1] = worst[1].max(r.residual_skew);
            worst[2] = worst[2].max(r.residual_ii);
        }
        out.push(Check::at_most(format!("energy_identity_N{n}"), worst[0], 1e-10));
        out.push(Check::at_most(format!("skew_symmetry_N{n}"), worst[1], 1e-10));
        out.push(Check::at_most(format!("enstrophy_identity_N{n}"), worst[2], 1e-10));
    }
    let n = 8;
    let mut aliased = NonlinearWorkspace::with_resolution(n, n + 1);
    let mut least = f64::INFINITY;
    for k in 0..20u64 {
        let b = seed.wrapping_add(1000 + 3 * k);
        let r = identity_report_with(&mut aliased, &random_field(n, b, 0.0), &random_field(n, b + 1, 0.0), &random_field(n, b + 2, 0.0))?;
        least = least.min(r.residual_i);
    }
    out.push(Check::at_least("aliased_control_residual", least, 1e-6));

    let mut eig: f64 = 0.0;
    for s in half_lattice(n).flat_map(|p| [p, p.neg()]) {
        let e = SpectralField::basis(n, s)?;
        let mut want = e.clone();
        want.scale(s.norm_sq());
        eig = eig.max(stokes_apply(&e).sub(&want).norm());
    }
    out.push(Check::at_most("stokes_eigenrelation", eig, 0.0));

    let mut idem = 0.0;
    let mut trip: f64 = 0.0;
    let mut parseval: f64 = 0.0;
    let mut interp: f64 = 0.0;
    for k in 0..200u64 {
        let u = random_field(n, seed.wrapping_add(5000 + k), 0.5);
        let p = u.leray_projected();
        if p.leray_projected() != p {
            idem += 1.0;
        }
        let g = u.to_grid(24)?;
        trip = trip.max(inverse(&g, n)?.sub(&u).norm() / u.norm());
        parseval = parseval.max((g.l2_norm().powi(2) - u.norm().powi(2)).abs() / u.norm().powi(2));
    }
    for k in 0..1000u64 {
        let u = random_field(n, seed.wrapping_add(9000 + k), (k % 4) as f64 * 0.5);
        let rhs = (u.sobolev_norm(2.0) * u.norm()).sqrt();
        interp = interp.max((u.sobolev_norm(1.0) - rhs) / rhs);
    }
    out.push(Check::at_most("leray_idempotency_failures", idem, 0.0));
    out.push(Check::at_most("dft_round_trip", trip, 1e-12));
    out.push(Check::at_most("parseval", parseval, 1e-10));
    out.push(Check::at_most("interpolation_violation", interp, 1e-12));

    let mut lady = Vec::new();
    let mut cont = Vec::new();
    for n in [8usize, 12, 16] {
        let mut ws = NonlinearWorkspace::new(n);
        let mut l: f64 = 0.0;
        let mut c: f64 = 0.0;
        for k in 0..1000u64 {
            let b = seed.wrapping_add(20_000 + 2 * k);
            let u = random_field(n, b, 2.5);
            l = l.max(ladyzhenskaya_ratio(&u)?);
            c = c.max(continuity_ratio(&mut ws, &u, &random_field(n, b + 1, 2.5))?);
        }
        lady.push(l);
        cont.push(c);
    }
    out.push(Check::at_most("ladyzhenskaya_spread_N8_12_16", spread(&lady), 0.05));
    out.push(Check::at_most("continuity_spread_N8_12_16", spread(&cont), 0.10));

    let mut ws = NonlinearWorkspace::new(n);
    let (u, w, v) = (random_field(n, seed, 1.0), random_field(n, seed + 1, 1.0), random_field(n, seed + 2, 1.0));
    let (a, b) = (0.7, -1.3);
    let mut mix = u.clone();
    mix.scale(a);
    mix.add_scaled(b, &w);
    let lhs = ws.bilinear(&mix, &v)?;
    let mut rhs = ws.bilinear(&u, &v)?;
    rhs.scale(a);
    rhs.add_scaled(b, &ws.bilinear(&w, &v)?);
    out.push(Check::at_most("bilinearity", lhs.sub(&rhs).norm() / rhs.norm(), 1e-12));
    out.push(Check::at_most("advection_divergence", lhs.divergence_residual(), 1e-12));
    Ok(out)
}

pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub sweep: SweepResult,
    pub hoelder: HoelderTable,
    pub limits: TermLimitReport,
    /// Energy-inequality constant fitted at the first `ε`.
    pub energy_constant: f64,
}

/// Uniform-in-ε moment bounds, the pathwise energy inequality, the Hölder
/// ladder and the term-by-term limits.
pub fn verify_suite(
    h: &Harness,
    cfg: &SimulationConfig,
    eps_list: &[EpsilonScale],
    members: usize,
    permutations: usize,
    hoelder_dt: &[f64],
) -> Result<VerifyReport> {
    let mut out = Vec::new();
    let sweep = convergence_sweep(h, cfg, eps_list, &SweepOptions { members, coupled: true, permutations })?;
    let osc: Vec<_> = sweep.stats.iter().filter(|s| s.mode == "oscillating").collect();
    for (k, (name, _)) in osc[0].moments().iter().enumerate() {
        let v: Vec<f64> = osc.iter().map(|s| s.moments()[k].1.mean).collect();
        out.push(Check::at_most(format!("moment_spread_{name}"), spread(&v) + 1.0, 2.0));
    }
    let c_fit = osc[0].energy_ratios().into_iter().fold(0.0, f64::max);
    let coverage = osc
        .iter()
        .map(|s| {
            let r = s.energy_ratios();
            r.iter().filter(|&&x| x <= c_fit).count() as f64 / r.len() as f64
        })
        .fold(1.0, f64::min);
    out.push(Check::at_least("energy_inequality_coverage", coverage, 0.99));

    let mut hcfg = cfg.clone();
    if hcfg.eps.is_none() {
        hcfg.eps = eps_list.first().copied();
    }
    let table = hoelder_profile(h, &hcfg, members, hoelder_dt)?;
    out.push(Check::at_most("hoelder_ratio_spread", table.ratio_spread(), 5.0));

    let limits = term_limit_checks(h, cfg, eps_list, members, permutations)?;
    let min_k = cfg.potential.components.iter().map(|c| c.k[0].abs().max(c.k[1].abs())).min();
    let far = beyond_band(cfg.cutoff, min_k);
    if !far.is_empty() {
        let u = decaying_field(cfg.cutoff, 0.3);
        let medium = sample_potential(&cfg.potential, cfg.seed);
        let reference = effective_q(&cfg.potential) * inner_product(&u, &u)?;
        let mut worst: f64 = 0.0;
        for eps in far {
            worst = worst.max((oscillation_pairing_auto(&medium, eps, &u, &u)? - reference).abs());
        }
        out.push(Check::at_most("pairing_beyond_band", worst, 1e-10));
    }
    let monotone = limits.pairing.windows(2).filter(|w| w[1].1 > w[0].1).count();
    out.push(Check::at_most("pairing_increases", monotone as f64, 0.0));
    let ratio = limits.advection_ratio.iter().map(|r| r.1).fold(0.0, f64::max);
    out.push(Check::at_most("advection_ratio_finite", if ratio.is_finite() { 0.0 } else { 1.0 }, 0.0));
    Ok(VerifyReport { checks: out, sweep, hoelder: table, limits, energy_constant: c_fit })
}

/// A few `ε = 1/n` whose oscillation leaves the band of a product of two
/// band-`N` fields.
fn beyond_band(cutoff: usize, min_k: Option<i32>) -> Vec<EpsilonScale> {
    match min_k {
        Some(k) if k > 0 => {
            let n0 = (2 * cutoff) as u32 / k as u32 + 1;
            (n0..n0 + 3).filter_map(|n| EpsilonScale::from_n(n).ok()).collect()
        }
        _ => Vec::new(),
    }
}

//! Monte Carlo ensembles over seeds: moment estimates, Hölder profiles,
//! ε-sweeps against the effective system, and term-by-term limit checks.
//!
//! Member `i` of an ensemble with base seed `b` uses seed `b + i` for both its
//! medium and its noise. Members run on a rayon pool; results are gathered
//! and reduced in member order, so nothing depends on the thread count.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{run_path, CoefficientMode, PathSummary, SimulationConfig, Stepper};
use crate::io::write_csv_atomic;
use crate::media::{effective_q, oscillation_pairing_auto, sample_potential, EpsilonScale};
use crate::noise::sample_increments;
use crate::nonlinear::NonlinearWorkspace;
use crate::rng::{index_stream, Namespace};
use crate::spectral::{half_lattice, inner_product, SpectralField};
use crate::stats::{permutation_test, Estimate, Sample};

/// Worker pool. Results never depend on `threads`.
pub struct Harness {
    pool: rayon::ThreadPool,
}

impl Harness {
    /// `threads = 0` lets rayon pick.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `f(0..n)` in parallel, collected in index order. The first failing
    /// index (by position, not by time) is reported.
    pub fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        let out: Vec<Result<T>> = self.pool.install(|| (0..n).into_par_iter().map(&f).collect());
        out.into_iter()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::Member { member: i, source: Box::new(e) }))
            .collect()
    }
}

fn member_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Moment estimates over an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub mode: &'static str,
    pub eps: Option<f64>,
    pub members: usize,
    /// `E sup ‖u‖²`.
    pub sup_energy: Estimate,
    /// `E sup ‖u‖⁴`.
    pub sup_energy_sq: Estimate,
    /// `E ∫ ‖u‖₁²`.
    pub int_h1: Estimate,
    /// `E sup ‖u‖₁²`.
    pub sup_h1: Estimate,
    /// `E sup ‖u‖₂²`.
    pub sup_h2: Estimate,
    /// `E ‖u(T)‖²`.
    pub terminal_energy: Estimate,
    pub summaries: Vec<PathSummary>,
}

/// One line of `stats.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsRow {
    pub statistic: &'static str,
    pub estimate: f64,
    pub half_width: f64,
    /// `0` for the effective system.
    pub eps: f64,
    pub mode: &'static str,
}

impl EnsembleStats {
    fn from_members(mode: &'static str, eps: Option<f64>, runs: &[MemberRun]) -> Result<Self> {
        let col = |f: &dyn Fn(&MemberRun) -> f64| Estimate::from_samples(&runs.iter().map(f).collect::<Vec<_>>());
        Ok(Self {
            mode,
            eps,
            members: runs.len(),
            sup_energy: col(&|r| r.summary.sup_energy)?,
            sup_energy_sq: col(&|r| r.summary.sup_energy_sq)?,
            int_h1: col(&|r| r.summary.int_h1)?,
            sup_h1: col(&|r| r.summary.sup_h1)?,
            sup_h2: col(&|r| r.summary.sup_h2)?,
            terminal_energy: col(&|r| r.terminal.norm().powi(2))?,
            summaries: runs.iter().map(|r| r.summary).collect(),
        })
    }

    /// The moments checked for uniformity in ε, by name.
    pub fn moments(&self) -> [(&'static str, Estimate); 5] {
        [
            ("sup_energy", self.sup_energy),
            ("sup_energy_sq", self.sup_energy_sq),
            ("int_h1", self.int_h1),
            ("sup_h1", self.sup_h1),
            ("sup_h2", self.sup_h2),
        ]
    }

    pub fn rows(&self) -> Vec<StatsRow> {
        let mut all = self.moments().to_vec();
        all.push(("terminal_energy", self.terminal_energy));
        all.into_iter()
            .map(|(statistic, e)| StatsRow {
                statistic,
                estimate: e.mean,
                half_width: e.half_width,
                eps: self.eps.unwrap_or(0.0),
                mode: self.mode,
            })
            .collect()
    }

    /// Per-member `(sup‖u‖² + 2∫‖u‖₁²) / (1 + ‖u₀‖²)`.
    pub fn energy_ratios(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.energy_functional() / (1.0 + s.initial_energy)).collect()
    }
}

pub fn write_stats_csv(path: &Path, stats: &[EnsembleStats]) -> Result<()> {
    write_csv_atomic(path, stats.iter().flat_map(|s| s.rows()))
}

#[derive(Clone, Debug)]
struct MemberRun {
    summary: PathSummary,
    terminal: SpectralField,
}

fn run_members(h: &Harness, cfg: &SimulationConfig, members: usize, base: u64) -> Result<Vec<MemberRun>> {
    cfg.validate()?;
    h.map(members, |i| {
        let seed = member_seed(base, i);
        let inc = cfg.increments(seed)?;
        let out = run_path(cfg, &cfg.mode_for(seed), &inc, |_, _| {})?;
        Ok(MemberRun { summary: out.summary, terminal: out.terminal })
    })
}

/// `members` independent paths with seeds `cfg.seed + i`.
pub fn run_ensemble(h: &Harness, cfg: &SimulationConfig, members: usize) -> Result<EnsembleStats> {
    if members < 2 {
        return Err(Error::Config(format!("an ensemble needs at least 2 members, got {members}")));
    }
    let runs = run_members(h, cfg, members, cfg.seed)?;
    let mode = cfg.mode_for(0).label();
    EnsembleStats::from_members(mode, cfg.eps.map(|e| e.eps()), &runs)
}

/// `E‖u(t+Δt) − u(t)‖₁²` per lag.
#[derive(Clone, Debug, PartialEq)]
pub struct HoelderTable {
    pub rows: Vec<HoelderRow>,
    /// Least-squares slope of `log value` against `log Δt`.
    pub slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoelderRow {
    pub dt: f64,
    pub value: f64,
    /// `value / Δt^{1/2}`.
    pub ratio: f64,
}

impl HoelderTable {
    /// `max ratio / min ratio` over the positive lags.
    pub fn ratio_spread(&self) -> f64 {
        let r: Vec<f64> = self.rows.iter().filter(|r| r.dt > 0.0).map(|r| r.ratio).collect();
        r.iter().copied().fold(0.0, f64::max) / r.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv_atomic(path, &self.rows)
    }
}

/// Averages `‖u(t+Δt) − u(t)‖₁²` over anchors `t` on the sampling stride and
/// over members. Every `Δt` must be a multiple of `dt · sample_stride`.
pub fn hoelder_profile(h: &Harness, cfg: &SimulationConfig, members: usize, lags: &[f64]) -> Result<HoelderTable> {
    cfg.validate()?;
    let stride = cfg.sample_stride;
    let steps: Vec<usize> = lags
        .iter()
        .map(|&d| {
            let k = (d / cfg.dt).round();
            let ok = d >= 0.0 && (k * cfg.dt - d).abs() <= 1e-9 * cfg.dt && (k as usize) % stride == 0 && k as usize <= cfg.steps;
            if ok {
                Ok(k as usize / stride)
            } else {
                Err(Error::Config(format!("lag {d} is not a multiple of the sampling interval {} within the horizon", cfg.dt * stride as f64)))
            }
        })
        .collect::<Result<_>>()?;
    let per_member = h.map(members, |i| {
        let seed = member_seed(cfg.seed, i);
        let inc = cfg.increments(seed)?;
        let mut states = Vec::with_capacity(cfg.steps / stride + 1);
        run_path(cfg, &cfg.mode_for(seed), &inc, |k, u| {
            if k % stride == 0 {
                states.push(u.clone());
            }
        })?;
        Ok(steps
            .iter()
            .map(|&lag| {
                let anchors = states.len() - lag;
                (0..anchors).map(|a| states[a + lag].sub(&states[a]).sobolev_norm(1.0).powi(2)).sum::<f64>() / anchors as f64
            })
            .collect::<Vec<f64>>())
    })?;
    let rows: Vec<HoelderRow> = lags
        .iter()
        .enumerate()
        .map(|(j, &dt)| {
            let value = per_member.iter().map(|v| v[j]).sum::<f64>() / members as f64;
            HoelderRow { dt, value, ratio: if dt > 0.0 { value / dt.sqrt() } else { 0.0 } }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.dt > 0.0 && r.value > 0.0).map(|r| (r.dt.ln(), r.value.ln())).collect();
    Ok(HoelderTable { slope: fit_slope(&pts), rows })
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// One line of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub observable: String,
    pub distance: f64,
    pub p_value: f64,
    /// `E‖u^ε(T) − u(T)‖₁²` for coupled sweeps; `NaN` otherwise.
    pub pathwise_l2: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Oscillating ensembles in sweep order, then the effective ones.
    pub stats: Vec<EnsembleStats>,
    /// Coupled only: `(ε, E‖u^ε(T) − u(T)‖₁²)`.
    pub pathwise: Vec<(f64, Estimate)>,
}

impl SweepResult {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_csv_atomic(path, &self.rows)
    }

    pub fn rows_for(&self, observable: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.observable == observable).collect()
    }
}

pub struct SweepOptions {
    pub members: usize,
    pub coupled: bool,
    pub permutations: usize,
}

/// Terminal-time observables: `(Re, Im)` of each configured mode, then `‖u(T)‖²`.
fn observables(cfg: &SimulationConfig, runs: &[MemberRun]) -> Vec<(String, Sample)> {
    let mut out: Vec<(String, Sample)> = cfg
        .observables
        .iter()
        .map(|&s| {
            let pts: Vec<[f64; 2]> = runs
                .iter()
                .map(|r| {
                    let z = r.terminal.mode_observable(s);
                    [z.re, z.im]
                })
                .collect();
            (format!("mode_{}_{}", s.s1, s.s2), Sample::from_points(&pts))
        })
        .collect();
    out.push(("energy".into(), Sample::scalar(runs.iter().map(|r| r.terminal.norm().powi(2)).collect())));
    out
}

/// Compares oscillating ensembles at each `ε` with effective ensembles.
///
/// Coupled sweeps reuse the same seeds (hence the same noise) for both systems
/// and for every `ε`; uncoupled sweeps draw fresh seeds for every sample.
pub fn convergence_sweep(h: &Harness, cfg: &SimulationConfig, eps_list: &[EpsilonScale], opt: &SweepOptions) -> Result<SweepResult> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| w[1].n() <= w[0].n()) {
        return Err(Error::Config("eps list must be nonempty and strictly decreasing".into()));
    }
    if opt.members < 2 {
        return Err(Error::Config(format!("a sweep needs at least 2 members, got {}", opt.members)));
    }
    let m = opt.members as u64;
    let mut eff = cfg.clone();
    eff.eps = None;
    let shared = if opt.coupled { Some(run_members(h, &eff, opt.members, cfg.seed)?) } else { None };
    let mut rows = Vec::new();
    let mut osc_stats = Vec::new();
    let mut eff_stats = Vec::new();
    let mut pathwise = Vec::new();
    for (e, &eps) in eps_list.iter().enumerate() {
        let mut osc = cfg.clone();
        osc.eps = Some(eps);
        let (osc_runs, fresh) = if opt.coupled {
            (run_members(h, &osc, opt.members, cfg.seed)?, None)
        } else {
            let base = cfg.seed.wrapping_add(2 * e as u64 * m);
            let eff_base = cfg.seed.wrapping_add((2 * e as u64 + 1) * m);
            (run_members(h, &osc, opt.members, base)?, Some(run_members(h, &eff, opt.members, eff_base)?))
        };
        let eff_runs = shared.as_deref().or(fresh.as_deref()).expect("effective runs");
        let pw = if opt.coupled {
            let d: Vec<f64> =
                osc_runs.iter().zip(eff_runs).map(|(a, b)| a.terminal.sub(&b.terminal).sobolev_norm(1.0).powi(2)).collect();
            let est = Estimate::from_samples(&d)?;
            pathwise.push((eps.eps(), est));
            est.mean
        } else {
            f64::NAN
        };
        let (oa, ob) = (observables(cfg, &osc_runs), observables(cfg, eff_runs));
        let tests = h.map(oa.len(), |k| {
            let stream = index_stream(Namespace::Permutation, (e as u64) << 20 | k as u64);
            permutation_test(&oa[k].1, &ob[k].1, opt.permutations, cfg.seed, stream)
        })?;
        for ((name, _), t) in oa.iter().zip(tests) {
            rows.push(SweepRow { eps: eps.eps(), observable: name.clone(), distance: t.distance, p_value: t.p_value, pathwise_l2: pw });
        }
        osc_stats.push(EnsembleStats::from_members("oscillating", Some(eps.eps()), &osc_runs)?);
        if let Some(f) = fresh {
            eff_stats.push(EnsembleStats::from_members("effective", None, &f)?);
        }
        log::info!("eps = 1/{}: {} members done", eps.n(), opt.members);
    }
    if let Some(s) = shared {
        eff_stats.push(EnsembleStats::from_members("effective", None, &s)?);
    }
    osc_stats.extend(eff_stats);
    Ok(SweepResult { rows, stats: osc_stats, pathwise })
}

/// Divergence-free field `Σ_{s ∈ ℤ²₊} r^{|s₁|+|s₂|} e_s` (sine modes only).
pub fn decaying_field(cutoff: usize, r: f64) -> SpectralField {
    let coords: Vec<_> = half_lattice(cutoff).map(|s| (s, r.powi(s.s1.abs() + s.s2.abs()))).collect();
    SpectralField::from_basis_coords(cutoff, &coords).expect("modes lie in the band")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TermLimitReport {
    /// `(ε, |∫q(x/ε)u·φ − q̄⟨u,φ⟩|)`.
    pub pairing: Vec<(f64, f64)>,
    /// `(ε, energy distance, p-value)` between the laws of `∫σ(t/ε)dβ` and `∫σ̄dβ`.
    pub sigma_law: Vec<(f64, f64, f64)>,
    /// `(ε, max ‖B(u^ε) − B(u)‖₋₁ / ((‖u^ε‖₁ + ‖u‖₁)‖u^ε − u‖₁))` along coupled paths.
    pub advection_ratio: Vec<(f64, f64)>,
}

/// Term-by-term limits along an ε list: the potential pairing for frozen
/// smooth fields, the law of the averaged stochastic integral for a single
/// linear mode, and the advection continuity ratio along coupled paths.
pub fn term_limit_checks(
    h: &Harness,
    cfg: &SimulationConfig,
    eps_list: &[EpsilonScale],
    members: usize,
    permutations: usize,
) -> Result<TermLimitReport> {
    cfg.validate()?;
    let mut report = TermLimitReport::default();
    let u = decaying_field(cfg.cutoff, 0.3);
    let medium = sample_potential(&cfg.potential, cfg.seed);
    let reference = effective_q(&cfg.potential) * inner_product(&u, &u)?;
    for &eps in eps_list {
        let p = oscillation_pairing_auto(&medium, eps, &u, &u)?;
        report.pairing.push((eps.eps(), (p - reference).abs()));
    }

    // Single noise mode, constant gain: ∫ g(t/ε) q dβ against ∫ ḡ q dβ.
    let sigma = &cfg.sigma;
    let q0 = sigma.noise.amplitudes().first().copied().unwrap_or(0.0);
    let single = crate::noise::NoiseModel::new(sigma.noise.modes().iter().take(1).copied().collect(), vec![q0; sigma.noise.len().min(1)])?;
    let integral = |seed: u64, scale: Option<f64>| -> Result<f64> {
        let inc = sample_increments(&single, cfg.dt, cfg.steps, seed)?;
        Ok((0..inc.steps())
            .map(|k| {
                let g = match scale {
                    Some(n) => sigma.g(k as f64 * cfg.dt * n),
                    None => sigma.g_bar(),
                };
                if inc.modes() == 0 { 0.0 } else { g * sigma.rho0 * inc.wiener(k, 0) }
            })
            .sum())
    };
    let m = members as u64;
    let averaged = Sample::scalar(h.map(members, |i| integral(member_seed(cfg.seed, i), None))?);
    for (e, &eps) in eps_list.iter().enumerate() {
        let base = cfg.seed.wrapping_add((e as u64 + 1) * m);
        let fast = Sample::scalar(h.map(members, |i| integral(member_seed(base, i), Some(eps.n() as f64)))?);
        let t = permutation_test(&fast, &averaged, permutations, cfg.seed, index_stream(Namespace::Permutation, 1 << 40 | e as u64))?;
        report.sigma_law.push((eps.eps(), t.distance, t.p_value));
    }

    // Lockstep coupled pairs.
    let pairs = members.min(16);
    let mut eff = cfg.clone();
    eff.eps = None;
    for &eps in eps_list {
        let mut osc = cfg.clone();
        osc.eps = Some(eps);
        let ratios = h.map(pairs, |i| {
            let seed = member_seed(cfg.seed, i);
            let inc = cfg.increments(seed)?;
            let mut a = Stepper::new(&osc, &osc.mode_for(seed))?;
            let mut b = Stepper::new(&eff, &CoefficientMode::Effective)?;
            let mut ws = NonlinearWorkspace::with_resolution(cfg.cutoff, cfg.grid);
            let (mut ua, mut ub) = (cfg.initial.clone(), cfg.initial.clone());
            let mut worst: f64 = 0.0;
            for k in 0..cfg.steps {
                let t = k as f64 * cfg.dt;
                a.advance(&mut ua, t, inc.beta(k))?;
                b.advance(&mut ub, t, inc.beta(k))?;
                if (k + 1) % cfg.sample_stride == 0 {
                    let d = ua.sub(&ub).sobolev_norm(1.0);
                    if d > 0.0 {
                        let lhs = ws.bilinear(&ua, &ua)?.sub(&ws.bilinear(&ub, &ub)?).sobolev_norm(-1.0);
                        worst = worst.max(lhs / ((ua.sobolev_norm(1.0) + ub.sobolev_norm(1.0)) * d));
                    }
                }
            }
            Ok(worst)
        })?;
        report.advection_ratio.push((eps.eps(), ratios.into_iter().fold(0.0, f64::max)));
    }
    Ok(report)
}

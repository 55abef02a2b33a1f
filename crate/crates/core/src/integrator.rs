//! Semi-implicit Euler–Maruyama stepping: implicit Stokes, explicit
//! advection, potential and noise.
//!
//! ```text
//! u^{n+1}_s = [u^n − dt B(u^n) + dt Π(q u^n) + σ(t_n, u^n) ΔW_n]_s / (1 + ν dt |s|²)
//! ```

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::write_bytes_atomic;
use crate::media::{effective_q, sample_potential, EpsilonScale, PotentialOperator, PotentialRealization, PotentialSpec};
use crate::noise::{sample_increments, IncrementTable, NoiseEmbedding, SigmaModel};
use crate::nonlinear::{DealiasRule, NonlinearWorkspace};
use crate::spectral::{slot_norms_sq, ModeIndex, SpectralField, Vec2c};

/// Which coefficients drive a path.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientMode {
    /// `q(x/ε, ω)` and `σ(t/ε, ·)`.
    Oscillating { eps: EpsilonScale, realization: PotentialRealization },
    /// `q̄` and `σ̄`.
    Effective,
}

impl CoefficientMode {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Oscillating { .. } => "oscillating",
            Self::Effective => "effective",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub cutoff: usize,
    /// Padded grid for the advection product.
    pub grid: usize,
    pub dt: f64,
    pub steps: usize,
    pub viscosity: f64,
    /// Divergence threshold on `‖u‖₁`.
    pub ceiling: f64,
    pub sample_stride: usize,
    pub potential: PotentialSpec,
    pub sigma: SigmaModel,
    pub initial: SpectralField,
    pub observables: Vec<ModeIndex>,
    /// `None` selects the effective system.
    pub eps: Option<EpsilonScale>,
    pub seed: u64,
}

impl SimulationConfig {
    /// Deterministic, noise-free, potential-free run from `initial`.
    pub fn new(initial: SpectralField, dt: f64, steps: usize) -> Self {
        let cutoff = initial.cutoff();
        Self {
            cutoff,
            grid: DealiasRule::resolution(cutoff),
            dt,
            steps,
            viscosity: 1.0,
            ceiling: 1e6,
            sample_stride: 1,
            potential: PotentialSpec::constant(0.0),
            sigma: SigmaModel::off(),
            initial,
            observables: Vec::new(),
            eps: None,
            seed: 0,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.cutoff == 0 {
            return Err(Error::Config("cutoff must be at least 1".into()));
        }
        if self.initial.cutoff() != self.cutoff {
            return Err(Error::CutoffMismatch { left: self.initial.cutoff(), right: self.cutoff });
        }
        if self.grid < 2 * self.cutoff + 2 {
            return Err(Error::Resolution { m: self.grid, need: 2 * self.cutoff + 2, why: "grid must satisfy M >= 2N + 2" });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.viscosity > 0.0) {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.viscosity)));
        }
        if self.sample_stride == 0 {
            return Err(Error::Config("sample_stride must be at least 1".into()));
        }
        if let Some(&s) = self.observables.iter().find(|s| s.linf() > self.cutoff) {
            return Err(Error::OutsideBand { s1: s.s1, s2: s.s2, cutoff: self.cutoff });
        }
        if self.sigma.noise.max_mode() > self.cutoff {
            return Err(Error::Config(format!(
                "noise modes reach |s| = {} beyond cutoff {}",
                self.sigma.noise.max_mode(),
                self.cutoff
            )));
        }
        self.potential.validate()?;
        if !self.initial.is_finite() {
            return Err(Error::NonFinite("initial condition"));
        }
        Ok(())
    }

    /// Coefficients for the path with `seed`: the medium is frozen per path.
    pub fn mode_for(&self, seed: u64) -> CoefficientMode {
        match self.eps {
            Some(eps) => CoefficientMode::Oscillating { eps, realization: sample_potential(&self.potential, seed) },
            None => CoefficientMode::Effective,
        }
    }

    pub fn increments(&self, seed: u64) -> Result<IncrementTable> {
        sample_increments(&self.sigma.noise, self.dt, self.steps, seed)
    }
}

/// One-step map with reusable buffers.
pub struct Stepper {
    dt: f64,
    ceiling: f64,
    ws: NonlinearWorkspace,
    potential: PotentialOperator,
    sigma: SigmaModel,
    noise: NoiseEmbedding,
    /// `Some(1/ε)` for the oscillating time scale, `None` for `σ̄`.
    time_scale: Option<f64>,
    implicit: Vec<f64>,
    b: Vec<Vec2c>,
    qu: Vec<Vec2c>,
}

impl Stepper {
    pub fn new(cfg: &SimulationConfig, mode: &CoefficientMode) -> Result<Self> {
        cfg.validate()?;
        let (potential, time_scale) = match mode {
            CoefficientMode::Oscillating { eps, realization } => {
                (PotentialOperator::new(realization, *eps), Some(eps.n() as f64))
            }
            CoefficientMode::Effective => (PotentialOperator::constant(effective_q(&cfg.potential)), None),
        };
        let implicit = slot_norms_sq(cfg.cutoff).iter().map(|k2| 1.0 / (1.0 + cfg.viscosity * cfg.dt * k2)).collect();
        Ok(Self {
            dt: cfg.dt,
            ceiling: cfg.ceiling,
            ws: NonlinearWorkspace::with_resolution(cfg.cutoff, cfg.grid),
            potential,
            sigma: cfg.sigma.clone(),
            noise: cfg.sigma.noise.embed(cfg.cutoff)?,
            time_scale,
            implicit,
            b: Vec::new(),
            qu: Vec::new(),
        })
    }

    /// Noise multiplier `g(t/ε) ρ(‖u‖²)` or `ḡ ρ(‖u‖²)`.
    pub fn sigma_factor(&self, t: f64, u: &SpectralField) -> f64 {
        match self.time_scale {
            Some(n) => self.sigma.factor(t * n, u),
            None => self.sigma.averaged_factor(u),
        }
    }

    /// Advances `u` from `t` to `t + dt` in place.
    pub fn advance(&mut self, u: &mut SpectralField, t: f64, dbeta: &[f64]) -> Result<()> {
        let dt = self.dt;
        self.ws.bilinear_into(u.coeffs(), u.coeffs(), &mut self.b)?;
        self.potential.apply_into(u, &mut self.qu);
        let factor = self.sigma_factor(t, u);
        let c = u.coeffs_mut();
        for (k, x) in c.iter_mut().enumerate() {
            for d in 0..2 {
                x[d] += (self.qu[k][d] - self.b[k][d]) * dt;
            }
        }
        if !self.noise.is_empty() {
            self.noise.accumulate(factor, dbeta, c);
        }
        for (x, f) in c.iter_mut().zip(&self.implicit) {
            x[0] *= *f;
            x[1] *= *f;
        }
        let h1 = u.sobolev_norm(1.0);
        if !h1.is_finite() || h1 > self.ceiling {
            return Err(Error::Divergence { t: t + dt, norm: h1, ceiling: self.ceiling });
        }
        Ok(())
    }

    pub fn step(&mut self, u: &SpectralField, t: f64, dbeta: &[f64]) -> Result<SpectralField> {
        let mut v = u.clone();
        self.advance(&mut v, t, dbeta)?;
        Ok(v)
    }
}

/// Sampled path record.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `(‖u‖, ‖u‖₁, ‖u‖₂)` per sample.
    pub norms: Vec<[f64; 3]>,
    pub observables: Vec<ModeIndex>,
    /// `⟨u, e_s⟩ + i⟨u, e_{-s}⟩` per sample and observable.
    pub values: Vec<Vec<Complex64>>,
}

impl Trajectory {
    fn new(observables: Vec<ModeIndex>) -> Self {
        Self { times: Vec::new(), norms: Vec::new(), observables, values: Vec::new() }
    }

    fn record(&mut self, t: f64, sq: [f64; 3], u: &SpectralField) {
        self.times.push(t);
        self.norms.push(sq.map(f64::sqrt));
        self.values.push(self.observables.iter().map(|&s| u.mode_observable(s)).collect());
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["t", "norm0", "norm1", "norm2"].iter().map(|s| s.to_string()).collect();
        for s in &self.observables {
            h.push(format!("obs_{}_{}_re", s.s1, s.s2));
            h.push(format!("obs_{}_{}_im", s.s1, s.s2));
        }
        h
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for ((t, n), vals) in self.times.iter().zip(&self.norms).zip(&self.values) {
            let mut row = vec![t.to_string(), n[0].to_string(), n[1].to_string(), n[2].to_string()];
            for v in vals {
                row.push(v.re.to_string());
                row.push(v.im.to_string());
            }
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_bytes_atomic(path, &self.to_csv()?)
    }
}

/// Pathwise functionals behind the moment estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PathSummary {
    /// `‖u₀‖²`.
    pub initial_energy: f64,
    /// `sup_t ‖u‖²`.
    pub sup_energy: f64,
    /// `sup_t ‖u‖⁴`.
    pub sup_energy_sq: f64,
    /// `∫₀ᵀ ‖u‖₁² dt`, trapezoid rule over steps.
    pub int_h1: f64,
    /// `sup_t ‖u‖₁²`.
    pub sup_h1: f64,
    /// `sup_t ‖u‖₂²`.
    pub sup_h2: f64,
}

impl PathSummary {
    fn start(sq: [f64; 3]) -> Self {
        Self {
            initial_energy: sq[0],
            sup_energy: sq[0],
            sup_energy_sq: sq[0] * sq[0],
            int_h1: 0.0,
            sup_h1: sq[1],
            sup_h2: sq[2],
        }
    }

    fn update(&mut self, prev: [f64; 3], sq: [f64; 3], dt: f64) {
        self.sup_energy = self.sup_energy.max(sq[0]);
        self.sup_energy_sq = self.sup_energy_sq.max(sq[0] * sq[0]);
        self.int_h1 += 0.5 * dt * (prev[1] + sq[1]);
        self.sup_h1 = self.sup_h1.max(sq[1]);
        self.sup_h2 = self.sup_h2.max(sq[2]);
    }

    /// `sup ‖u‖² + 2∫‖u‖₁²`, the left side of the energy inequality.
    pub fn energy_functional(&self) -> f64 {
        self.sup_energy + 2.0 * self.int_h1
    }
}

#[derive(Clone, Debug)]
pub struct PathOutput {
    pub trajectory: Trajectory,
    pub summary: PathSummary,
    pub terminal: SpectralField,
}

/// Integrates one path with the given coefficients and increments.
/// `observe(step, u)` sees the state after every step, starting at step 0.
pub fn run_path<F>(cfg: &SimulationConfig, mode: &CoefficientMode, inc: &IncrementTable, mut observe: F) -> Result<PathOutput>
where
    F: FnMut(usize, &SpectralField),
{
    if inc.steps() != cfg.steps || (inc.dt() - cfg.dt).abs() > 1e-12 * cfg.dt || inc.modes() != cfg.sigma.noise.len() {
        return Err(Error::Config("increment table does not match the time grid or noise model".into()));
    }
    let mut stepper = Stepper::new(cfg, mode)?;
    let mut u = cfg.initial.clone();
    let mut sq = u.norms_sq();
    let mut summary = PathSummary::start(sq);
    let mut traj = Trajectory::new(cfg.observables.clone());
    traj.record(0.0, sq, &u);
    observe(0, &u);
    for n in 0..cfg.steps {
        let t = n as f64 * cfg.dt;
        stepper.advance(&mut u, t, inc.beta(n))?;
        let next = u.norms_sq();
        summary.update(sq, next, cfg.dt);
        sq = next;
        let k = n + 1;
        if k % cfg.sample_stride == 0 || k == cfg.steps {
            traj.record(k as f64 * cfg.dt, sq, &u);
        }
        observe(k, &u);
    }
    Ok(PathOutput { trajectory: traj, summary, terminal: u })
}

/// The path for `cfg.seed`: medium and noise both keyed by that seed.
pub fn simulate_path(cfg: &SimulationConfig) -> Result<PathOutput> {
    simulate_member(cfg, cfg.seed)
}

pub fn simulate_member(cfg: &SimulationConfig, seed: u64) -> Result<PathOutput> {
    cfg.validate()?;
    let inc = cfg.increments(seed)?;
    run_path(cfg, &cfg.mode_for(seed), &inc, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::PotentialComponent;
    use crate::noise::{Gain, NoiseModel};
    use crate::spectral::random_field;

    fn noisy(cutoff: usize, dt: f64, steps: usize) -> SimulationConfig {
        let mut cfg = SimulationConfig::new(random_field(cutoff, 3, 2.0), dt, steps);
        cfg.potential = PotentialSpec { a0: 0.2, components: vec![PotentialComponent { k: [1, 0], a: 0.8 }] };
        cfg.sigma =
            SigmaModel::new(1.0, 0.3, 1.0, Gain::Decaying, NoiseModel::power_law(cutoff, 0.5, 1.5).unwrap()).unwrap();
        cfg.eps = Some(EpsilonScale::from_n(4).unwrap());
        cfg.observables = vec![ModeIndex::new_unchecked(1, 0), ModeIndex::new_unchecked(-1, 1)];
        cfg.sample_stride = 4;
        cfg
    }

    #[test]
    fn heat_decay_of_a_single_mode() {
        let s = ModeIndex::new_unchecked(2, -1);
        let dt = 1e-2;
        let cfg = SimulationConfig::new(SpectralField::basis(4, s).unwrap(), dt, 50);
        let mut st = Stepper::new(&cfg, &CoefficientMode::Effective).unwrap();
        let mut u = cfg.initial.clone();
        let r = 1.0 / (1.0 + dt * 5.0);
        for n in 1..=50 {
            st.advance(&mut u, 0.0, &[]).unwrap();
            let mut e = cfg.initial.clone();
            e.scale(r.powi(n));
            assert!(u.sub(&e).norm() <= 1e-14 * e.norm(), "step {n}");
        }
    }

    #[test]
    fn constant_potential_growth_factor() {
        let s = ModeIndex::new_unchecked(1, 1);
        let dt = 1e-2;
        let mut cfg = SimulationConfig::new(SpectralField::basis(3, s).unwrap(), dt, 1);
        cfg.potential = PotentialSpec::constant(0.7);
        let out = simulate_path(&cfg).unwrap();
        let f = (1.0 + dt * 0.7) / (1.0 + 2.0 * dt);
        assert!((out.terminal.basis_coord(s) - f).abs() < 1e-15);
    }

    #[test]
    fn zero_stays_zero_without_noise() {
        let mut cfg = noisy(4, 1e-2, 10);
        cfg.initial = SpectralField::zeros(4);
        cfg.sigma.rho0 = 0.0;
        let out = simulate_path(&cfg).unwrap();
        assert_eq!(out.terminal.norm(), 0.0);
    }

    #[test]
    fn free_decay_is_monotone() {
        let mut u = random_field(8, 21, 1.0);
        u.scale(2.0 / u.norm());
        let cfg = SimulationConfig::new(u, 1e-3, 200);
        let out = simulate_path(&cfg).unwrap();
        for w in out.trajectory.norms.windows(2) {
            assert!(w[1][0] <= w[0][0]);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let cfg = noisy(6, 1.0 / 256.0, 64);
        let a = simulate_path(&cfg).unwrap();
        let b = simulate_path(&cfg).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.trajectory.to_csv().unwrap(), b.trajectory.to_csv().unwrap());
        let mut c = cfg.clone();
        c.seed = 1;
        assert_ne!(simulate_path(&c).unwrap().trajectory, a.trajectory);
    }

    #[test]
    fn halving_dt_contracts_the_error() {
        let fine = 1.0 / 1024.0;
        let steps = 256;
        let cfg = noisy(6, fine, steps);
        let mode = cfg.mode_for(5);
        let inc = cfg.increments(5).unwrap();
        let terminal = |factor: usize| {
            let mut c = cfg.clone();
            c.dt = fine * factor as f64;
            c.steps = steps / factor;
            run_path(&c, &mode, &inc.coarsen(factor).unwrap(), |_, _| {}).unwrap().terminal
        };
        let (u4, u2, u1) = (terminal(4), terminal(2), terminal(1));
        let e1 = u4.sub(&u2).norm();
        let e2 = u2.sub(&u1).norm();
        assert!(e1 >= 1.7 * e2, "{e1} vs {e2}");
    }

    #[test]
    fn samples_and_csv_header() {
        let cfg = noisy(4, 1e-2, 10);
        let out = simulate_path(&cfg).unwrap();
        assert_eq!(out.trajectory.times.len(), 4);
        assert_eq!(*out.trajectory.times.last().unwrap(), 10.0 * 1e-2);
        let csv = String::from_utf8(out.trajectory.to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("t,norm0,norm1,norm2,obs_1_0_re,obs_1_0_im,obs_-1_1_re,obs_-1_1_im\n"));
        assert!(out.terminal.divergence_residual() < 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let mut cfg = noisy(4, 1e-2, 10);
        cfg.ceiling = 1e-3;
        match simulate_path(&cfg) {
            Err(Error::Divergence { t, .. }) => assert!(t > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = noisy(4, 1e-2, 10);
        cfg.grid = 9;
        assert!(matches!(cfg.validate(), Err(Error::Resolution { .. })));
        let mut cfg = noisy(4, 1e-2, 10);
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = noisy(4, 1e-2, 10);
        cfg.sigma.noise = NoiseModel::power_law(5, 1.0, 1.0).unwrap();
        assert!(cfg.validate().is_err());
    }
}

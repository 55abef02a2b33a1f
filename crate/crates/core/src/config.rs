//! TOML run configuration. Every key has a default, so an empty file is a
//! valid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::SimulationConfig;
use crate::media::{EpsilonScale, PotentialComponent, PotentialSpec};
use crate::noise::{Gain, NoiseModel, SigmaModel};
use crate::nonlinear::DealiasRule;
use crate::spectral::{ModeIndex, SpectralField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub simulation: SimulationSection,
    pub initial: InitialSection,
    pub potential: PotentialSpec,
    pub noise: NoiseSection,
    pub sigma: SigmaSection,
    pub harness: HarnessSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Oscillating,
    Effective,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub cutoff: usize,
    /// Padded grid; `None` picks the smallest FFT-friendly size `≥ 3N + 1`.
    pub grid: Option<usize>,
    pub dt: f64,
    pub horizon: f64,
    pub viscosity: f64,
    pub sample_stride: usize,
    pub ceiling: f64,
    pub mode: Mode,
    pub eps: f64,
    pub observables: Vec<[i32; 2]>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            cutoff: 8,
            grid: None,
            dt: 1.0 / 1024.0,
            horizon: 1.0,
            viscosity: 1.0,
            sample_stride: 2,
            ceiling: 1e6,
            mode: Mode::Oscillating,
            eps: 0.25,
            observables: vec![[1, 0], [0, 1], [1, 1], [-1, 1]],
        }
    }
}

/// `u₀ = Σ coords[i] e_{modes[i]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub modes: Vec<[i32; 2]>,
    pub coords: Vec<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { modes: vec![[1, 0], [0, 1], [1, 1], [-1, 1], [2, 1]], coords: vec![0.6, -0.4, 0.3, 0.2, -0.1] }
    }
}

/// Either an explicit mode list with amplitudes, or a power law
/// `q_s = amplitude · |s|^{-exponent}` over the whole band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub modes: Option<Vec<[i32; 2]>>,
    pub q: Option<Vec<f64>>,
    pub amplitude: f64,
    pub exponent: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { modes: None, q: None, amplitude: 0.5, exponent: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaSection {
    pub period: f64,
    pub gamma: f64,
    pub rho0: f64,
    pub gain: Gain,
}

impl Default for SigmaSection {
    fn default() -> Self {
        Self { period: 1.0, gamma: 0.2, rho0: 1.0, gain: Gain::Decaying }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSection {
    pub members: usize,
    pub eps_list: Vec<f64>,
    pub coupled: bool,
    pub permutations: usize,
    pub hoelder_dt: Vec<f64>,
    /// Worker threads; `0` defers to `NSHOMOG_THREADS`, then to all cores.
    pub threads: usize,
}

impl Default for HarnessSection {
    fn default() -> Self {
        Self {
            members: 200,
            eps_list: vec![0.5, 0.25, 0.125, 0.0625],
            coupled: true,
            permutations: 1000,
            hoelder_dt: (3..=9).map(|k| 0.5f64.powi(k)).collect(),
            threads: 0,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            simulation: SimulationSection::default(),
            initial: InitialSection::default(),
            potential: PotentialSpec { a0: 0.2, components: vec![PotentialComponent { k: [1, 0], a: 0.8 }] },
            noise: NoiseSection::default(),
            sigma: SigmaSection::default(),
            harness: HarnessSection::default(),
        }
    }
}

fn mode(ab: [i32; 2]) -> Result<ModeIndex> {
    ModeIndex::new(ab[0], ab[1])
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn steps(&self) -> Result<usize> {
        let s = &self.simulation;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(Error::Config(format!("simulation.dt must be positive, got {}", s.dt)));
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return Err(Error::Config(format!("simulation.horizon must be positive, got {}", s.horizon)));
        }
        let n = (s.horizon / s.dt).round();
        if (n * s.dt - s.horizon).abs() > 1e-9 * s.horizon {
            return Err(Error::Config(format!("horizon {} is not a whole number of steps of dt = {}", s.horizon, s.dt)));
        }
        Ok(n as usize)
    }

    pub fn grid(&self) -> usize {
        self.simulation.grid.unwrap_or_else(|| DealiasRule::resolution(self.simulation.cutoff))
    }

    pub fn eps(&self) -> Result<EpsilonScale> {
        EpsilonScale::from_eps(self.simulation.eps)
    }

    pub fn eps_list(&self) -> Result<Vec<EpsilonScale>> {
        self.harness.eps_list.iter().map(|&e| EpsilonScale::from_eps(e)).collect()
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let n = &self.noise;
        match (&n.modes, &n.q) {
            (Some(modes), Some(q)) => NoiseModel::new(modes.iter().map(|&m| mode(m)).collect::<Result<_>>()?, q.clone()),
            (None, None) => NoiseModel::power_law(self.simulation.cutoff, n.amplitude, n.exponent),
            _ => Err(Error::Config("noise.modes and noise.q must be given together".into())),
        }
    }

    pub fn sigma_model(&self) -> Result<SigmaModel> {
        let s = &self.sigma;
        SigmaModel::new(s.period, s.gamma, s.rho0, s.gain, self.noise_model()?)
    }

    pub fn initial_field(&self) -> Result<SpectralField> {
        let i = &self.initial;
        if i.modes.len() != i.coords.len() {
            return Err(Error::Config(format!("initial: {} modes but {} coords", i.modes.len(), i.coords.len())));
        }
        let coords: Vec<_> = i.modes.iter().zip(&i.coords).map(|(&m, &c)| Ok((mode(m)?, c))).collect::<Result<_>>()?;
        SpectralField::from_basis_coords(self.simulation.cutoff, &coords)
    }

    /// The solver configuration; `mode` and `eps` come from `[simulation]`.
    pub fn simulation(&self) -> Result<SimulationConfig> {
        let s = &self.simulation;
        let cfg = SimulationConfig {
            cutoff: s.cutoff,
            grid: self.grid(),
            dt: s.dt,
            steps: self.steps()?,
            viscosity: s.viscosity,
            ceiling: s.ceiling,
            sample_stride: s.sample_stride,
            potential: self.potential.clone(),
            sigma: self.sigma_model()?,
            initial: self.initial_field()?,
            observables: s.observables.iter().map(|&m| mode(m)).collect::<Result<_>>()?,
            eps: match s.mode {
                Mode::Oscillating => Some(self.eps()?),
                Mode::Effective => None,
            },
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let s = &self.simulation;
        if s.cutoff == 0 {
            return Err(Error::Config("simulation.cutoff must be at least 1".into()));
        }
        let grid = self.grid();
        if grid < 2 * s.cutoff + 2 {
            return Err(Error::Resolution { m: grid, need: 2 * s.cutoff + 2, why: "simulation.grid must satisfy M >= 2N + 2" });
        }
        self.eps()?;
        let list = self.eps_list()?;
        if list.windows(2).any(|w| w[1].n() <= w[0].n()) {
            return Err(Error::Config("harness.eps_list must be strictly decreasing".into()));
        }
        if self.harness.members < 2 {
            return Err(Error::Config("harness.members must be at least 2".into()));
        }
        let steps = self.steps()?;
        for &d in &self.harness.hoelder_dt {
            let k = (d / s.dt).round();
            if !(d > 0.0) || (k * s.dt - d).abs() > 1e-9 * s.dt || k as usize % s.sample_stride.max(1) != 0 || k as usize > steps {
                return Err(Error::Config(format!(
                    "harness.hoelder_dt entry {d} must be a positive multiple of dt * sample_stride within the horizon"
                )));
            }
        }
        self.simulation().map(|_| ())
    }

    /// `harness.threads`, else `NSHOMOG_THREADS`, else 0 (all cores).
    pub fn threads(&self) -> usize {
        if self.harness.threads > 0 {
            return self.harness.threads;
        }
        std::env::var("NSHOMOG_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        let sim = c.simulation().unwrap();
        assert_eq!(sim.steps, 1024);
        assert_eq!(sim.grid, 25);
        assert_eq!(sim.eps.unwrap().n(), 4);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_eps_not_reciprocal() {
        let e = RunConfig::from_toml("[simulation]\neps = 0.3\n").unwrap_err();
        assert!(e.to_string().contains("1/n"), "{e}");
    }

    #[test]
    fn rejects_coarse_grid_and_bad_dt() {
        let e = RunConfig::from_toml("[simulation]\ngrid = 10\n").unwrap_err();
        assert!(e.to_string().contains("2N + 2"), "{e}");
        assert!(RunConfig::from_toml("[simulation]\ndt = 0.0\n").is_err());
        assert!(RunConfig::from_toml("[simulation]\ndt = -1e-3\n").is_err());
        assert!(RunConfig::from_toml("[simulation]\nhorizon = 0.3\ndt = 0.25\n").is_err());
    }

    #[test]
    fn explicit_noise_and_potential() {
        let text = r#"
            seed = 9
            [potential]
            a0 = 0.1
            components = [{ k = [1, 2], a = 0.3 }]
            [noise]
            modes = [[1, 0], [-1, 0]]
            q = [0.5, 0.25]
            [sigma]
            gain = "constant"
        "#;
        let c = RunConfig::from_toml(text).unwrap();
        let sim = c.simulation().unwrap();
        assert_eq!(sim.sigma.noise.len(), 2);
        assert_eq!(sim.sigma.gain, Gain::Constant);
        assert_eq!(sim.potential.components[0].k, [1, 2]);
        assert!(RunConfig::from_toml("[noise]\nq = [1.0]\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn hoelder_lags_must_sit_on_the_stride() {
        assert!(RunConfig::from_toml("[simulation]\nsample_stride = 4\n").is_err());
        assert!(RunConfig::from_toml("[simulation]\nsample_stride = 4\n[harness]\nhoelder_dt = [0.125]\n").is_ok());
    }
}

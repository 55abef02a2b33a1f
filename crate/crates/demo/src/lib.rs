//! WebAssembly bindings for the browser demo in `www/`.

use nshomog::config::{Mode, RunConfig};
use nshomog::harness::decaying_field;
use nshomog::integrator::{CoefficientMode, SimulationConfig, Stepper};
use nshomog::media::{effective_q, evaluate_q_eps, oscillation_pairing_auto, sample_potential, EpsilonScale};
use nshomog::noise::sample_increments;
use nshomog::spectral::{inner_product, vorticity_grid};
use nshomog::SpectralField;
use wasm_bindgen::prelude::*;

const CHUNK: usize = 64;

fn js(e: nshomog::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn demo_config(n: u32, seed: u32, effective: bool) -> nshomog::Result<SimulationConfig> {
    let mut rc = RunConfig { seed: seed as u64, ..RunConfig::default() };
    rc.simulation.eps = EpsilonScale::from_n(n)?.eps();
    if effective {
        rc.simulation.mode = Mode::Effective;
    }
    rc.simulation()
}

/// `q(x/ε)` on a `res × res` grid over the torus, row-major in `x₂`.
pub fn potential_grid(n: u32, res: usize, seed: u32) -> nshomog::Result<Vec<f64>> {
    let eps = EpsilonScale::from_n(n)?;
    let spec = RunConfig::default().potential;
    let r = sample_potential(&spec, seed as u64);
    let h = std::f64::consts::TAU / res as f64;
    Ok((0..res * res).map(|j| evaluate_q_eps(&r, [(j % res) as f64 * h, (j / res) as f64 * h], eps)).collect())
}

#[wasm_bindgen]
pub fn potential_field(n: u32, res: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    potential_grid(n, res, seed).map_err(js)
}

/// `|∫ q(x/ε) u·u − q̄ ‖u‖²|` for `ε = 1, 1/2, …, 1/max_n`.
pub fn pairing_errors(max_n: u32, seed: u32) -> nshomog::Result<Vec<f64>> {
    let spec = RunConfig::default().potential;
    let r = sample_potential(&spec, seed as u64);
    let u = decaying_field(8, 0.3);
    let reference = effective_q(&spec) * inner_product(&u, &u)?;
    (1..=max_n).map(|n| Ok((oscillation_pairing_auto(&r, EpsilonScale::from_n(n)?, &u, &u)? - reference).abs())).collect()
}

#[wasm_bindgen]
pub fn pairing_curve(max_n: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    pairing_errors(max_n, seed).map_err(js)
}

/// One live path, advanced on request.
#[wasm_bindgen]
pub struct FlowDemo {
    cfg: SimulationConfig,
    stepper: Stepper,
    u: SpectralField,
    step: usize,
    chunk: Vec<Vec<f64>>,
}

impl FlowDemo {
    pub fn create(n: u32, seed: u32, effective: bool) -> nshomog::Result<Self> {
        let cfg = demo_config(n, seed, effective)?;
        let mode = if effective { CoefficientMode::Effective } else { cfg.mode_for(cfg.seed) };
        let stepper = Stepper::new(&cfg, &mode)?;
        Ok(Self { u: cfg.initial.clone(), cfg, stepper, step: 0, chunk: Vec::new() })
    }

    pub fn advance(&mut self, steps: usize) -> nshomog::Result<()> {
        for _ in 0..steps {
            let k = self.step % CHUNK;
            if k == 0 {
                let seed = self.cfg.seed.wrapping_add((self.step / CHUNK) as u64 * 0x9E37_79B9);
                let inc = sample_increments(&self.cfg.sigma.noise, self.cfg.dt, CHUNK, seed)?;
                self.chunk = (0..CHUNK).map(|j| inc.beta(j).to_vec()).collect();
            }
            let t = self.step as f64 * self.cfg.dt;
            self.stepper.advance(&mut self.u, t, &self.chunk[k])?;
            self.step += 1;
        }
        Ok(())
    }

    pub fn field(&self) -> &SpectralField {
        &self.u
    }
}

#[wasm_bindgen]
impl FlowDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(n: u32, seed: u32, effective: bool) -> Result<FlowDemo, JsError> {
        Self::create(n, seed, effective).map_err(js)
    }

    pub fn step(&mut self, steps: usize) -> Result<(), JsError> {
        self.advance(steps).map_err(js)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn energy(&self) -> f64 {
        self.u.norm().powi(2)
    }

    /// Vorticity on a `res × res` grid; `res` must be at least `2N + 2 = 18`.
    pub fn vorticity(&self, res: usize) -> Result<Vec<f64>, JsError> {
        vorticity_grid(&self.u, res).map_err(js)
    }
}

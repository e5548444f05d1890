//! Experiment configuration (TOML with `[section]` headers).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::dynamics::{Scheme, StepControl};
use crate::energetics::{EnergyModel, GammaLaw, DEFAULT_RHO_MIN};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TorusGrid};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    #[serde(default = "two_pi")]
    pub length: f64,
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    Euler,
    EulerPoisson,
    EulerKorteweg,
}

/// `V(x) = amplitude · Π_axes cos(mode · 2πx_i/L)`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfinementSection {
    pub amplitude: f64,
    #[serde(default = "one_usize")]
    pub mode: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub variant: ModelVariant,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "two")]
    pub gamma: f64,
    pub c_x: Option<f64>,
    pub beta: Option<f64>,
    pub c_kappa: Option<f64>,
    pub confinement: Option<ConfinementSection>,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    /// Cap on the relaxation step (the CFL bound applies as well).
    pub dt: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Limit-flow scheme; defaults to semi-implicit for Cahn–Hilliard, RK4 otherwise.
    pub limit_scheme: Option<Scheme>,
    /// Limit-flow step cap.
    pub limit_dt: Option<f64>,
    /// Upper bound on `dt/ε²` for relaxation steps.
    pub stiffness: Option<f64>,
    /// Relaxation parameter for single runs (`simulate`, `identity`).
    pub epsilon: Option<f64>,
    #[serde(default = "default_rho_min")]
    pub rho_min: f64,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_scheme() -> Scheme {
    Scheme::ImexIntegratingFactor
}

fn default_rho_min() -> f64 {
    DEFAULT_RHO_MIN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumPrep {
    Zero,
    Equilibrium,
    Perturbed,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_profile")]
    pub profile: String,
    pub amplitude: f64,
    #[serde(default = "one")]
    pub base: f64,
    #[serde(default = "one_usize")]
    pub mode: usize,
    #[serde(default = "default_prep")]
    pub momentum: MomentumPrep,
    #[serde(default)]
    pub seed: u64,
    /// Amplitude of the random momentum perturbation.
    #[serde(default)]
    pub size: f64,
}

fn default_profile() -> String {
    "cosine".into()
}

fn default_prep() -> MomentumPrep {
    MomentumPrep::Equilibrium
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub eps: Vec<f64>,
    pub workers: Option<usize>,
    /// Also run a doubled-step companion per ε to measure the discretization
    /// error of the stability inequality.
    #[serde(default)]
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir(), cadence: default_cadence() }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_cadence() -> usize {
    100
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        TorusGrid::new(self.grid.dim, self.grid.n, self.grid.length).map_err(|e| cfg_err(e.to_string()))?;
        let law = GammaLaw::new(self.model.k, self.model.gamma).map_err(|e| cfg_err(e.to_string()))?;
        let _ = law;
        match self.model.variant {
            ModelVariant::Euler => {}
            ModelVariant::EulerPoisson => {
                let c_x = self.model.c_x.ok_or_else(|| cfg_err("euler_poisson needs model.c_x"))?;
                let beta = self.model.beta.ok_or_else(|| cfg_err("euler_poisson needs model.beta"))?;
                if !(c_x > 0.0) || !(beta >= 0.0) {
                    return Err(cfg_err("need c_x > 0 and beta >= 0"));
                }
            }
            ModelVariant::EulerKorteweg => {
                let ck = self.model.c_kappa.ok_or_else(|| cfg_err("euler_korteweg needs model.c_kappa"))?;
                if !(ck > 0.0) {
                    return Err(cfg_err("need c_kappa > 0"));
                }
            }
        }
        if self.model.confinement.is_some() && self.model.variant != ModelVariant::Euler {
            return Err(cfg_err("confinement is only available for the euler variant"));
        }
        if !(self.time.t_final > 0.0 && self.time.t_final.is_finite()) {
            return Err(cfg_err("time.t_final must be positive"));
        }
        if !(self.time.cfl_safety > 0.0 && self.time.cfl_safety <= 1.0) {
            return Err(cfg_err("time.cfl_safety must lie in (0, 1]"));
        }
        if self.time.scheme != Scheme::ImexIntegratingFactor {
            return Err(cfg_err("time.scheme must be imex_integrating_factor"));
        }
        if self.time.limit_scheme == Some(Scheme::ImexIntegratingFactor) {
            return Err(cfg_err("time.limit_scheme must be explicit_rk4 or semi_implicit_spectral"));
        }
        for (name, v) in [("time.dt", self.time.dt), ("time.limit_dt", self.time.limit_dt), ("time.epsilon", self.time.epsilon), ("time.stiffness", self.time.stiffness)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(cfg_err(format!("{name} must be positive")));
                }
            }
        }
        if self.effective_limit_scheme() == Scheme::SemiImplicitSpectral && self.time.limit_dt.is_none() {
            return Err(cfg_err("the semi-implicit limit scheme needs time.limit_dt"));
        }
        if self.initial.profile != "cosine" {
            return Err(cfg_err(format!("unknown initial profile '{}'", self.initial.profile)));
        }
        if !(self.initial.base > 0.0) || !(self.initial.amplitude.abs() < self.initial.base) {
            return Err(cfg_err("initial profile must stay positive: need |amplitude| < base"));
        }
        if self.initial.mode == 0 {
            return Err(cfg_err("initial.mode must be >= 1"));
        }
        if self.initial.momentum == MomentumPrep::Perturbed && !(self.initial.size >= 0.0) {
            return Err(cfg_err("initial.size must be >= 0"));
        }
        if self.sweep.eps.iter().any(|e| !(*e > 0.0)) {
            return Err(cfg_err("sweep.eps entries must be positive"));
        }
        if self.sweep.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(cfg_err("sweep.eps must be strictly decreasing"));
        }
        if self.sweep.workers == Some(0) {
            return Err(cfg_err("sweep.workers must be >= 1"));
        }
        if self.output.cadence == 0 {
            return Err(cfg_err("output.cadence must be >= 1"));
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<Arc<TorusGrid>> {
        TorusGrid::new(self.grid.dim, self.grid.n, self.grid.length)
    }

    pub fn build_model(&self, grid: &Arc<TorusGrid>) -> Result<EnergyModel> {
        let law = GammaLaw::new(self.model.k, self.model.gamma)?;
        match self.model.variant {
            ModelVariant::Euler => match &self.model.confinement {
                None => Ok(EnergyModel::euler(law)),
                Some(c) => {
                    let w = 2.0 * PI * c.mode as f64 / grid.length();
                    let v = ScalarField::from_fn(grid, |x| c.amplitude * x.iter().map(|xi| (w * xi).cos()).product::<f64>());
                    EnergyModel::euler_confined(law, v)
                }
            },
            ModelVariant::EulerPoisson => EnergyModel::euler_poisson(
                law,
                self.model.c_x.unwrap_or_default(),
                self.model.beta.unwrap_or_default(),
            ),
            ModelVariant::EulerKorteweg => EnergyModel::euler_korteweg(law, self.model.c_kappa.unwrap_or_default()),
        }
    }

    pub fn effective_limit_scheme(&self) -> Scheme {
        self.time.limit_scheme.unwrap_or(match self.model.variant {
            ModelVariant::EulerKorteweg => Scheme::SemiImplicitSpectral,
            _ => Scheme::ExplicitRk4,
        })
    }

    /// Relaxation step control at `eps`: `dt` is capped by `time.dt` and `stiffness·ε²`.
    pub fn relax_control(&self, eps: f64) -> Result<StepControl> {
        let cap = self.time.stiffness.map_or(f64::INFINITY, |z| z * eps * eps);
        Ok(StepControl::new(self.time.dt.unwrap_or(f64::INFINITY).min(cap), self.time.cfl_safety, self.time.scheme)?
            .with_rho_min(self.time.rho_min))
    }

    pub fn limit_control(&self) -> Result<StepControl> {
        Ok(StepControl::new(self.time.limit_dt.unwrap_or(f64::INFINITY), self.time.cfl_safety, self.effective_limit_scheme())?
            .with_rho_min(self.time.rho_min))
    }

    /// `ε` for single runs: `time.epsilon`, else the first sweep entry.
    pub fn single_epsilon(&self) -> Result<f64> {
        self.time
            .epsilon
            .or_else(|| self.sweep.eps.first().copied())
            .ok_or_else(|| cfg_err("set time.epsilon or sweep.eps"))
    }

    pub fn workers(&self) -> usize {
        self.sweep.workers.unwrap_or(1)
    }
}

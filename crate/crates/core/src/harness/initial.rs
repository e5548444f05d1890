//! Initial-data library.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, MomentumPrep};
use crate::dynamics::{self, LimitState, RelaxState};
use crate::energetics::{self, EnergyModel};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Spectral, TorusGrid, VectorField};

/// Highest mode of the random momentum perturbation.
const PERTURBATION_MODES: i64 = 4;

/// Initial density and momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub rho: ScalarField,
    pub m: VectorField,
}

impl InitialData {
    pub fn relax_state(&self) -> Result<RelaxState> {
        RelaxState::new(self.rho.clone(), self.m.clone(), 0.0)
    }

    pub fn limit_state(&self) -> Result<LimitState> {
        LimitState::new(self.rho.clone(), 0.0)
    }
}

/// `base + amplitude·Π cos(mode·2πx_i/L)`.
pub fn cosine_profile(grid: &Arc<TorusGrid>, base: f64, amplitude: f64, mode: usize) -> Result<ScalarField> {
    if !(base > 0.0) || !(amplitude.abs() < base) {
        return Err(Error::NonPositiveDensity { index: 0, value: base - amplitude.abs() });
    }
    let w = 2.0 * PI * mode as f64 / grid.length();
    let rho = ScalarField::from_fn(grid, |x| base + amplitude * x.iter().map(|xi| (w * xi).cos()).product::<f64>());
    energetics::check_positive(&rho)?;
    Ok(rho)
}

/// Smooth random field with modes `|j|_∞ ≤ 4`, scaled to unit max-norm.
pub fn random_smooth_field(grid: &Arc<TorusGrid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let w = 2.0 * PI / grid.length();
    let modes: Vec<[i64; 2]> = if grid.dim() == 1 {
        (1..=PERTURBATION_MODES).map(|j| [j, 0]).collect()
    } else {
        let r = -PERTURBATION_MODES..=PERTURBATION_MODES;
        r.clone()
            .flat_map(|a| r.clone().map(move |b| [a, b]))
            .filter(|j| j[0] > 0 || (j[0] == 0 && j[1] > 0))
            .collect()
    };
    let coeffs: Vec<(f64, f64)> = modes.iter().map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let f = ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .zip(&coeffs)
            .map(|(j, (a, b))| {
                let phase = w * (j[0] as f64 * x[0] + if x.len() > 1 { j[1] as f64 * x[1] } else { 0.0 });
                a * phase.cos() + b * phase.sin()
            })
            .sum()
    });
    let s = f.max_abs();
    if s > 0.0 {
        f.scale(1.0 / s)
    } else {
        f
    }
}

/// Builds `(ρ₀, m₀)`; the equilibrium prep uses `m̄(ρ₀, ε)`, the perturbed prep
/// adds `size` times a seeded smooth field to each momentum component.
pub fn make_initial(config: &ExperimentConfig, model: &EnergyModel, eps: f64, sp: &Spectral) -> Result<InitialData> {
    let grid = config.build_grid()?;
    let ini = &config.initial;
    let rho = cosine_profile(&grid, ini.base, ini.amplitude, ini.mode)?;
    let m = match ini.momentum {
        MomentumPrep::Zero => VectorField::zeros(&grid),
        MomentumPrep::Equilibrium => dynamics::equilibrium_momentum(model, &rho, eps, sp)?,
        MomentumPrep::Perturbed => {
            let base = dynamics::equilibrium_momentum(model, &rho, eps, sp)?;
            let mut rng = ChaCha8Rng::seed_from_u64(ini.seed);
            let comps = base
                .components()
                .iter()
                .map(|c| c + &random_smooth_field(&grid, &mut rng).scale(ini.size))
                .collect();
            VectorField::new(comps)?
        }
    };
    Ok(InitialData { rho, m })
}

//! Single runs: `simulate` and `identity`.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::config::ExperimentConfig;
use super::initial::{cosine_profile, make_initial};
use super::sweep::{refine_inequality, run_coupled, CoupledOptions};
use crate::dynamics::{self, LimitState, RelaxState, Scheme};
use crate::error::Result;
use crate::field::Spectral;
use crate::relent;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub model: String,
    pub epsilon: f64,
    pub relax_steps: usize,
    pub limit_steps: usize,
    pub relax_mass_drift: f64,
    pub limit_mass_drift: f64,
    pub max_energy_increase: f64,
    pub max_energy_residual: f64,
    pub sup_value: f64,
    pub pass: bool,
}

/// Relaxation run with the limit co-integrated. Writes the series, the limit
/// series, the inequality scan, checkpoints every `cadence` steps and `simulate.json`.
pub fn simulate(config: &ExperimentConfig, out: &Path) -> Result<SimulateSummary> {
    let grid = config.build_grid()?;
    let sp = Spectral::new(&grid);
    let model = config.build_model(&grid)?;
    let eps = config.single_epsilon()?;
    let init = make_initial(config, &model, eps, &sp)?;
    let opts = CoupledOptions::from_config(config, eps)?;
    let run = run_coupled(&model, init.relax_state()?, init.limit_state()?, eps, &opts, &sp)?;
    run.write_outputs(out)?;
    for (i, (r, _)) in run.snapshots.iter().enumerate() {
        dynamics::write_checkpoint(&out.join(format!("checkpoint_{i:04}")), &model, r, eps, i * opts.cadence)?;
    }
    let summary = SimulateSummary {
        model: model.name().into(),
        epsilon: eps,
        relax_steps: run.relax_steps,
        limit_steps: run.limit_steps,
        relax_mass_drift: run.relax_mass_drift(),
        limit_mass_drift: run.limit_mass_drift(),
        max_energy_increase: run.max_energy_increase(),
        max_energy_residual: run.max_energy_residual(),
        sup_value: run.sup_value,
        pass: run.relax_mass_drift() <= 1e-10 && run.limit_mass_drift() <= 1e-10 && run.max_energy_increase() <= 1e-12,
    };
    fs::write(out.join("simulate.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Snapshot budget of the identity runs.
const MAX_SNAPSHOTS: f64 = 2000.0;

fn snapshot_cadence(steps: f64) -> usize {
    (steps / MAX_SNAPSHOTS).ceil().max(1.0) as usize
}

/// Relative size of the mode-2 offset of the second solution in `identity`.
const SECOND_SOLUTION_OFFSET: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySummary {
    pub model: String,
    pub epsilon: f64,
    /// Max per-interval relaxation identity imbalance over max |rate|.
    pub relax_identity_relative: f64,
    pub inequality: Value,
    pub gradflow_integrated_imbalance: f64,
    pub gradflow_integrated_dissipation: f64,
    pub pass: bool,
}

/// Evaluates the relative energy identities: relaxation against relaxation,
/// relaxation against limit (stability inequality), and limit against limit.
/// The second solution adds a mode-2 cosine of a quarter of the configured amplitude.
pub fn identity(config: &ExperimentConfig, out: &Path) -> Result<IdentitySummary> {
    let grid = config.build_grid()?;
    let sp = Spectral::new(&grid);
    let model = config.build_model(&grid)?;
    let eps = config.single_epsilon()?;
    let init = make_initial(config, &model, eps, &sp)?;
    let ini = &config.initial;
    let offset = cosine_profile(&grid, 1.0, SECOND_SOLUTION_OFFSET * ini.amplitude, 2 * ini.mode)?;
    let rho_b = &init.rho + &(&offset - &crate::field::ScalarField::constant(&grid, 1.0));
    let m_b = dynamics::equilibrium_momentum(&model, &rho_b, eps, &sp)?;
    let relax_ctl = config.relax_control(eps)?;
    let limit_ctl = config.limit_control()?;
    let t = config.time.t_final;

    let relax0 = init.relax_state()?;
    let dt0 = dynamics::cfl_dt(&model, &relax0, eps, relax_ctl.cfl_safety, relax_ctl.rho_min)?.min(relax_ctl.dt);
    let cadence = snapshot_cadence(t / dt0);
    let ra = dynamics::run_relax(&model, relax0, eps, t, &relax_ctl, cadence, &sp).map_err(|e| e.error)?;
    // The second run replays the first one's step sizes so snapshots share times.
    let dts: Vec<f64> = ra.series.windows(2).map(|w| w[1].t - w[0].t).collect();
    let mut state = RelaxState::new(rho_b.clone(), m_b, 0.0)?;
    let mut snaps = vec![state.clone()];
    for (i, dt) in dts.iter().enumerate() {
        state = dynamics::step_relax(&state, *dt, &relax_ctl, eps, &model, &sp)?;
        state.time = ra.series[i + 1].t;
        if (i + 1) % cadence == 0 || i + 1 == dts.len() {
            snaps.push(state.clone());
        }
    }
    let rb = dynamics::Trajectory { model: model.clone(), epsilon: Some(eps), snapshots: snaps, series: vec![], steps: dts.len() };
    let residuals = relent::reltote_residual(&ra, &rb, &model, eps, &sp)?;
    let rate_scale = ra
        .snapshots
        .iter()
        .zip(&rb.snapshots)
        .map(|(a, b)| relent::identity_sample(&model, a, b, eps, &sp).map(|s| s.rate().abs()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let relax_identity_relative = residuals.iter().fold(0.0, |m: f64, v| m.max(*v)) / rate_scale.max(f64::MIN_POSITIVE);

    let opts = CoupledOptions::from_config(config, eps)?;
    let coupled = run_coupled(&model, init.relax_state()?, init.limit_state()?, eps, &opts, &sp)?;
    let refined = refine_inequality(&model, &coupled, init.relax_state()?, init.limit_state()?, &opts, &sp)?;
    fs::create_dir_all(out)?;
    coupled.inequality.write_csv(&out.join("inequality.csv"))?;

    let limit0 = init.limit_state()?;
    let mut ldt = limit_ctl.dt;
    if limit_ctl.scheme == Scheme::ExplicitRk4 {
        ldt = ldt.min(dynamics::limit_dt_bound(&model, &limit0.rho, limit_ctl.cfl_safety));
    }
    let lcad = snapshot_cadence(t / ldt);
    let la = dynamics::run_limit(&model, limit0, t, &limit_ctl, lcad, &sp).map_err(|e| e.error)?;
    let mut lstate = LimitState::new(rho_b, 0.0)?;
    let mut lsnaps = vec![lstate.clone()];
    for (i, w) in la.series.windows(2).enumerate() {
        lstate = dynamics::step_limit(&lstate, w[1].t - w[0].t, &limit_ctl, &model, &sp)?;
        lstate.time = w[1].t;
        if (i + 1) % lcad == 0 || i + 2 == la.series.len() {
            lsnaps.push(lstate.clone());
        }
    }
    let lb = dynamics::Trajectory { model: model.clone(), epsilon: None, snapshots: lsnaps, series: vec![], steps: la.steps };
    let gf = relent::gradflow_relent_residual(&la, &lb, &model, &sp)?;

    let pass = relax_identity_relative <= 1e-2
        && refined.holds
        && gf.integrated_imbalance <= 0.01 * gf.integrated_dissipation;
    let summary = IdentitySummary {
        model: model.name().into(),
        epsilon: eps,
        relax_identity_relative,
        inequality: refined.summary_json(),
        gradflow_integrated_imbalance: gf.integrated_imbalance,
        gradflow_integrated_dissipation: gf.integrated_dissipation,
        pass,
    };
    fs::write(out.join("identity.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::{cfl_dt, limit_dt_bound, step_limit, step_relax, LimitState, RelaxState, Scheme, StepControl};
use crate::energetics::{self, EnergyModel};
use crate::error::{Error, Result};
use crate::field::Spectral;

/// Per-step diagnostics. `phi`/`psi` are NaN unless a reference state is attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub mass: f64,
    pub total_energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub dissipation: f64,
    pub phi: f64,
    pub psi: f64,
    /// Imbalance of the energy balance over the interval ending at `t`.
    pub energy_residual: f64,
}

impl DiagnosticRow {
    pub const CSV_HEADER: &'static str =
        "t,mass,total_energy,kinetic,potential,dissipation,phi,psi,energy_residual";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.t,
            self.mass,
            self.total_energy,
            self.kinetic,
            self.potential,
            self.dissipation,
            self.phi,
            self.psi,
            self.energy_residual
        )
    }
}

/// Time-ordered snapshots plus a per-step diagnostic series.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub model: EnergyModel,
    pub epsilon: Option<f64>,
    pub snapshots: Vec<S>,
    pub series: Vec<DiagnosticRow>,
    pub steps: usize,
}

pub type RelaxTrajectory = Trajectory<RelaxState>;
pub type LimitTrajectory = Trajectory<LimitState>;

impl<S> Trajectory<S> {
    pub fn write_series_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(DiagnosticRow::CSV_HEADER);
        out.push('\n');
        for r in &self.series {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// `max |mass(t) - mass(0)| / mass(0)` over the series.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.series.first().map_or(1.0, |r| r.mass);
        self.series.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(0.0, f64::max)
    }
}

/// A failed run with everything computed before the failure.
#[derive(Debug, Clone)]
pub struct RunFailure<S> {
    pub partial: Trajectory<S>,
    pub error: Error,
}

impl<S> std::fmt::Display for RunFailure<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted after {} steps: {}", self.partial.steps, self.error)
    }
}

pub(crate) fn relax_row(model: &EnergyModel, s: &RelaxState, eps: f64, rho_min: f64, sp: &Spectral) -> Result<DiagnosticRow> {
    let kinetic = energetics::kinetic_energy_floor(&s.rho, &s.m, rho_min)?;
    let potential = model.potential_energy(&s.rho, sp)?;
    Ok(DiagnosticRow {
        t: s.time,
        mass: s.rho.integral(),
        total_energy: potential + kinetic,
        kinetic,
        potential,
        dissipation: 2.0 * kinetic / (eps * eps),
        phi: f64::NAN,
        psi: f64::NAN,
        energy_residual: 0.0,
    })
}

/// `∫ρ|∇(δE/δρ)|²`.
pub(crate) fn limit_dissipation(model: &EnergyModel, rho: &crate::field::ScalarField, sp: &Spectral) -> Result<f64> {
    let mu = model.variational_derivative(rho, sp)?;
    Ok(sp.gradient(&mu).norm_sq().inner(rho))
}

pub(crate) fn limit_row(model: &EnergyModel, s: &LimitState, sp: &Spectral) -> Result<DiagnosticRow> {
    let potential = model.potential_energy(&s.rho, sp)?;
    Ok(DiagnosticRow {
        t: s.time,
        mass: s.rho.integral(),
        total_energy: potential,
        kinetic: 0.0,
        potential,
        dissipation: limit_dissipation(model, &s.rho, sp)?,
        phi: f64::NAN,
        psi: f64::NAN,
        energy_residual: 0.0,
    })
}

pub(crate) fn interval_residual(prev: &DiagnosticRow, next: &DiagnosticRow) -> f64 {
    let dt = next.t - prev.t;
    ((next.total_energy - prev.total_energy) / dt + 0.5 * (prev.dissipation + next.dissipation)).abs()
}

fn validate_run(t_final: f64, start: f64, cadence: usize) -> Result<()> {
    if !(t_final.is_finite() && t_final > start) {
        return Err(Error::InvalidParameter(format!("final time {t_final} must exceed start {start}")));
    }
    if cadence == 0 {
        return Err(Error::InvalidParameter("snapshot cadence must be >= 1".into()));
    }
    Ok(())
}

/// Integrates the relaxation system to `t_final`, storing a snapshot every
/// `cadence` steps (and the final state) and diagnostics every step.
pub fn run_relax(
    model: &EnergyModel,
    initial: RelaxState,
    eps: f64,
    t_final: f64,
    control: &StepControl,
    cadence: usize,
    sp: &Spectral,
) -> std::result::Result<RelaxTrajectory, Box<RunFailure<RelaxState>>> {
    let mut traj = Trajectory { model: model.clone(), epsilon: Some(eps), snapshots: vec![], series: vec![], steps: 0 };
    let fail = |traj: Trajectory<RelaxState>, error: Error| Box::new(RunFailure { partial: traj, error });
    if let Err(e) = validate_run(t_final, initial.time, cadence) {
        return Err(fail(traj, e));
    }
    let row = match relax_row(model, &initial, eps, control.rho_min, sp) {
        Ok(r) => r,
        Err(e) => return Err(fail(traj, e)),
    };
    traj.series.push(row);
    traj.snapshots.push(initial.clone());
    let mut state = initial;
    let tol = 1e-12 * t_final.abs().max(1.0);
    while state.time < t_final - tol {
        let step = (|| -> Result<RelaxState> {
            let bound = cfl_dt(model, &state, eps, control.cfl_safety, control.rho_min)?;
            let dt = control.dt.min(bound).min(t_final - state.time);
            let mut next = step_relax(&state, dt, control, eps, model, sp)?;
            if (t_final - next.time).abs() <= tol {
                next.time = t_final;
            }
            Ok(next)
        })();
        let next = match step {
            Ok(s) => s,
            Err(e) => {
                traj.snapshots.push(state);
                return Err(fail(traj, e));
            }
        };
        let mut row = match relax_row(model, &next, eps, control.rho_min, sp) {
            Ok(r) => r,
            Err(e) => {
                traj.snapshots.push(next);
                return Err(fail(traj, e));
            }
        };
        row.energy_residual = interval_residual(traj.series.last().expect("initial row"), &row);
        traj.series.push(row);
        traj.steps += 1;
        state = next;
        if traj.steps % cadence == 0 {
            traj.snapshots.push(state.clone());
        }
    }
    if traj.snapshots.last().map(|s| s.time) != Some(state.time) {
        traj.snapshots.push(state);
    }
    Ok(traj)
}

/// Integrates the gradient flow to `t_final`; steps are `min(dt, stability bound)`
/// for RK4 and `dt` for the semi-implicit scheme.
pub fn run_limit(
    model: &EnergyModel,
    initial: LimitState,
    t_final: f64,
    control: &StepControl,
    cadence: usize,
    sp: &Spectral,
) -> std::result::Result<LimitTrajectory, Box<RunFailure<LimitState>>> {
    let mut traj = Trajectory { model: model.clone(), epsilon: None, snapshots: vec![], series: vec![], steps: 0 };
    let fail = |traj: Trajectory<LimitState>, error: Error| Box::new(RunFailure { partial: traj, error });
    if let Err(e) = validate_run(t_final, initial.time, cadence) {
        return Err(fail(traj, e));
    }
    match limit_row(model, &initial, sp) {
        Ok(r) => traj.series.push(r),
        Err(e) => return Err(fail(traj, e)),
    }
    traj.snapshots.push(initial.clone());
    let mut state = initial;
    let tol = 1e-12 * t_final.abs().max(1.0);
    while state.time < t_final - tol {
        let mut dt = control.dt.min(t_final - state.time);
        if control.scheme == Scheme::ExplicitRk4 {
            dt = dt.min(limit_dt_bound(model, &state.rho, control.cfl_safety));
        }
        let next = match step_limit(&state, dt, control, model, sp).and_then(|mut n| {
            if (t_final - n.time).abs() <= tol {
                n.time = t_final;
            }
            let row = limit_row(model, &n, sp)?;
            Ok((n, row))
        }) {
            Ok(v) => v,
            Err(e) => {
                traj.snapshots.push(state);
                return Err(fail(traj, e));
            }
        };
        let (next, mut row) = next;
        row.energy_residual = interval_residual(traj.series.last().expect("initial row"), &row);
        traj.series.push(row);
        traj.steps += 1;
        state = next;
        if traj.steps % cadence == 0 {
            traj.snapshots.push(state.clone());
        }
    }
    if traj.snapshots.last().map(|s| s.time) != Some(state.time) {
        traj.snapshots.push(state);
    }
    Ok(traj)
}

fn check_series<S>(traj: &Trajectory<S>) -> Result<()> {
    if traj.series.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(Error::Mismatch("series times must increase strictly".into()));
    }
    Ok(())
}

/// Per-interval `|Δ(E+K)/Δt + ½(D₀ + D₁)|` with `D = ε⁻²∫ρ|u|²`.
pub fn energy_dissipation_residual(traj: &RelaxTrajectory, eps: f64) -> Result<Vec<f64>> {
    match traj.epsilon {
        Some(e) if e == eps => {}
        _ => return Err(Error::Mismatch(format!("trajectory epsilon {:?} differs from {eps}", traj.epsilon))),
    }
    check_series(traj)?;
    Ok(traj.series.windows(2).map(|w| interval_residual(&w[0], &w[1])).collect())
}

/// Per-interval `|ΔE/Δt + ½(D₀ + D₁)|` with `D = ∫ρ|∇(δE/δρ)|²`.
pub fn limit_dissipation_residual(traj: &LimitTrajectory) -> Result<Vec<f64>> {
    check_series(traj)?;
    Ok(traj.series.windows(2).map(|w| interval_residual(&w[0], &w[1])).collect())
}

/// Writes `rho.csv`, `m<i>.csv` and `meta.json` for a relaxation state.
pub fn write_checkpoint(dir: &Path, model: &EnergyModel, state: &RelaxState, eps: f64, step: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    state.rho.write_csv(&dir.join("rho.csv"))?;
    for (i, c) in state.m.components().iter().enumerate() {
        c.write_csv(&dir.join(format!("m{i}.csv")))?;
    }
    let meta = json!({
        "model": model.name(),
        "parameters": model.parameters_json(),
        "epsilon": eps,
        "time": state.time,
        "step": step,
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

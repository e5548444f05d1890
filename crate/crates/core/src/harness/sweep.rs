//! Relaxation runs co-integrated with the limit flow, and the ε-sweep.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::fit::{slope_fit, SlopeFit};
use super::initial::make_initial;
use crate::dynamics::{
    self, cfl_dt, limit_dt_bound, step_limit, step_relax, DiagnosticRow, LimitState, RelaxState, Scheme, StepControl,
};
use crate::energetics::EnergyModel;
use crate::error::{Error, Result};
use crate::field::Spectral;
use crate::relent::{inequality_sample, InequalityAccumulator, InequalityReport};

/// Accepted range of the fitted rate and minimum r² for a passing sweep.
pub const SLOPE_RANGE: (f64, f64) = (3.5, 4.5);
pub const MIN_R2: f64 = 0.98;

/// Settings of one co-integrated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledOptions {
    pub t_final: f64,
    /// Snapshot pairs are kept every `cadence` relaxation steps (and at the end).
    pub cadence: usize,
    pub relax: StepControl,
    pub limit: StepControl,
}

impl CoupledOptions {
    pub fn from_config(config: &ExperimentConfig, eps: f64) -> Result<Self> {
        Ok(Self {
            t_final: config.time.t_final,
            cadence: config.output.cadence,
            relax: config.relax_control(eps)?,
            limit: config.limit_control()?,
        })
    }
}

/// A relaxation run and the limit flow advanced in lockstep, so the stability
/// inequality is evaluated at every relaxation step.
#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub epsilon: f64,
    /// Relaxation diagnostics; `phi` and `psi` are measured against the limit.
    pub relax_series: Vec<DiagnosticRow>,
    /// Limit-flow diagnostics at the relaxation step times.
    pub limit_series: Vec<DiagnosticRow>,
    pub inequality: InequalityReport,
    /// `sup_t Ψ` for Euler–Korteweg, `sup_t Φ` otherwise.
    pub sup_value: f64,
    pub snapshots: Vec<(RelaxState, LimitState)>,
    pub relax_steps: usize,
    pub limit_steps: usize,
}

fn drift(series: &[DiagnosticRow]) -> f64 {
    let m0 = series.first().map_or(1.0, |r| r.mass);
    series.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(0.0, f64::max)
}

impl CoupledRun {
    pub fn relax_mass_drift(&self) -> f64 {
        drift(&self.relax_series)
    }

    pub fn limit_mass_drift(&self) -> f64 {
        drift(&self.limit_series)
    }

    /// Largest relative step-to-step increase of `E + K` (negative when strictly decreasing).
    pub fn max_energy_increase(&self) -> f64 {
        self.relax_series
            .windows(2)
            .map(|w| (w[1].total_energy - w[0].total_energy) / w[0].total_energy.abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_energy_residual(&self) -> f64 {
        self.relax_series.iter().map(|r| r.energy_residual).fold(0.0, f64::max)
    }

    pub fn summary_json(&self) -> Value {
        json!({
            "epsilon": self.epsilon,
            "sup_value": self.sup_value,
            "relax_steps": self.relax_steps,
            "limit_steps": self.limit_steps,
            "relax_mass_drift": self.relax_mass_drift(),
            "limit_mass_drift": self.limit_mass_drift(),
            "max_energy_increase": self.max_energy_increase(),
            "max_energy_residual": self.max_energy_residual(),
            "inequality": self.inequality.summary_json(),
        })
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_series(&dir.join("series.csv"), &self.relax_series)?;
        write_series(&dir.join("limit_series.csv"), &self.limit_series)?;
        self.inequality.write_csv(&dir.join("inequality.csv"))?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary_json())?)?;
        Ok(())
    }
}

pub fn write_series(path: &Path, series: &[DiagnosticRow]) -> Result<()> {
    let mut out = String::from(DiagnosticRow::CSV_HEADER);
    out.push('\n');
    for r in series {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn limit_step_cap(model: &EnergyModel, rho: &crate::field::ScalarField, control: &StepControl) -> f64 {
    match control.scheme {
        Scheme::ExplicitRk4 => control.dt.min(limit_dt_bound(model, rho, control.cfl_safety)),
        _ => control.dt,
    }
}

/// Advances `(relax, limit)` to `t_final`. Each relaxation step uses
/// `min(dt, CFL)`; the limit covers the same interval with equal substeps.
pub fn run_coupled(
    model: &EnergyModel,
    relax0: RelaxState,
    limit0: LimitState,
    eps: f64,
    opts: &CoupledOptions,
    sp: &Spectral,
) -> Result<CoupledRun> {
    coupled(model, relax0, limit0, eps, opts, sp, None)
}

/// As [`run_coupled`] but with a prescribed sequence of relaxation steps
/// (`opts.t_final`, `opts.relax.dt` and the CFL bound are not consulted).
pub fn run_coupled_steps(
    model: &EnergyModel,
    relax0: RelaxState,
    limit0: LimitState,
    eps: f64,
    opts: &CoupledOptions,
    sp: &Spectral,
    steps: &[f64],
) -> Result<CoupledRun> {
    if steps.is_empty() || steps.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidParameter("step sequence must be nonempty and positive".into()));
    }
    let t_final = relax0.time + steps.iter().sum::<f64>();
    coupled(model, relax0, limit0, eps, &CoupledOptions { t_final, ..*opts }, sp, Some(steps))
}

fn coupled(
    model: &EnergyModel,
    relax0: RelaxState,
    limit0: LimitState,
    eps: f64,
    opts: &CoupledOptions,
    sp: &Spectral,
    steps: Option<&[f64]>,
) -> Result<CoupledRun> {
    if (relax0.time - limit0.time).abs() > 0.0 {
        return Err(Error::Mismatch("relaxation and limit start at different times".into()));
    }
    if !(opts.t_final > relax0.time) || opts.cadence == 0 {
        return Err(Error::InvalidParameter("need t_final > start and cadence >= 1".into()));
    }
    if opts.limit.scheme == Scheme::ImexIntegratingFactor {
        return Err(Error::InvalidParameter("the limit flow needs explicit_rk4 or semi_implicit_spectral".into()));
    }
    let rho_min = opts.relax.rho_min;
    let row_pair = |r: &RelaxState, l: &LimitState| -> Result<(DiagnosticRow, DiagnosticRow, crate::relent::InequalitySample)> {
        let sample = inequality_sample(model, r, &l.rho, eps, rho_min, sp)?;
        let mut rr = dynamics::relax_row(model, r, eps, rho_min, sp)?;
        rr.phi = sample.phi;
        rr.psi = if matches!(model, EnergyModel::EulerKorteweg { .. }) { sample.lhs } else { sample.phi };
        let lr = dynamics::limit_row(model, l, sp)?;
        Ok((rr, lr, sample))
    };
    let sup_of = |s: &crate::relent::InequalitySample| {
        if matches!(model, EnergyModel::EulerKorteweg { .. }) {
            s.lhs
        } else {
            s.phi
        }
    };

    let (rr, lr, s0) = row_pair(&relax0, &limit0)?;
    let mut sup_value = sup_of(&s0);
    let mut acc = InequalityAccumulator::new(s0);
    let mut relax_series = vec![rr];
    let mut limit_series = vec![lr];
    let mut snapshots = vec![(relax0.clone(), limit0.clone())];
    let (mut relax, mut limit) = (relax0, limit0);
    let (mut relax_steps, mut limit_steps) = (0usize, 0usize);
    let tol = 1e-12 * opts.t_final.abs().max(1.0);
    let mut prescribed = steps.map(|s| s.iter());
    loop {
        let dt = match prescribed.as_mut() {
            Some(it) => match it.next() {
                Some(h) => *h,
                None => break,
            },
            None => {
                if relax.time >= opts.t_final - tol {
                    break;
                }
                let bound = cfl_dt(model, &relax, eps, opts.relax.cfl_safety, rho_min)?;
                opts.relax.dt.min(bound).min(opts.t_final - relax.time)
            }
        };
        let mut next = step_relax(&relax, dt, &opts.relax, eps, model, sp)?;
        if (opts.t_final - next.time).abs() <= tol {
            next.time = opts.t_final;
        }
        let cap = limit_step_cap(model, &limit.rho, &opts.limit);
        let subs = ((dt / cap) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = dt / subs as f64;
        for _ in 0..subs {
            limit = step_limit(&limit, h, &opts.limit, model, sp)?;
        }
        limit.time = next.time;
        limit_steps += subs;
        relax = next;
        relax_steps += 1;

        let (mut rr, mut lr, sample) = row_pair(&relax, &limit)?;
        rr.energy_residual = dynamics::interval_residual(relax_series.last().expect("initial row"), &rr);
        lr.energy_residual = dynamics::interval_residual(limit_series.last().expect("initial row"), &lr);
        sup_value = sup_value.max(sup_of(&sample));
        acc.push(sample);
        relax_series.push(rr);
        limit_series.push(lr);
        if relax_steps % opts.cadence == 0 || relax.time >= opts.t_final - tol {
            snapshots.push((relax.clone(), limit.clone()));
        }
    }
    Ok(CoupledRun {
        epsilon: eps,
        relax_series,
        limit_series,
        inequality: InequalityReport::from_rows(model, eps, acc.into_rows()),
        sup_value,
        snapshots,
        relax_steps,
        limit_steps,
    })
}

/// One output time of a dt-refinement scan of the stability inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedRow {
    pub t: f64,
    /// `LHS - RHS` of the fine run.
    pub imbalance: f64,
    /// `LHS - RHS` of the companion run with doubled steps.
    pub coarse_imbalance: f64,
    /// Quadrature tolerance of the fine run.
    pub quadrature_tolerance: f64,
    /// `quadrature_tolerance + |coarse_imbalance - imbalance|`.
    pub tolerance: f64,
    /// `LHS - RHS` with the dissipation integral removed from the RHS (fine run).
    pub ablated_imbalance: f64,
}

/// The stability inequality checked against a measured discretization error:
/// the time-discretization part of the imbalance is estimated by a companion
/// run with every step doubled (Richardson difference with order one, an upper
/// bound for any convergent scheme).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinedInequality {
    pub model: String,
    pub epsilon: f64,
    pub rows: Vec<RefinedRow>,
    /// `imbalance <= tolerance` at every compared time.
    pub holds: bool,
    /// `max imbalance / tolerance`.
    pub worst_ratio: f64,
    /// `imbalance <= quadrature_tolerance` at every compared time.
    pub holds_quadrature_only: bool,
    /// Some time with `|ablated_imbalance| > tolerance`.
    pub ablation_breaks_balance: bool,
    /// Some time with `ablated_imbalance > tolerance`.
    pub ablation_signed_violation: bool,
    /// Median of `log2(coarse_imbalance / imbalance)` over the final half of the run.
    pub observed_order: f64,
}

impl RefinedInequality {
    pub fn summary_json(&self) -> Value {
        json!({
            "model": self.model,
            "epsilon": self.epsilon,
            "holds": self.holds,
            "worst_ratio": self.worst_ratio,
            "holds_quadrature_only": self.holds_quadrature_only,
            "ablation_breaks_balance": self.ablation_breaks_balance,
            "ablation_signed_violation": self.ablation_signed_violation,
            "observed_order": self.observed_order,
            "compared_times": self.rows.len(),
        })
    }
}

/// Re-runs `fine` with its relaxation steps merged in pairs (and the limit step
/// caps doubled) and compares the inequality imbalance at the shared times.
pub fn refine_inequality(
    model: &EnergyModel,
    fine: &CoupledRun,
    relax0: RelaxState,
    limit0: LimitState,
    opts: &CoupledOptions,
    sp: &Spectral,
) -> Result<RefinedInequality> {
    let ts: Vec<f64> = fine.relax_series.iter().map(|r| r.t).collect();
    let dts: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    if dts.len() < 2 {
        return Err(Error::NoSamples("refinement needs at least two fine steps".into()));
    }
    let pairs: Vec<f64> = dts.chunks(2).map(|c| c.iter().sum()).collect();
    let fine_index: Vec<usize> = (0..=pairs.len()).map(|k| (2 * k).min(dts.len())).collect();
    let mut coarse_opts = *opts;
    coarse_opts.limit.dt *= 2.0;
    coarse_opts.limit.cfl_safety = (2.0 * coarse_opts.limit.cfl_safety).min(1.0);
    let coarse = run_coupled_steps(model, relax0, limit0, fine.epsilon, &coarse_opts, sp, &pairs)?;
    let rows: Vec<RefinedRow> = coarse
        .inequality
        .rows
        .iter()
        .zip(&fine_index)
        .map(|(c, &i)| {
            let f = &fine.inequality.rows[i];
            RefinedRow {
                t: f.t,
                imbalance: f.imbalance,
                coarse_imbalance: c.imbalance,
                quadrature_tolerance: f.tolerance,
                tolerance: f.tolerance + (c.imbalance - f.imbalance).abs(),
                ablated_imbalance: f.ablated_imbalance,
            }
        })
        .collect();
    let ratio = |v: f64, tol: f64| if tol > 0.0 { v / tol } else if v > 0.0 { f64::INFINITY } else { 0.0 };
    let mut orders: Vec<f64> = rows[rows.len() / 2..]
        .iter()
        .filter(|r| r.imbalance != 0.0 && r.coarse_imbalance / r.imbalance > 0.0)
        .map(|r| (r.coarse_imbalance / r.imbalance).log2())
        .collect();
    orders.sort_by(f64::total_cmp);
    Ok(RefinedInequality {
        model: model.name().into(),
        epsilon: fine.epsilon,
        holds: rows.iter().all(|r| r.imbalance <= r.tolerance),
        worst_ratio: rows.iter().map(|r| ratio(r.imbalance, r.tolerance)).fold(f64::NEG_INFINITY, f64::max),
        holds_quadrature_only: rows.iter().all(|r| r.imbalance <= r.quadrature_tolerance),
        ablation_breaks_balance: rows.iter().any(|r| r.ablated_imbalance.abs() > r.tolerance),
        ablation_signed_violation: rows.iter().any(|r| r.ablated_imbalance > r.tolerance),
        observed_order: orders.get(orders.len() / 2).copied().unwrap_or(f64::NAN),
        rows,
    })
}

/// A co-integrated run at one ε, with its optional refinement companion.
#[derive(Debug, Clone)]
pub struct PointRun {
    pub run: CoupledRun,
    pub refined: Option<RefinedInequality>,
}

/// Runs the configured experiment at one ε from the configured initial data;
/// with `sweep.refine` the doubled-step companion is run as well.
pub fn run_point(config: &ExperimentConfig, eps: f64) -> Result<PointRun> {
    let grid = config.build_grid()?;
    let sp = Spectral::new(&grid);
    let model = config.build_model(&grid)?;
    let init = make_initial(config, &model, eps, &sp)?;
    let opts = CoupledOptions::from_config(config, eps)?;
    let run = run_coupled(&model, init.relax_state()?, init.limit_state()?, eps, &opts, &sp)?;
    let refined = if config.sweep.refine {
        Some(refine_inequality(&model, &run, init.relax_state()?, init.limit_state()?, &opts, &sp)?)
    } else {
        None
    };
    Ok(PointRun { run, refined })
}

/// Result of one sweep point and its wall-clock seconds.
#[derive(Debug)]
pub struct PointOutcome {
    pub epsilon: f64,
    pub result: Result<PointRun>,
    pub wall_clock_s: f64,
}

/// One ε of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub ok: bool,
    pub error: Option<String>,
    pub sup_value: f64,
    pub relax_steps: usize,
    pub limit_steps: usize,
    pub relax_mass_drift: f64,
    pub limit_mass_drift: f64,
    pub max_energy_increase: f64,
    pub max_energy_residual: f64,
    pub inequality: Value,
    /// Summary of the refinement companion (null unless `sweep.refine`).
    pub refined_inequality: Value,
    pub wall_clock_s: f64,
}

/// Outcome of an ε-sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub model: String,
    /// `"phi"` or `"psi"`.
    pub quantity: String,
    pub eps: Vec<f64>,
    pub sup_phi: Vec<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
    /// `sup` values strictly decreasing along the ladder.
    pub monotone: bool,
    pub pass: bool,
    pub points: Vec<SweepPoint>,
    pub wall_clock_s: f64,
}

impl SweepReport {
    pub fn from_runs(model: &EnergyModel, runs: &[PointOutcome], wall_clock_s: f64) -> Self {
        let points: Vec<SweepPoint> = runs
            .iter()
            .map(|o| (o.epsilon, &o.result, o.wall_clock_s))
            .map(|(eps, r, wall)| match r {
                Ok(PointRun { run, refined, .. }) => SweepPoint {
                    epsilon: eps,
                    ok: true,
                    error: None,
                    sup_value: run.sup_value,
                    relax_steps: run.relax_steps,
                    limit_steps: run.limit_steps,
                    relax_mass_drift: run.relax_mass_drift(),
                    limit_mass_drift: run.limit_mass_drift(),
                    max_energy_increase: run.max_energy_increase(),
                    max_energy_residual: run.max_energy_residual(),
                    inequality: run.inequality.summary_json(),
                    refined_inequality: refined.as_ref().map_or(Value::Null, |r| r.summary_json()),
                    wall_clock_s: wall,
                },
                Err(e) => SweepPoint {
                    epsilon: eps,
                    ok: false,
                    error: Some(e.to_string()),
                    sup_value: f64::NAN,
                    relax_steps: 0,
                    limit_steps: 0,
                    relax_mass_drift: f64::NAN,
                    limit_mass_drift: f64::NAN,
                    max_energy_increase: f64::NAN,
                    max_energy_residual: f64::NAN,
                    inequality: Value::Null,
                    refined_inequality: Value::Null,
                    wall_clock_s: wall,
                },
            })
            .collect();
        let good: Vec<(f64, f64)> = points.iter().filter(|p| p.ok).map(|p| (p.epsilon, p.sup_value)).collect();
        let fit: Option<SlopeFit> = match slope_fit(&good) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("sweep slope fit failed: {e}");
                None
            }
        };
        let monotone = good.windows(2).all(|w| w[1].1 < w[0].1);
        let refined_ok = runs.iter().all(|o| match &o.result {
            Ok(p) => p.refined.as_ref().is_none_or(|r| r.holds),
            Err(_) => false,
        });
        let pass = points.iter().all(|p| p.ok)
            && refined_ok
            && monotone
            && fit.is_some_and(|f| f.slope >= SLOPE_RANGE.0 && f.slope <= SLOPE_RANGE.1 && f.r2 >= MIN_R2);
        let quantity = if matches!(model, EnergyModel::EulerKorteweg { .. }) { "psi" } else { "phi" };
        Self {
            model: model.name().to_string(),
            quantity: quantity.into(),
            eps: points.iter().map(|p| p.epsilon).collect(),
            sup_phi: points.iter().map(|p| p.sup_value).collect(),
            slope: fit.map(|f| f.slope),
            intercept: fit.map(|f| f.intercept),
            r2: fit.map(|f| f.r2),
            monotone,
            pass,
            points,
            wall_clock_s,
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:>10}  {:>14}  {:>8}  {:>10}\n", "eps", format!("sup {}", self.quantity), "steps", "wall [s]");
        for p in &self.points {
            if p.ok {
                out.push_str(&format!("{:>10.4e}  {:>14.6e}  {:>8}  {:>10.2}\n", p.epsilon, p.sup_value, p.relax_steps, p.wall_clock_s));
            } else {
                out.push_str(&format!("{:>10.4e}  failed: {}\n", p.epsilon, p.error.as_deref().unwrap_or("")));
            }
        }
        match (self.slope, self.r2) {
            (Some(s), Some(r2)) => out.push_str(&format!("slope {s:.4}  r2 {r2:.5}  pass {}\n", self.pass)),
            _ => out.push_str(&format!("slope unavailable  pass {}\n", self.pass)),
        }
        out
    }
}

/// Runs every ε of the sweep on up to `workers` threads. Each entry carries
/// the wall-clock seconds of its run.
pub fn sweep_runs(config: &ExperimentConfig, workers: usize) -> Result<Vec<PointOutcome>> {
    if config.sweep.eps.is_empty() {
        return Err(Error::Config("sweep.eps is empty".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        config
            .sweep
            .eps
            .par_iter()
            .map(|&eps| {
                let start = Instant::now();
                let result = run_point(config, eps);
                if let Err(e) = &result {
                    log::warn!("sweep point eps = {eps} failed: {e}");
                }
                PointOutcome { epsilon: eps, result, wall_clock_s: start.elapsed().as_secs_f64() }
            })
            .collect()
    }))
}

pub fn sweep_eps(config: &ExperimentConfig, workers: usize) -> Result<SweepReport> {
    let start = Instant::now();
    let runs = sweep_runs(config, workers)?;
    let grid = config.build_grid()?;
    let model = config.build_model(&grid)?;
    Ok(SweepReport::from_runs(&model, &runs, start.elapsed().as_secs_f64()))
}

/// Writes `sweep.json` plus per-ε series and inequality files under `dir/eps_<i>`.
pub fn write_sweep(dir: &Path, report: &SweepReport, runs: &[PointOutcome]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(report)?)?;
    for (i, o) in runs.iter().enumerate() {
        if let Ok(p) = &o.result {
            let sub = dir.join(format!("eps_{i}"));
            p.run.write_outputs(&sub)?;
            if let Some(r) = &p.refined {
                fs::write(sub.join("refined_inequality.json"), serde_json::to_string_pretty(&r.summary_json())?)?;
            }
        }
    }
    Ok(())
}

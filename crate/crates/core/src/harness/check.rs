//! Invariant checks on the configured model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::initial::{make_initial, random_smooth_field};
use super::sweep::{refine_inequality, run_coupled, CoupledOptions};
use crate::dynamics::{self, LimitState, RelaxState};
use crate::elliptic;
use crate::energetics::{self, EnergyModel};
use crate::error::Result;
use crate::field::{ScalarField, Spectral};
use crate::relent;

/// One named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub model: String,
    pub checks: Vec<CheckLine>,
    pub pass: bool,
}

impl CheckReport {
    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn table(&self) -> String {
        let mut out = format!("checks for {}\n", self.model);
        for c in &self.checks {
            out.push_str(&format!(
                "{:<4} {:<28} {:>12.4e} (limit {:.1e}) {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.threshold,
                c.detail
            ));
        }
        out
    }
}

fn below(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> CheckLine {
    CheckLine { name: name.into(), value, threshold, passed: value <= threshold, detail: detail.into() }
}

/// Number of short relaxation steps in the dynamics checks.
const SHORT_STEPS: usize = 40;

/// Runs the module invariant checks on the configured model and initial data.
pub fn check_suite(config: &ExperimentConfig) -> Result<CheckReport> {
    let grid = config.build_grid()?;
    let sp = Spectral::new(&grid);
    let mut model = config.build_model(&grid)?;
    let eps = config.single_epsilon()?;
    let init = make_initial(config, &model, eps, &sp)?;
    let rho = &init.rho;
    let law = *model.law();
    let mut rng = ChaCha8Rng::seed_from_u64(config.initial.seed);
    let mut checks = Vec::new();

    checks.push(below("stress_identity", dynamics::stress_identity_residual(&model, rho, &sp)?, 1e-8, "relative"));

    let dir = random_smooth_field(&grid, &mut rng).scale(0.1 * rho.min());
    let ladder = energetics::gateaux_check(&model, rho, &dir, &[1e-2, 1e-3, 1e-4], &sp)?;
    let last = *ladder.relative.last().unwrap_or(&f64::NAN);
    checks.push(below("gateaux", last, 1e-6, format!("rates {:?}", ladder.rates)));

    let mut worst_pr: f64 = 0.0;
    let mut negative = 0usize;
    for _ in 0..2000 {
        let r = rng.gen_range(0.0..5.0);
        let rb = rng.gen_range(0.2..3.0);
        let h = law.h_rel(r, rb);
        let p = law.p_rel(r, rb);
        if h < 0.0 {
            negative += 1;
        }
        let scale = p.abs().max(f64::MIN_POSITIVE);
        if p != 0.0 || h != 0.0 {
            worst_pr = worst_pr.max((p - law.a_constant() * h).abs() / scale);
        }
    }
    checks.push(below("p_rel_equals_a_h_rel", worst_pr, 1e-12, "relative, 2000 samples"));
    checks.push(below("h_rel_nonnegative", negative as f64, 0.0, "violations"));

    if let EnergyModel::EulerPoisson { c_x, beta, .. } = &model {
        let (c_x, beta) = (*c_x, *beta);
        let c = elliptic::solve_screened_poisson(rho, beta, &sp)?;
        let src = rho - &ScalarField::constant(&grid, rho.mean());
        checks.push(below("elliptic_residual", elliptic::solver_residual(&src, &c, beta, &sp)?, 1e-10, "relative"));
        checks.push(below("elliptic_energy", elliptic::energy_identity_residual(&src, &c, beta, &sp)?, 1e-10, "relative"));
        let mut samples: Vec<ScalarField> = (0..16)
            .map(|i| {
                let s = 0.5 * rho.min() * (i + 1) as f64 / 16.0;
                rho + &random_smooth_field(&grid, &mut rng).scale(s)
            })
            .collect();
        // Single low modes, where the ratio peaks.
        let s = 0.1 * rho.min();
        for j in 1..=2 {
            let w = 2.0 * std::f64::consts::PI * j as f64 / grid.length();
            samples.push(rho + &ScalarField::from_fn(&grid, |x| s * (w * x[0]).cos()));
            samples.push(rho + &ScalarField::from_fn(&grid, |x| s * (w * x[0]).sin()));
        }
        let k_hat = elliptic::estimate_k(&samples, rho, beta, &law, &sp)?;
        let hc = elliptic::hc_check(k_hat, c_x);
        model.record_hc(hc.passed);
        checks.push(CheckLine {
            name: "convexity_lambda".into(),
            value: hc.lambda,
            threshold: 0.0,
            passed: hc.passed,
            detail: format!("K = {k_hat:.4e}, C_x = {c_x}"),
        });
    }

    let e1 = dynamics::error_term(&model, rho, eps, &sp)?.l2_norm();
    let e2 = dynamics::error_term(&model, rho, 0.5 * eps, &sp)?.l2_norm();
    let ratio = if e2 > 0.0 { e1 / e2 } else { 2.0 };
    checks.push(CheckLine {
        name: "error_term_ratio".into(),
        value: ratio,
        threshold: 2.0,
        passed: (1.8..=2.2).contains(&ratio),
        detail: "||e(eps)|| / ||e(eps/2)|| in [1.8, 2.2]".into(),
    });

    let mbar = dynamics::equilibrium_momentum(&model, rho, eps, &sp)?;
    checks.push(below("equilibrium_phi", relent::phi(rho, &mbar, rho, &mbar, &law)?, 0.0, "phi of identical states"));

    let opts = CoupledOptions::from_config(config, eps)?;
    let relax0 = RelaxState::new(init.rho.clone(), init.m.clone(), 0.0)?;
    let dt0 = dynamics::cfl_dt(&model, &relax0, eps, opts.relax.cfl_safety, opts.relax.rho_min)?.min(opts.relax.dt);
    let short = CoupledOptions { t_final: (SHORT_STEPS as f64 * dt0).min(config.time.t_final), ..opts };
    let limit0 = LimitState::new(init.rho.clone(), 0.0)?;
    let run = run_coupled(&model, relax0.clone(), limit0.clone(), eps, &short, &sp)?;
    let refined = refine_inequality(&model, &run, relax0, limit0, &short, &sp)?;
    checks.push(below("relax_mass_drift", run.relax_mass_drift(), 1e-10, format!("{} steps", run.relax_steps)));
    checks.push(below("limit_mass_drift", run.limit_mass_drift(), 1e-10, format!("{} steps", run.limit_steps)));
    checks.push(below("energy_increase", run.max_energy_increase(), 1e-12, "relative per step"));
    checks.push(CheckLine {
        name: "stability_inequality".into(),
        value: refined.worst_ratio,
        threshold: 1.0,
        passed: refined.holds,
        detail: "max (LHS - RHS) / measured tolerance".into(),
    });

    let pass = checks.iter().all(|c| c.passed);
    Ok(CheckReport { model: model.name().into(), checks, pass })
}

//! Relative energies, relative stress, and residuals of the relative-energy
//! identities and stability inequalities.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{self, LimitTrajectory, RelaxState, RelaxTrajectory};
use crate::elliptic;
use crate::energetics::{self, EnergyModel, GammaLaw, DEFAULT_RHO_MIN};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Spectral, TensorField, VectorField};

/// `Φ = ∫h(ρ|ρ̄) + ½∫ρ|u-ū|²`.
pub fn phi(rho: &ScalarField, m: &VectorField, rho_bar: &ScalarField, m_bar: &VectorField, law: &GammaLaw) -> Result<f64> {
    Ok(energetics::relative_internal_energy(law, rho, rho_bar)?
        + energetics::relative_kinetic(rho, m, rho_bar, m_bar)?)
}

/// `Ψ = Φ + ½C_κ∫|∇(ρ-ρ̄)|²`.
pub fn psi(
    rho: &ScalarField,
    m: &VectorField,
    rho_bar: &ScalarField,
    m_bar: &VectorField,
    law: &GammaLaw,
    c_kappa: f64,
    sp: &Spectral,
) -> Result<f64> {
    if !(c_kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("C_kappa must be >= 0, got {c_kappa}")));
    }
    Ok(phi(rho, m, rho_bar, m_bar, law)? + 0.5 * c_kappa * sp.dirichlet_energy(&(rho - rho_bar)))
}

/// `∫[h(ρ|ρ̄) + ½ρ|u-ū|²] - ½C_x∫(ρ-ρ̄)(c-c̄)`; `c`, `c̄` must solve the
/// screened Poisson problem for `ρ`, `ρ̄`.
#[allow(clippy::too_many_arguments)]
pub fn ep_relative_total(
    rho: &ScalarField,
    m: &VectorField,
    c: &ScalarField,
    rho_bar: &ScalarField,
    m_bar: &VectorField,
    c_bar: &ScalarField,
    law: &GammaLaw,
    c_x: f64,
    beta: f64,
    sp: &Spectral,
) -> Result<f64> {
    for (r, cc, which) in [(rho, c, "c"), (rho_bar, c_bar, "c_bar")] {
        let res = elliptic::solver_residual(r, cc, beta, sp)?;
        if res > 1e-8 {
            return Err(Error::Mismatch(format!("{which} is not the screened Poisson solve (residual {res:e})")));
        }
    }
    let delta = rho - rho_bar;
    Ok(phi(rho, m, rho_bar, m_bar, law)? - 0.5 * c_x * delta.inner(&(c - c_bar)))
}

/// Directional derivative `dS(ρ̄; η)` of the stress.
pub fn stress_derivative(model: &EnergyModel, rho_bar: &ScalarField, eta: &ScalarField, sp: &Spectral) -> Result<TensorField> {
    let law = model.law();
    let dp = sp.product(&rho_bar.map(|r| law.pressure_d1(r)), eta);
    Ok(match model {
        EnergyModel::Euler { .. } => TensorField::isotropic(&-&dp),
        EnergyModel::EulerPoisson { c_x, beta, .. } => {
            let cb = elliptic::solve_screened_poisson(rho_bar, *beta, sp)?;
            let ce = elliptic::solve_screened_poisson(eta, *beta, sp)?;
            let gb = sp.gradient(&cb);
            let ge = sp.gradient(&ce);
            let quad = &sp.product(&cb, &ce).scale(*beta) + &sp.dealias(&gb.dot(&ge));
            let iso = &(&quad.scale(*c_x) + &ce.scale(c_x * rho_bar.mean())) + &cb.scale(c_x * eta.mean());
            let iso = &iso - &dp;
            let outer = TensorField::from_fn(gb.dim(), |i, j| {
                &sp.product(gb.component(i), ge.component(j)) + &sp.product(ge.component(i), gb.component(j))
            });
            &TensorField::isotropic(&iso) - &outer.scale(*c_x)
        }
        EnergyModel::EulerKorteweg { c_kappa, .. } => {
            let gb = sp.gradient(rho_bar);
            let ge = sp.gradient(eta);
            let iso = &(&(&sp.dealias(&gb.dot(&ge)) + &sp.product(eta, &sp.laplacian(rho_bar)))
                + &sp.product(rho_bar, &sp.laplacian(eta)))
                .scale(*c_kappa)
                - &dp;
            let outer = TensorField::from_fn(gb.dim(), |i, j| {
                &sp.product(gb.component(i), ge.component(j)) + &sp.product(ge.component(i), gb.component(j))
            });
            &TensorField::isotropic(&iso) - &outer.scale(*c_kappa)
        }
    })
}

/// `S(ρ|ρ̄) = S(ρ) - S(ρ̄) - dS(ρ̄; ρ-ρ̄)`.
///
/// Euler and Euler–Poisson use the closed forms (pressure part via the
/// cancellation-free `p(ρ|ρ̄)`); Euler–Korteweg is assembled from the
/// stress and its analytic directional derivative.
pub fn relative_stress(model: &EnergyModel, rho: &ScalarField, rho_bar: &ScalarField, sp: &Spectral) -> Result<TensorField> {
    rho.check_grid(rho_bar)?;
    energetics::check_positive(rho_bar)?;
    let law = model.law();
    match model {
        EnergyModel::Euler { .. } => {
            let pr = sp.dealias(&energetics::p_rel_field(law, rho, rho_bar)?);
            Ok(TensorField::isotropic(&-&pr))
        }
        EnergyModel::EulerPoisson { c_x, beta, .. } => {
            let pr = sp.dealias(&energetics::p_rel_field(law, rho, rho_bar)?);
            let delta = rho - rho_bar;
            let cd = elliptic::solve_screened_poisson(&delta, *beta, sp)?;
            let g = sp.gradient(&cd);
            let quad = &(&sp.product(&cd, &cd).scale(0.5 * beta) + &sp.dealias(&g.norm_sq()).scale(0.5))
                + &cd.scale(delta.mean());
            let iso = &quad.scale(*c_x) - &pr;
            let outer = TensorField::from_fn(g.dim(), |i, j| sp.product(g.component(i), g.component(j)));
            Ok(&TensorField::isotropic(&iso) - &outer.scale(*c_x))
        }
        EnergyModel::EulerKorteweg { .. } => {
            let delta = rho - rho_bar;
            let s = dynamics::stress(model, rho, sp)?;
            let sb = dynamics::stress(model, rho_bar, sp)?;
            let ds = stress_derivative(model, rho_bar, &delta, sp)?;
            Ok(&(&s - &sb) - &ds)
        }
    }
}

/// Pointwise `∇v` with `G_ij = ∂_j v_i`.
fn velocity_gradient(v: &VectorField, sp: &Spectral) -> TensorField {
    let grads: Vec<VectorField> = v.components().iter().map(|c| sp.gradient(c)).collect();
    TensorField::from_fn(v.dim(), |i, j| grads[i].component(j).clone())
}

/// `∫ρ ∇v : w⊗w`.
fn convective_integral(rho: &ScalarField, grad_v: &TensorField, w: &VectorField) -> f64 {
    grad_v.apply(w).dot(w).inner(rho)
}

/// Relative energy and its predicted rate for two relaxation states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentitySample {
    pub t: f64,
    /// `E(ρ|ρ̄) + ½∫ρ|u-ū|²`.
    pub relative_energy: f64,
    /// `ε⁻²∫ρ|u-ū|²`.
    pub dissipation: f64,
    /// `(1/ε)∫∇ū:S(ρ|ρ̄)`.
    pub stress: f64,
    /// `(1/ε)∫ρ∇ū:(u-ū)⊗(u-ū)`.
    pub convective: f64,
}

impl IdentitySample {
    /// Right side of `d/dt(relative energy) = -D + stress - convective`.
    pub fn rate(&self) -> f64 {
        -self.dissipation + self.stress - self.convective
    }
}

/// Terms of the relative energy identity between `(ρ,m)` and `(ρ̄,m̄)`.
pub fn identity_sample(
    model: &EnergyModel,
    a: &RelaxState,
    b: &RelaxState,
    eps: f64,
    sp: &Spectral,
) -> Result<IdentitySample> {
    let u = energetics::velocity(&a.rho, &a.m, DEFAULT_RHO_MIN)?;
    energetics::check_positive(&b.rho)?;
    let ub = energetics::velocity(&b.rho, &b.m, 0.0)?;
    let w = &u - &ub;
    let rw2 = w.norm_sq().inner(&a.rho);
    let gu = velocity_gradient(&ub, sp);
    let s_rel = relative_stress(model, &a.rho, &b.rho, sp)?;
    Ok(IdentitySample {
        t: a.time,
        relative_energy: model.relative_potential_energy(&a.rho, &b.rho, sp)? + 0.5 * rw2,
        dissipation: rw2 / (eps * eps),
        stress: gu.contract(&s_rel).integral() / eps,
        convective: convective_integral(&a.rho, &gu, &w) / eps,
    })
}

fn trap_residual(prev_t: f64, prev_e: f64, prev_r: f64, t: f64, e: f64, r: f64) -> f64 {
    ((e - prev_e) / (t - prev_t) - 0.5 * (prev_r + r)).abs()
}

fn check_times(ta: &[f64], tb: &[f64]) -> Result<()> {
    if ta.len() != tb.len() || ta.iter().zip(tb).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(Error::Mismatch("trajectories have different snapshot times".into()));
    }
    if ta.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Mismatch("snapshot times must increase strictly".into()));
    }
    Ok(())
}

/// Per-interval imbalance of the relative energy identity between two
/// relaxation trajectories (trapezoid in time over consecutive snapshots).
pub fn reltote_residual(
    traj_a: &RelaxTrajectory,
    traj_b: &RelaxTrajectory,
    model: &EnergyModel,
    eps: f64,
    sp: &Spectral,
) -> Result<Vec<f64>> {
    let ta: Vec<f64> = traj_a.snapshots.iter().map(|s| s.time).collect();
    let tb: Vec<f64> = traj_b.snapshots.iter().map(|s| s.time).collect();
    check_times(&ta, &tb)?;
    if traj_a.epsilon != Some(eps) || traj_b.epsilon != Some(eps) {
        return Err(Error::Mismatch("trajectory epsilon differs from the requested one".into()));
    }
    let samples = traj_a
        .snapshots
        .iter()
        .zip(&traj_b.snapshots)
        .map(|(a, b)| identity_sample(model, a, b, eps, sp))
        .collect::<Result<Vec<_>>>()?;
    Ok(samples
        .windows(2)
        .map(|w| trap_residual(w[0].t, w[0].relative_energy, w[0].rate(), w[1].t, w[1].relative_energy, w[1].rate()))
        .collect())
}

/// Integrands of the relaxation-versus-limit stability inequality at one time.
///
/// `RHS(t) = LHS(0) - ∫₀ᵗ (dissipation + error_term + pressure + interaction + convective)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalitySample {
    pub t: f64,
    /// Relative energy: `Φ` (Euler), EP total, or `Ψ` (EK).
    pub lhs: f64,
    /// `ε⁻²∫ρ|u-ū|²`.
    pub dissipation: f64,
    /// `∫ē·(ρ/ρ̄)(u-ū)`.
    pub error_term: f64,
    /// `(1/ε)∫div ū · p(ρ|ρ̄)`.
    pub pressure: f64,
    /// Model-specific quadratic terms (chemotactic or capillary).
    pub interaction: f64,
    /// `(1/ε)∫ρ∇ū:(u-ū)⊗(u-ū)`.
    pub convective: f64,
    /// `-(1/ε)∫∇ū:S(ρ|ρ̄)`; equals `pressure + interaction` after integration by parts.
    pub stress_generic: f64,
    /// `Φ` for every model.
    pub phi: f64,
}

impl InequalitySample {
    pub const TERMS: usize = 5;

    pub fn terms(&self) -> [f64; Self::TERMS] {
        [self.dissipation, self.error_term, self.pressure, self.interaction, self.convective]
    }

    pub fn rate(&self) -> f64 {
        self.terms().iter().sum()
    }
}

/// Evaluates every term of the stability inequality for a relaxation state
/// against the limit density `ρ̄` (with `m̄`, `ē` reconstructed from `ρ̄`).
pub fn inequality_sample(
    model: &EnergyModel,
    relax: &RelaxState,
    rho_bar: &ScalarField,
    eps: f64,
    rho_min: f64,
    sp: &Spectral,
) -> Result<InequalitySample> {
    relax.rho.check_grid(rho_bar)?;
    let law = model.law();
    let m_bar = dynamics::equilibrium_momentum(model, rho_bar, eps, sp)?;
    let e_bar = dynamics::error_term(model, rho_bar, eps, sp)?;
    let ub = energetics::velocity(rho_bar, &m_bar, 0.0)?;
    let u = energetics::velocity(&relax.rho, &relax.m, rho_min)?;
    let w = &u - &ub;
    let rho = &relax.rho;
    let rw2 = w.norm_sq().inner(rho);
    let gu = velocity_gradient(&ub, sp);
    let div_u = sp.divergence(&ub);
    let delta = rho - rho_bar;
    let h_rel = energetics::relative_internal_energy(law, rho, rho_bar)?;
    let p_rel = energetics::p_rel_field(law, rho, rho_bar)?;
    let inv = 1.0 / eps;

    let ratio = rho.zip_map(rho_bar, |a, b| a / b);
    let error_term = e_bar.dot(&w).inner(&ratio);
    let pressure = inv * div_u.inner(&p_rel);
    let (interaction, extra_lhs) = match model {
        EnergyModel::Euler { .. } => (0.0, 0.0),
        EnergyModel::EulerPoisson { c_x, beta, .. } => {
            let cd = elliptic::solve_screened_poisson(&delta, *beta, sp)?;
            let g = sp.gradient(&cd);
            let mean = delta.mean();
            let quad = ScalarField::new(
                rho.grid(),
                cd.values()
                    .iter()
                    .zip(g.norm_sq().values())
                    .map(|(&c, &g2)| 0.5 * beta * c * c + 0.5 * g2 + c * mean)
                    .collect(),
            )?;
            let outer = TensorField::outer(&g, &g);
            let q = -c_x * inv * div_u.inner(&quad) + c_x * inv * gu.contract(&outer).integral();
            (q, -0.5 * c_x * delta.inner(&cd))
        }
        EnergyModel::EulerKorteweg { c_kappa, .. } => {
            let g = sp.gradient(&delta);
            let g2 = g.norm_sq();
            let grad_div = sp.gradient(&div_u);
            let outer = TensorField::outer(&g, &g);
            let q = inv * 0.5 * c_kappa * div_u.inner(&g2)
                + c_kappa * inv * (gu.contract(&outer).integral() + grad_div.dot(&g).inner(&delta));
            (q, 0.5 * c_kappa * sp.dirichlet_energy(&delta))
        }
    };
    let s_rel = relative_stress(model, rho, rho_bar, sp)?;
    let phi = h_rel + 0.5 * rw2;
    Ok(InequalitySample {
        t: relax.time,
        lhs: phi + extra_lhs,
        dissipation: inv * inv * rw2,
        error_term,
        pressure,
        interaction,
        convective: inv * convective_integral(rho, &gu, &w),
        stress_generic: -inv * gu.contract(&s_rel).integral(),
        phi,
    })
}

/// One output time of the inequality scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `LHS - RHS` (positive means the inequality is violated).
    pub imbalance: f64,
    pub tolerance: f64,
    /// `LHS - RHS` with the dissipation integral removed from the right side.
    pub ablated_imbalance: f64,
    pub int_dissipation: f64,
    pub int_error_term: f64,
    pub int_pressure: f64,
    pub int_interaction: f64,
    pub int_convective: f64,
    /// `∫₀ᵗ (pressure + interaction - stress_generic)`.
    pub assembly_gap: f64,
}

impl InequalityRow {
    pub const CSV_HEADER: &'static str = "t,lhs,rhs,imbalance,tolerance,ablated_imbalance,int_dissipation,int_error_term,int_pressure,int_interaction,int_convective,assembly_gap";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.lhs,
            self.rhs,
            self.imbalance,
            self.tolerance,
            self.ablated_imbalance,
            self.int_dissipation,
            self.int_error_term,
            self.int_pressure,
            self.int_interaction,
            self.int_convective,
            self.assembly_gap
        )
    }
}

/// Safety factor applied to the Richardson estimate of the time-quadrature error.
pub const QUADRATURE_SAFETY: f64 = 10.0;
/// Relative round-off floor of the tolerance, scaled by the largest term integral.
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

/// Streaming trapezoid accumulation of the inequality terms, with a coarse
/// (every other sample) sum for a Richardson quadrature-error estimate.
#[derive(Debug, Clone)]
pub struct InequalityAccumulator {
    lhs0: f64,
    samples: usize,
    last: InequalitySample,
    /// Sample two back, used by the coarse sum.
    prev2: Option<InequalitySample>,
    fine: [f64; InequalitySample::TERMS],
    coarse: [f64; InequalitySample::TERMS],
    gap: f64,
    rows: Vec<InequalityRow>,
}

impl InequalityAccumulator {
    pub fn new(first: InequalitySample) -> Self {
        let row = InequalityRow {
            t: first.t,
            lhs: first.lhs,
            rhs: first.lhs,
            imbalance: 0.0,
            tolerance: ROUNDOFF_FLOOR * first.lhs.abs(),
            ablated_imbalance: 0.0,
            int_dissipation: 0.0,
            int_error_term: 0.0,
            int_pressure: 0.0,
            int_interaction: 0.0,
            int_convective: 0.0,
            assembly_gap: 0.0,
        };
        Self {
            lhs0: first.lhs,
            samples: 1,
            last: first,
            prev2: None,
            fine: [0.0; InequalitySample::TERMS],
            coarse: [0.0; InequalitySample::TERMS],
            gap: 0.0,
            rows: vec![row],
        }
    }

    /// Adds the next sample; returns the row at its time.
    pub fn push(&mut self, s: InequalitySample) -> InequalityRow {
        let dt = s.t - self.last.t;
        let (a, b) = (self.last.terms(), s.terms());
        for k in 0..InequalitySample::TERMS {
            self.fine[k] += 0.5 * dt * (a[k] + b[k]);
        }
        let gap_a = self.last.pressure + self.last.interaction - self.last.stress_generic;
        let gap_b = s.pressure + s.interaction - s.stress_generic;
        self.gap += 0.5 * dt * (gap_a + gap_b);
        self.samples += 1;
        // The coarse sum covers samples 0, 2, 4, ...; odd counts leave one fine interval.
        let coarse_now = if self.samples % 2 == 1 {
            let p = self.prev2.expect("two samples back");
            let pt = p.terms();
            for k in 0..InequalitySample::TERMS {
                self.coarse[k] += 0.5 * (s.t - p.t) * (pt[k] + b[k]);
            }
            self.prev2 = Some(s);
            self.coarse
        } else {
            if self.prev2.is_none() {
                self.prev2 = Some(self.last);
            }
            let mut c = self.coarse;
            for k in 0..InequalitySample::TERMS {
                c[k] += 0.5 * dt * (a[k] + b[k]);
            }
            c
        };
        self.last = s;
        let rhs = self.lhs0 - self.fine.iter().sum::<f64>();
        let quad: f64 = (0..InequalitySample::TERMS).map(|k| (self.fine[k] - coarse_now[k]).abs() / 3.0).sum();
        let scale = self.fine.iter().fold(self.lhs0.abs().max(s.lhs.abs()), |m, v| m.max(v.abs()));
        let row = InequalityRow {
            t: s.t,
            lhs: s.lhs,
            rhs,
            imbalance: s.lhs - rhs,
            tolerance: QUADRATURE_SAFETY * quad + ROUNDOFF_FLOOR * scale,
            ablated_imbalance: s.lhs - (rhs + self.fine[0]),
            int_dissipation: self.fine[0],
            int_error_term: self.fine[1],
            int_pressure: self.fine[2],
            int_interaction: self.fine[3],
            int_convective: self.fine[4],
            assembly_gap: self.gap,
        };
        self.rows.push(row);
        row
    }

    pub fn rows(&self) -> &[InequalityRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<InequalityRow> {
        self.rows
    }
}

/// Summary of an inequality scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub model: String,
    pub epsilon: f64,
    pub rows: Vec<InequalityRow>,
    /// `max_t (LHS - RHS) / tolerance`.
    pub worst_ratio: f64,
    /// `LHS - RHS <= tolerance` at every output time.
    pub holds: bool,
    /// Largest signed `LHS - RHS_ablated`.
    pub ablated_max_signed: f64,
    /// Some output time with `|LHS - RHS_ablated| > tolerance`.
    pub ablation_breaks_balance: bool,
    /// Some output time with `LHS - RHS_ablated > tolerance`.
    pub ablation_signed_violation: bool,
}

impl InequalityReport {
    pub fn from_rows(model: &EnergyModel, eps: f64, rows: Vec<InequalityRow>) -> Self {
        let worst_ratio = rows
            .iter()
            .map(|r| if r.tolerance > 0.0 { r.imbalance / r.tolerance } else if r.imbalance > 0.0 { f64::INFINITY } else { 0.0 })
            .fold(f64::NEG_INFINITY, f64::max);
        let holds = rows.iter().all(|r| r.imbalance <= r.tolerance);
        let ablated_max_signed = rows.iter().map(|r| r.ablated_imbalance).fold(f64::NEG_INFINITY, f64::max);
        let ablation_breaks_balance = rows.iter().any(|r| r.ablated_imbalance.abs() > r.tolerance);
        let ablation_signed_violation = rows.iter().any(|r| r.ablated_imbalance > r.tolerance);
        Self {
            model: model.name().to_string(),
            epsilon: eps,
            rows,
            worst_ratio,
            holds,
            ablated_max_signed,
            ablation_breaks_balance,
            ablation_signed_violation,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from(InequalityRow::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let n = self.rows.len().max(1) as f64;
        serde_json::json!({
            "model": self.model,
            "epsilon": self.epsilon,
            "max_imbalance": self.rows.iter().map(|r| r.imbalance).fold(f64::NEG_INFINITY, f64::max),
            "mean_abs_imbalance": self.rows.iter().map(|r| r.imbalance.abs()).sum::<f64>() / n,
            "worst_ratio": self.worst_ratio,
            "holds": self.holds,
            "ablated_max_signed": self.ablated_max_signed,
            "ablation_breaks_balance": self.ablation_breaks_balance,
            "ablation_signed_violation": self.ablation_signed_violation,
        })
    }
}

/// Scans the stability inequality along matching relaxation and limit snapshots.
pub fn relax_limit_inequality_residual(
    relax_traj: &RelaxTrajectory,
    limit_traj: &LimitTrajectory,
    model: &EnergyModel,
    eps: f64,
    sp: &Spectral,
) -> Result<InequalityReport> {
    if relax_traj.model.name() != model.name() || limit_traj.model.name() != model.name() {
        return Err(Error::Mismatch("trajectories belong to a different model".into()));
    }
    if relax_traj.epsilon != Some(eps) {
        return Err(Error::Mismatch("relaxation trajectory epsilon differs".into()));
    }
    let ta: Vec<f64> = relax_traj.snapshots.iter().map(|s| s.time).collect();
    let tb: Vec<f64> = limit_traj.snapshots.iter().map(|s| s.time).collect();
    check_times(&ta, &tb)?;
    let mut acc: Option<InequalityAccumulator> = None;
    for (r, l) in relax_traj.snapshots.iter().zip(&limit_traj.snapshots) {
        let s = inequality_sample(model, r, &l.rho, eps, DEFAULT_RHO_MIN, sp)?;
        match acc.as_mut() {
            None => acc = Some(InequalityAccumulator::new(s)),
            Some(a) => {
                a.push(s);
            }
        }
    }
    let acc = acc.ok_or_else(|| Error::NoSamples("empty trajectories".into()))?;
    Ok(InequalityReport::from_rows(model, eps, acc.into_rows()))
}

/// Terms of the gradient-flow relative energy identity at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradflowSample {
    pub t: f64,
    /// `E(ρ|ρ̄)`.
    pub relative_energy: f64,
    /// `∫ρ|∇(δE/δρ(ρ) - δE/δρ(ρ̄))|²`.
    pub dissipation: f64,
    /// `∫S(ρ|ρ̄) : ∇²(δE/δρ(ρ̄))`.
    pub stress: f64,
}

pub fn gradflow_sample(model: &EnergyModel, rho: &ScalarField, rho_bar: &ScalarField, t: f64, sp: &Spectral) -> Result<GradflowSample> {
    let mu = model.variational_derivative(rho, sp)?;
    let mub = model.variational_derivative(rho_bar, sp)?;
    let dissipation = sp.gradient(&(&mu - &mub)).norm_sq().inner(rho);
    let s_rel = relative_stress(model, rho, rho_bar, sp)?;
    let stress = s_rel.contract(&sp.hessian(&mub)).integral();
    Ok(GradflowSample { t, relative_energy: model.relative_potential_energy(rho, rho_bar, sp)?, dissipation, stress })
}

/// Imbalance of `d/dt E(ρ|ρ̄) + ∫ρ|∇(μ-μ̄)|² = -∫S(ρ|ρ̄):∇²μ̄`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradflowResidual {
    pub per_interval: Vec<f64>,
    /// `|E(T) - E(0) + ∫₀ᵀ(dissipation + stress)|`.
    pub integrated_imbalance: f64,
    /// `∫₀ᵀ dissipation`.
    pub integrated_dissipation: f64,
    pub samples: Vec<GradflowSample>,
}

pub fn gradflow_relent_residual(
    limit_a: &LimitTrajectory,
    limit_b: &LimitTrajectory,
    model: &EnergyModel,
    sp: &Spectral,
) -> Result<GradflowResidual> {
    let ta: Vec<f64> = limit_a.snapshots.iter().map(|s| s.time).collect();
    let tb: Vec<f64> = limit_b.snapshots.iter().map(|s| s.time).collect();
    check_times(&ta, &tb)?;
    let samples = limit_a
        .snapshots
        .iter()
        .zip(&limit_b.snapshots)
        .map(|(a, b)| gradflow_sample(model, &a.rho, &b.rho, a.time, sp))
        .collect::<Result<Vec<_>>>()?;
    let per_interval = samples
        .windows(2)
        .map(|w| {
            let ra = -(w[0].dissipation + w[0].stress);
            let rb = -(w[1].dissipation + w[1].stress);
            trap_residual(w[0].t, w[0].relative_energy, ra, w[1].t, w[1].relative_energy, rb)
        })
        .collect();
    let mut int_d = 0.0;
    let mut int_s = 0.0;
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        int_d += 0.5 * dt * (w[0].dissipation + w[1].dissipation);
        int_s += 0.5 * dt * (w[0].stress + w[1].stress);
    }
    let (first, last) = (samples.first(), samples.last());
    let integrated_imbalance = match (first, last) {
        (Some(f), Some(l)) => (l.relative_energy - f.relative_energy + int_d + int_s).abs(),
        _ => 0.0,
    };
    Ok(GradflowResidual { per_interval, integrated_imbalance, integrated_dissipation: int_d, samples })
}

/// Quadratic Wasserstein distance between two 1-D densities (normalized to
/// probability measures), cutting the circle at `x = 0`.
///
/// Each density is the periodic piecewise-linear interpolant of its nodal values.
pub fn wasserstein2_1d(rho: &ScalarField, rho_bar: &ScalarField) -> Result<f64> {
    rho.check_grid(rho_bar)?;
    if rho.grid().dim() != 1 {
        return Err(Error::InvalidParameter("wasserstein2_1d needs a 1-D grid".into()));
    }
    energetics::check_nonnegative(rho)?;
    energetics::check_nonnegative(rho_bar)?;
    let (ma, mb) = (rho.integral(), rho_bar.integral());
    if !(ma > 0.0 && mb > 0.0) {
        return Err(Error::InvalidParameter("densities must have positive mass".into()));
    }
    if ((ma - mb) / ma.max(mb)).abs() > 1e-8 {
        return Err(Error::Mismatch(format!("mass mismatch: {ma} vs {mb}")));
    }
    let qa = Quantile::new(rho, ma);
    let qb = Quantile::new(rho_bar, mb);
    let mut breaks: Vec<f64> = qa.cum.iter().chain(&qb.cum).copied().collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let (nodes, weights) = gauss_legendre_8();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, wt) in nodes.iter().zip(&weights) {
            let s = mid + half * x;
            let d = qa.eval(s) - qb.eval(s);
            total += half * wt * d * d;
        }
    }
    Ok(total.sqrt())
}

/// Inverse CDF of a normalized periodic piecewise-linear density on `[0, L)`.
struct Quantile {
    h: f64,
    vals: Vec<f64>,
    cum: Vec<f64>,
}

impl Quantile {
    fn new(rho: &ScalarField, mass: f64) -> Self {
        let n = rho.len();
        let h = rho.grid().spacing();
        let mut vals: Vec<f64> = rho.values().iter().map(|v| v / mass).collect();
        vals.push(vals[0]);
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for j in 0..n {
            let c = cum[j] + 0.5 * h * (vals[j] + vals[j + 1]);
            cum.push(c);
        }
        let last = cum[n];
        for c in cum.iter_mut() {
            *c /= last;
        }
        for v in vals.iter_mut() {
            *v /= last;
        }
        Self { h, vals, cum }
    }

    fn eval(&self, s: f64) -> f64 {
        let n = self.cum.len() - 1;
        let j = match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let a = self.vals[j];
        let b = (self.vals[j + 1] - a) / self.h;
        let q = (s - self.cum[j]).max(0.0);
        let disc = (a * a + 2.0 * b * q).max(0.0);
        let denom = a + disc.sqrt();
        let tau = if denom > 0.0 { 2.0 * q / denom } else { 0.0 };
        (j as f64 * self.h + tau.clamp(0.0, self.h)).min((j + 1) as f64 * self.h)
    }
}

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    let x = [
        -0.960_289_856_497_536_3,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    let w = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_48,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_48,
        0.101_228_536_290_376_26,
    ];
    (x, w)
}

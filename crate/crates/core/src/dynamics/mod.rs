//! Relaxation and gradient-flow right-hand sides, stresses, equilibrium momentum,
//! time stepping and trajectories.

mod run;
pub(crate) use run::{interval_residual, limit_row, relax_row};
mod stepping;

pub use run::{
    energy_dissipation_residual, limit_dissipation_residual, run_limit, run_relax, write_checkpoint,
    DiagnosticRow, LimitTrajectory, RelaxTrajectory, RunFailure, Trajectory,
};
pub use stepping::{cfl_dt, limit_dt_bound, step_limit, step_relax, Scheme, StepControl};

use crate::elliptic;
use crate::energetics::{self, EnergyModel, DEFAULT_RHO_MIN};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Spectral, TensorField, VectorField};

/// Density and momentum of the relaxation system at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxState {
    pub rho: ScalarField,
    pub m: VectorField,
    pub time: f64,
}

impl RelaxState {
    pub fn new(rho: ScalarField, m: VectorField, time: f64) -> Result<Self> {
        rho.check_grid(m.component(0))?;
        if m.dim() != rho.grid().dim() {
            return Err(Error::Mismatch("momentum dimension differs from grid".into()));
        }
        energetics::check_nonnegative(&rho)?;
        if !rho.is_finite() || !m.is_finite() || !time.is_finite() {
            return Err(Error::NonFinite("relaxation state".into()));
        }
        // Momentum must vanish on floored (vacuum) nodes.
        for (i, &r) in rho.values().iter().enumerate() {
            if r <= DEFAULT_RHO_MIN && m.components().iter().any(|c| c.values()[i] != 0.0) {
                return Err(Error::Vacuum { index: i, rho: r });
            }
        }
        Ok(Self { rho, m, time })
    }

    pub fn at_rest(rho: ScalarField, time: f64) -> Result<Self> {
        let m = VectorField::zeros(rho.grid());
        Self::new(rho, m, time)
    }
}

/// Density of the gradient flow at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub rho: ScalarField,
    pub time: f64,
}

impl LimitState {
    pub fn new(rho: ScalarField, time: f64) -> Result<Self> {
        energetics::check_positive(&rho)?;
        Ok(Self { rho, time })
    }
}

/// Right-hand side split of the relaxation system.
#[derive(Debug, Clone)]
pub struct RelaxRates {
    /// `-(1/ε) div m`.
    pub rho_dot: ScalarField,
    /// `-(1/ε) div(m⊗m/ρ) - (1/ε) ρ∇(δE/δρ)`.
    pub m_transport: VectorField,
    /// Coefficient of the stiff friction `ṁ = -m/ε²`.
    pub stiff_coefficient: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be positive, got {eps}")))
    }
}

/// Dealiased `ρ∇(δE/δρ)`.
pub fn force_density(model: &EnergyModel, rho: &ScalarField, sp: &Spectral) -> Result<VectorField> {
    let mu = model.variational_derivative(rho, sp)?;
    Ok(sp.scale_vector(rho, &sp.gradient(&mu)))
}

pub fn rhs_relax(model: &EnergyModel, state: &RelaxState, eps: f64, sp: &Spectral) -> Result<RelaxRates> {
    rhs_relax_floor(model, state, eps, DEFAULT_RHO_MIN, sp)
}

pub(crate) fn rhs_relax_floor(
    model: &EnergyModel,
    state: &RelaxState,
    eps: f64,
    rho_min: f64,
    sp: &Spectral,
) -> Result<RelaxRates> {
    check_eps(eps)?;
    let inv = 1.0 / eps;
    let u = energetics::velocity(&state.rho, &state.m, rho_min)?;
    let rho_dot = sp.divergence(&state.m).scale(-inv);
    let dim = state.m.dim();
    let force = force_density(model, &state.rho, sp)?;
    let comps = (0..dim)
        .map(|i| {
            let flux = VectorField::from_raw(
                (0..dim).map(|j| sp.product(state.m.component(i), u.component(j))).collect(),
            );
            (&sp.divergence(&flux) + force.component(i)).scale(-inv)
        })
        .collect();
    let m_transport = VectorField::from_raw(comps);
    if !rho_dot.is_finite() || !m_transport.is_finite() {
        return Err(Error::NonFinite("relaxation right-hand side".into()));
    }
    Ok(RelaxRates { rho_dot, m_transport, stiff_coefficient: -inv * inv })
}

/// Stress tensor with `div S = -ρ∇(δE/δρ)` (confinement excluded).
pub fn stress(model: &EnergyModel, rho: &ScalarField, sp: &Spectral) -> Result<TensorField> {
    energetics::check_nonnegative(rho)?;
    let law = model.law();
    let p = sp.dealias(&rho.map(|r| law.pressure(r)));
    Ok(match model {
        EnergyModel::Euler { .. } => TensorField::isotropic(&-&p),
        EnergyModel::EulerPoisson { c_x, beta, .. } => {
            let c = elliptic::solve_screened_poisson(rho, *beta, sp)?;
            let gc = sp.gradient(&c);
            let gc2 = sp.dealias(&gc.norm_sq());
            let c2 = sp.product(&c, &c);
            let mean = rho.mean();
            let iso = p.zip_map(&(&c2.scale(*beta) + &gc2), |pv, q| -(pv - 0.5 * c_x * q));
            let iso = &iso + &c.scale(c_x * mean);
            let outer = TensorField::from_fn(gc.dim(), |i, j| sp.product(gc.component(i), gc.component(j)));
            &TensorField::isotropic(&iso) - &outer.scale(*c_x)
        }
        EnergyModel::EulerKorteweg { c_kappa, .. } => {
            let g = sp.gradient(rho);
            let g2 = sp.dealias(&g.norm_sq());
            let rl = sp.product(rho, &sp.laplacian(rho));
            let iso = &(&g2.scale(0.5 * c_kappa) + &rl.scale(*c_kappa)) - &p;
            let outer = TensorField::from_fn(g.dim(), |i, j| sp.product(g.component(i), g.component(j)));
            &TensorField::isotropic(&iso) - &outer.scale(*c_kappa)
        }
    })
}

/// `‖div S + ρ∇(δE/δρ)‖₂ / ‖ρ∇(δE/δρ)‖₂` (`0/0` is 0).
pub fn stress_identity_residual(model: &EnergyModel, rho: &ScalarField, sp: &Spectral) -> Result<f64> {
    let s = stress(model, rho, sp)?;
    let mut mu = model.variational_derivative(rho, sp)?;
    if let EnergyModel::Euler { confinement: Some(v), .. } = model {
        mu = &mu - v;
    }
    let f = sp.scale_vector(rho, &sp.gradient(&mu));
    let num = (&sp.tensor_divergence(&s) + &f).l2_norm();
    let den = f.l2_norm();
    Ok(if den == 0.0 { if num < 1e-300 { 0.0 } else { num } } else { num / den })
}

/// Gradient-flow velocity field: `div(ρ∇(δE/δρ))`.
pub fn rhs_limit(model: &EnergyModel, rho: &ScalarField, sp: &Spectral) -> Result<ScalarField> {
    energetics::check_positive(rho)?;
    let out = sp.divergence(&force_density(model, rho, sp)?);
    if !out.is_finite() {
        return Err(Error::NonFinite("limit right-hand side".into()));
    }
    Ok(out)
}

/// `m̄ = -ε ρ̄ ∇(δE/δρ)(ρ̄)`.
pub fn equilibrium_momentum(model: &EnergyModel, rho_bar: &ScalarField, eps: f64, sp: &Spectral) -> Result<VectorField> {
    check_eps(eps)?;
    energetics::check_positive(rho_bar)?;
    Ok(force_density(model, rho_bar, sp)?.scale(-eps))
}

/// Linearization of `δE/δρ` at `ρ` applied to `η`.
pub fn variational_derivative_linearized(
    model: &EnergyModel,
    rho: &ScalarField,
    eta: &ScalarField,
    sp: &Spectral,
) -> Result<ScalarField> {
    let law = model.law();
    let base = sp.product(&rho.map(|r| law.h_d2(r)), eta);
    Ok(match model {
        EnergyModel::Euler { .. } => base,
        EnergyModel::EulerPoisson { c_x, beta, .. } => {
            &base - &elliptic::solve_screened_poisson(eta, *beta, sp)?.scale(*c_x)
        }
        EnergyModel::EulerKorteweg { c_kappa, .. } => &base - &sp.laplacian(eta).scale(*c_kappa),
    })
}

/// `∂_t m̄` along the limit flow, by the chain rule through `ρ̄_t = rhs_limit(ρ̄)`.
pub fn equilibrium_momentum_rate(model: &EnergyModel, rho_bar: &ScalarField, eps: f64, sp: &Spectral) -> Result<VectorField> {
    check_eps(eps)?;
    let mu = model.variational_derivative(rho_bar, sp)?;
    let g = sp.gradient(&mu);
    let rho_t = rhs_limit(model, rho_bar, sp)?;
    let dmu = variational_derivative_linearized(model, rho_bar, &rho_t, sp)?;
    let a = sp.scale_vector(&rho_t, &g);
    let b = sp.scale_vector(rho_bar, &sp.gradient(&dmu));
    Ok((&a + &b).scale(-eps))
}

/// `ē = ∂_t m̄ + (1/ε) div(m̄⊗m̄/ρ̄)`, linear in `ε`.
pub fn error_term(model: &EnergyModel, rho_bar: &ScalarField, eps: f64, sp: &Spectral) -> Result<VectorField> {
    let dt_m = equilibrium_momentum_rate(model, rho_bar, eps, sp)?;
    let mu = model.variational_derivative(rho_bar, sp)?;
    let g = sp.gradient(&mu);
    let rg = sp.scale_vector(rho_bar, &g);
    let dim = g.dim();
    let conv = VectorField::from_raw(
        (0..dim)
            .map(|i| {
                let row = VectorField::from_raw(
                    (0..dim).map(|j| sp.product(rg.component(i), g.component(j))).collect(),
                );
                sp.divergence(&row)
            })
            .collect(),
    );
    Ok(&dt_m + &conv.scale(eps))
}

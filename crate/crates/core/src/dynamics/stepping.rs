use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_eps, rhs_limit, rhs_relax_floor, LimitState, RelaxState};
use crate::energetics::{self, EnergyModel, DEFAULT_RHO_MIN};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Spectral, VectorField};

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact friction factor with a 3-stage SSP Runge–Kutta for the rest (relaxation).
    ImexIntegratingFactor,
    /// Classical RK4 (limit flows, diffusive step restriction).
    ExplicitRk4,
    /// First-order linearly stabilized spectral step (limit flows).
    SemiImplicitSpectral,
}

/// Step-size policy. Runs use `min(dt, CFL bound)` per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub dt: f64,
    pub cfl_safety: f64,
    pub scheme: Scheme,
    pub rho_min: f64,
}

impl StepControl {
    pub fn new(dt: f64, cfl_safety: f64, scheme: Scheme) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !(cfl_safety > 0.0 && cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl_safety must lie in (0, 1], got {cfl_safety}")));
        }
        Ok(Self { dt, cfl_safety, scheme, rho_min: DEFAULT_RHO_MIN })
    }

    pub fn with_rho_min(mut self, rho_min: f64) -> Self {
        self.rho_min = rho_min;
        self
    }
}

/// Acoustic CFL bound `safety·ε·Δx / (max|u| + max c)`, with the capillary
/// speed `√(p' + C_κ ρ k_max²)` for Euler–Korteweg; also capped at `ε²`.
pub fn cfl_dt(model: &EnergyModel, state: &RelaxState, eps: f64, safety: f64, rho_min: f64) -> Result<f64> {
    check_eps(eps)?;
    let grid = state.rho.grid();
    let u = energetics::velocity(&state.rho, &state.m, rho_min)?;
    let umax = u.norm_sq().max().sqrt();
    let law = model.law();
    let ck = model.c_kappa() * grid.k_max().powi(2);
    let cmax = state
        .rho
        .values()
        .iter()
        .map(|&r| (law.pressure_d1(r) + ck * r).sqrt())
        .fold(0.0, f64::max);
    let speed = umax + cmax;
    let acoustic = if speed > 0.0 { safety * eps * grid.spacing() / speed } else { f64::INFINITY };
    Ok(acoustic.min(eps * eps))
}

/// Largest stable step for the explicit limit stepper (RK4 real-axis bound 2.78).
pub fn limit_dt_bound(model: &EnergyModel, rho: &ScalarField, safety: f64) -> f64 {
    let k2 = rho.grid().k_max().powi(2);
    let law = model.law();
    let rmax = rho.max();
    let pmax = rho.values().iter().map(|&r| law.pressure_d1(r)).fold(0.0, f64::max);
    let mut rate = pmax * k2;
    match model {
        EnergyModel::EulerPoisson { c_x, .. } => rate += c_x * rmax,
        EnergyModel::EulerKorteweg { c_kappa, .. } => rate += c_kappa * rmax * k2 * k2,
        EnergyModel::Euler { .. } => {}
    }
    if rate > 0.0 {
        safety * 2.78 / rate
    } else {
        f64::INFINITY
    }
}

fn axpy(a: &ScalarField, s: f64, b: &ScalarField) -> ScalarField {
    a.zip_map(b, |x, y| x + s * y)
}

fn vaxpy(a: &VectorField, s: f64, b: &VectorField) -> VectorField {
    a.zip_components(b, |x, y| axpy(x, s, y))
}

/// `α·a + β·b` componentwise.
fn vcomb(alpha: f64, a: &VectorField, beta: f64, b: &VectorField) -> VectorField {
    a.zip_components(b, |x, y| x.zip_map(y, |p, q| alpha * p + beta * q))
}

fn scomb(alpha: f64, a: &ScalarField, beta: f64, b: &ScalarField) -> ScalarField {
    a.zip_map(b, |p, q| alpha * p + beta * q)
}

/// One integrating-factor SSP-RK3 step of size `dt` (see [`StepControl`]).
///
/// With `E(s) = exp(-s/ε²)` acting on `m`:
/// `u1 = E(dt)(u0 + dt N(u0))`,
/// `u2 = ¾E(dt/2)u0 + ¼E(-dt/2)(u1 + dt N(u1))`,
/// `u3 = ⅓E(dt)u0 + ⅔E(dt/2)(u2 + dt N(u2))`.
pub fn step_relax(
    state: &RelaxState,
    dt: f64,
    control: &StepControl,
    eps: f64,
    model: &EnergyModel,
    sp: &Spectral,
) -> Result<RelaxState> {
    check_eps(eps)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if control.scheme != Scheme::ImexIntegratingFactor {
        return Err(Error::InvalidParameter(format!(
            "relaxation runs use the imex_integrating_factor scheme, got {:?}",
            control.scheme
        )));
    }
    let bound = cfl_dt(model, state, eps, 1.0, control.rho_min)?;
    if dt > bound * (1.0 + 1e-12) {
        log::warn!("step dt = {dt:e} exceeds the unit-safety CFL bound {bound:e}");
    }
    let z = dt / (eps * eps);
    let e_full = (-z).exp();
    let e_half = (-0.5 * z).exp();

    let r0 = rhs_relax_floor(model, state, eps, control.rho_min, sp)?;
    let rho1 = axpy(&state.rho, dt, &r0.rho_dot);
    let m1 = vaxpy(&state.m, dt, &r0.m_transport).scale(e_full);
    let s1 = floored(RelaxState { rho: rho1, m: m1, time: state.time + dt }, control.rho_min);

    let r1 = rhs_relax_floor(model, &s1, eps, control.rho_min, sp)?;
    let rho2 = scomb(0.75, &state.rho, 0.25, &axpy(&s1.rho, dt, &r1.rho_dot));
    let m2 = vcomb(0.75 * e_half, &state.m, 0.25 / e_half, &vaxpy(&s1.m, dt, &r1.m_transport));
    let s2 = floored(RelaxState { rho: rho2, m: m2, time: state.time + 0.5 * dt }, control.rho_min);

    let r2 = rhs_relax_floor(model, &s2, eps, control.rho_min, sp)?;
    let rho3 = scomb(1.0 / 3.0, &state.rho, 2.0 / 3.0, &axpy(&s2.rho, dt, &r2.rho_dot));
    let m3 = vcomb(e_full / 3.0, &state.m, 2.0 * e_half / 3.0, &vaxpy(&s2.m, dt, &r2.m_transport));
    let out = floored(RelaxState { rho: rho3, m: m3, time: state.time + dt }, control.rho_min);
    if !out.rho.is_finite() || !out.m.is_finite() {
        return Err(Error::NonFinite(format!("relaxation state at t = {}", out.time)));
    }
    Ok(out)
}

/// Floor `ρ` at `rho_min` and zero the momentum at floored nodes.
fn floored(state: RelaxState, rho_min: f64) -> RelaxState {
    if state.rho.min() >= rho_min {
        return state;
    }
    let mask: Vec<bool> = state.rho.values().iter().map(|&r| r < rho_min).collect();
    log::debug!("vacuum floor applied at {} nodes", mask.iter().filter(|&&b| b).count());
    let rho = state.rho.map(|r| r.max(rho_min));
    let grid = std::sync::Arc::clone(rho.grid());
    let m = state.m.map_components(|c| {
        ScalarField::from_raw(
            &grid,
            c.values().iter().zip(&mask).map(|(&v, &f)| if f { 0.0 } else { v }).collect(),
        )
    });
    RelaxState { rho, m, time: state.time }
}

/// One step of the limit flow: RK4 or the stabilized semi-implicit spectral step
/// `(1 + dt·L)ρ̂ⁿ⁺¹ = ρ̂ⁿ + dt(F̂ⁿ + L ρ̂ⁿ)`, `L = C_κρ_max|k|⁴ + p'(ρ_max)|k|²`.
pub fn step_limit(
    state: &LimitState,
    dt: f64,
    control: &StepControl,
    model: &EnergyModel,
    sp: &Spectral,
) -> Result<LimitState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let rho = match control.scheme {
        Scheme::ExplicitRk4 => {
            let bound = limit_dt_bound(model, &state.rho, 1.0);
            if dt > bound {
                log::warn!("limit step dt = {dt:e} exceeds the explicit stability bound {bound:e}");
            }
            let k1 = rhs_limit(model, &state.rho, sp)?;
            let k2 = rhs_limit(model, &axpy(&state.rho, 0.5 * dt, &k1), sp)?;
            let k3 = rhs_limit(model, &axpy(&state.rho, 0.5 * dt, &k2), sp)?;
            let k4 = rhs_limit(model, &axpy(&state.rho, dt, &k3), sp)?;
            let incr = ScalarField::from_raw(
                state.rho.grid(),
                (0..state.rho.len())
                    .map(|i| {
                        (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]) / 6.0
                    })
                    .collect(),
            );
            axpy(&state.rho, dt, &incr)
        }
        Scheme::SemiImplicitSpectral => {
            let f = rhs_limit(model, &state.rho, sp)?;
            let rmax = state.rho.max();
            let a = model.c_kappa() * rmax;
            let b = model.law().pressure_d1(rmax);
            let rho_hat = sp.forward(&state.rho);
            let f_hat = sp.forward(&f);
            let next = rho_hat
                .iter()
                .zip(&f_hat)
                .enumerate()
                .map(|(i, (r, fh))| {
                    let k2 = sp.k_squared(i);
                    let l = a * k2 * k2 + b * k2;
                    (r + dt * (fh + r * l)) / Complex64::new(1.0 + dt * l, 0.0)
                })
                .collect();
            sp.inverse(next)
        }
        Scheme::ImexIntegratingFactor => {
            return Err(Error::InvalidParameter(
                "limit runs use explicit_rk4 or semi_implicit_spectral".into(),
            ))
        }
    };
    if !rho.is_finite() {
        return Err(Error::NonFinite(format!("limit state at t = {}", state.time + dt)));
    }
    energetics::check_positive(&rho)?;
    Ok(LimitState { rho, time: state.time + dt })
}

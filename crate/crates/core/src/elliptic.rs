//! Screened Poisson solves `-△c + βc = ρ - <ρ>` and the associated estimates.

use rustfft::num_complex::Complex64;

use crate::energetics::{self, GammaLaw};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Spectral};

/// Zero-mean solution of `-△c + βc = ρ - <ρ>`.
pub fn solve_screened_poisson(rho: &ScalarField, beta: f64, sp: &Spectral) -> Result<ScalarField> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    let mut c = sp.forward(rho);
    c[0] = Complex64::new(0.0, 0.0);
    for (i, v) in c.iter_mut().enumerate().skip(1) {
        *v /= sp.k_squared(i) + beta;
    }
    Ok(sp.inverse(c))
}

/// `|∫(ρ-<ρ>)c - ∫(βc² + |∇c|²)|`.
pub fn energy_identity_residual(rho: &ScalarField, c: &ScalarField, beta: f64, sp: &Spectral) -> Result<f64> {
    rho.check_grid(c)?;
    let mean = rho.mean();
    let lhs = rho.map(|r| r - mean).inner(c);
    let rhs = beta * c.inner(c) + sp.dirichlet_energy(c);
    Ok((lhs - rhs).abs())
}

/// `‖-△c + βc - (ρ-<ρ>)‖₂ / ‖ρ-<ρ>‖₂` (0 when the source vanishes).
pub fn solver_residual(rho: &ScalarField, c: &ScalarField, beta: f64, sp: &Spectral) -> Result<f64> {
    rho.check_grid(c)?;
    let mean = rho.mean();
    let src = rho.map(|r| r - mean);
    let op = &c.scale(beta) - &sp.laplacian(c);
    let num = (&op - &src).l2_norm();
    let den = src.l2_norm();
    // A source at the round-off level of the mean subtraction is measured
    // against the density itself.
    let scale = rho.l2_norm();
    if den <= 64.0 * f64::EPSILON * scale {
        return Ok(if scale == 0.0 { num } else { num / scale });
    }
    Ok(num / den)
}

/// `∫(β|c-c̄|² + |∇(c-c̄)|²) / ‖ρ-ρ̄‖²_{L^q}`, with `0/0` reported as 0.
pub fn elliptic_ratio(rho: &ScalarField, rho_bar: &ScalarField, beta: f64, q: f64, sp: &Spectral) -> Result<f64> {
    rho.check_grid(rho_bar)?;
    let dim = rho.grid().dim() as f64;
    let lower = (2.0 * dim / (dim + 2.0)).max(1.0);
    let admissible = if dim >= 2.0 { q > lower } else { q >= lower };
    if !admissible || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "q = {q} is outside the embedding range for dimension {dim} (need q {} {lower})",
            if dim >= 2.0 { ">" } else { ">=" }
        )));
    }
    let delta = rho - rho_bar;
    let c = solve_screened_poisson(&delta, beta, sp)?;
    let lhs = beta * c.inner(&c) + sp.dirichlet_energy(&c);
    let den = delta.lq_norm(q)?.powi(2);
    Ok(if den == 0.0 { 0.0 } else { lhs / den })
}

/// `|∫(ρ-ρ̄)(c-c̄)| / ∫h(ρ|ρ̄)` for one sample; `None` when `∫h(ρ|ρ̄) = 0`.
pub fn k_ratio(
    rho: &ScalarField,
    rho_bar: &ScalarField,
    beta: f64,
    law: &GammaLaw,
    sp: &Spectral,
) -> Result<Option<f64>> {
    let h = energetics::relative_internal_energy(law, rho, rho_bar)?;
    if h <= 0.0 {
        return Ok(None);
    }
    let delta = rho - rho_bar;
    let c = solve_screened_poisson(&delta, beta, sp)?;
    Ok(Some(delta.inner(&c).abs() / h))
}

/// `K̂ = max_samples |∫(ρ-ρ̄)(c-c̄)| / ∫h(ρ|ρ̄)`.
pub fn estimate_k(
    samples: &[ScalarField],
    rho_bar: &ScalarField,
    beta: f64,
    law: &GammaLaw,
    sp: &Spectral,
) -> Result<f64> {
    energetics::check_positive(rho_bar)?;
    let mut best: Option<f64> = None;
    for s in samples {
        energetics::check_positive(s)?;
        if let Some(r) = k_ratio(s, rho_bar, beta, law, sp)? {
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best.ok_or_else(|| Error::NoSamples("every sample has zero relative energy".into()))
}

/// Outcome of the convexity condition `C_x < 2/K̂`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HcCheck {
    pub k_hat: f64,
    pub c_x: f64,
    /// `λ̂ = 1 - K̂C_x/2`.
    pub lambda: f64,
    pub passed: bool,
}

/// Advisory: a failed check is logged, not raised.
pub fn hc_check(k_hat: f64, c_x: f64) -> HcCheck {
    let lambda = 1.0 - 0.5 * k_hat * c_x;
    let passed = c_x * k_hat < 2.0;
    if !passed {
        log::warn!("convexity condition fails: C_x = {c_x}, K = {k_hat}, lambda = {lambda}");
    }
    HcCheck { k_hat, c_x, lambda, passed }
}

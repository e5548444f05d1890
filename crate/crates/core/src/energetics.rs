//! Pressure laws, energy functionals, variational derivatives and relative energies.

use serde_json::{json, Value};

use crate::elliptic;
use crate::error::{Error, Result};
use crate::field::{ScalarField, Spectral, VectorField};

/// Density floor below which momentum must vanish.
pub const DEFAULT_RHO_MIN: f64 = 1e-8;

/// `p(ρ) = kρ^γ`, `h(ρ) = k/(γ-1) ρ^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaLaw {
    k: f64,
    gamma: f64,
}

impl GammaLaw {
    pub fn new(k: f64, gamma: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
        }
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must exceed 1, got {gamma}")));
        }
        Ok(Self { k, gamma })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Constant `A` in `|p''| <= A p'/ρ`.
    pub fn a_constant(&self) -> f64 {
        self.gamma - 1.0
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        self.k * rho.powf(self.gamma)
    }

    pub fn pressure_d1(&self, rho: f64) -> f64 {
        self.k * self.gamma * rho.powf(self.gamma - 1.0)
    }

    pub fn pressure_d2(&self, rho: f64) -> f64 {
        self.k * self.gamma * (self.gamma - 1.0) * rho.powf(self.gamma - 2.0)
    }

    pub fn h(&self, rho: f64) -> f64 {
        self.k / (self.gamma - 1.0) * rho.powf(self.gamma)
    }

    pub fn h_d1(&self, rho: f64) -> f64 {
        self.k * self.gamma / (self.gamma - 1.0) * rho.powf(self.gamma - 1.0)
    }

    pub fn h_d2(&self, rho: f64) -> f64 {
        self.k * self.gamma * rho.powf(self.gamma - 2.0)
    }

    /// `(1+y)^γ - 1 - γy`, accurate for small `|y|`.
    fn taylor_remainder(&self, y: f64) -> f64 {
        let g = self.gamma;
        if y.abs() >= 0.1 {
            return (g * y.ln_1p()).exp_m1() - g * y;
        }
        let mut coef = g * (g - 1.0) / 2.0;
        let mut pow = y * y;
        let mut sum = 0.0;
        for n in 2..26 {
            sum += coef * pow;
            coef *= (g - n as f64) / (n as f64 + 1.0);
            pow *= y;
        }
        sum
    }

    /// `h(ρ|ρ̄) = h(ρ) - h(ρ̄) - h'(ρ̄)(ρ-ρ̄)` without cancellation.
    pub fn h_rel(&self, rho: f64, rho_bar: f64) -> f64 {
        self.k / (self.gamma - 1.0) * rho_bar.powf(self.gamma) * self.taylor_remainder(rho / rho_bar - 1.0)
    }

    /// `p(ρ|ρ̄) = p(ρ) - p(ρ̄) - p'(ρ̄)(ρ-ρ̄)`.
    pub fn p_rel(&self, rho: f64, rho_bar: f64) -> f64 {
        self.k * rho_bar.powf(self.gamma) * self.taylor_remainder(rho / rho_bar - 1.0)
    }

    /// Checked pointwise `h_rel`.
    pub fn h_rel_checked(&self, rho: f64, rho_bar: f64) -> Result<f64> {
        check_pair(rho, rho_bar, 0)?;
        Ok(self.h_rel(rho, rho_bar))
    }

    /// Checked pointwise `p_rel`.
    pub fn p_rel_checked(&self, rho: f64, rho_bar: f64) -> Result<f64> {
        check_pair(rho, rho_bar, 0)?;
        Ok(self.p_rel(rho, rho_bar))
    }

    pub fn to_json(&self) -> Value {
        json!({ "k": self.k, "gamma": self.gamma })
    }
}

fn check_pair(rho: f64, rho_bar: f64, index: usize) -> Result<()> {
    if !(rho >= 0.0) {
        return Err(Error::NegativeDensity { index, value: rho });
    }
    if !(rho_bar > 0.0) {
        return Err(Error::NonPositiveDensity { index, value: rho_bar });
    }
    Ok(())
}

pub(crate) fn check_nonnegative(rho: &ScalarField) -> Result<()> {
    match rho.values().iter().position(|&v| !(v >= 0.0)) {
        Some(index) => Err(Error::NegativeDensity { index, value: rho.values()[index] }),
        None => Ok(()),
    }
}

pub(crate) fn check_positive(rho: &ScalarField) -> Result<()> {
    match rho.values().iter().position(|&v| !(v > 0.0)) {
        Some(index) => Err(Error::NonPositiveDensity { index, value: rho.values()[index] }),
        None => Ok(()),
    }
}

/// `∫ h(ρ)`.
pub fn total_internal_energy(law: &GammaLaw, rho: &ScalarField) -> Result<f64> {
    check_nonnegative(rho)?;
    Ok(rho.map(|r| law.h(r)).integral())
}

/// Pointwise `h(ρ|ρ̄)`.
pub fn h_rel_field(law: &GammaLaw, rho: &ScalarField, rho_bar: &ScalarField) -> Result<ScalarField> {
    rho.check_grid(rho_bar)?;
    check_nonnegative(rho)?;
    check_positive(rho_bar)?;
    Ok(rho.zip_map(rho_bar, |a, b| law.h_rel(a, b)))
}

/// Pointwise `p(ρ|ρ̄)`.
pub fn p_rel_field(law: &GammaLaw, rho: &ScalarField, rho_bar: &ScalarField) -> Result<ScalarField> {
    rho.check_grid(rho_bar)?;
    check_nonnegative(rho)?;
    check_positive(rho_bar)?;
    Ok(rho.zip_map(rho_bar, |a, b| law.p_rel(a, b)))
}

/// `∫ h(ρ|ρ̄)`.
pub fn relative_internal_energy(law: &GammaLaw, rho: &ScalarField, rho_bar: &ScalarField) -> Result<f64> {
    Ok(h_rel_field(law, rho, rho_bar)?.integral())
}

/// Energy functional selecting the relaxation system and its gradient-flow limit.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyModel {
    /// `E = ∫h (+ ∫ρV)`; limit: porous medium.
    Euler { law: GammaLaw, confinement: Option<ScalarField> },
    /// `E = ∫(h - ½C_x ρc)` with `-△c + βc = ρ - <ρ>`; limit: Keller–Segel.
    EulerPoisson { law: GammaLaw, c_x: f64, beta: f64, hc_passed: Option<bool> },
    /// `E = ∫(h + ½C_κ|∇ρ|²)`; limit: Cahn–Hilliard.
    EulerKorteweg { law: GammaLaw, c_kappa: f64 },
}

impl EnergyModel {
    pub fn euler(law: GammaLaw) -> Self {
        Self::Euler { law, confinement: None }
    }

    pub fn euler_confined(law: GammaLaw, potential: ScalarField) -> Result<Self> {
        if !potential.is_finite() {
            return Err(Error::NonFinite("confinement potential".into()));
        }
        Ok(Self::Euler { law, confinement: Some(potential) })
    }

    pub fn euler_poisson(law: GammaLaw, c_x: f64, beta: f64) -> Result<Self> {
        if !(c_x.is_finite() && c_x > 0.0) {
            return Err(Error::InvalidParameter(format!("C_x must be positive, got {c_x}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self::EulerPoisson { law, c_x, beta, hc_passed: None })
    }

    pub fn euler_korteweg(law: GammaLaw, c_kappa: f64) -> Result<Self> {
        if !(c_kappa.is_finite() && c_kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("C_kappa must be positive, got {c_kappa}")));
        }
        Ok(Self::EulerKorteweg { law, c_kappa })
    }

    pub fn law(&self) -> &GammaLaw {
        match self {
            Self::Euler { law, .. } | Self::EulerPoisson { law, .. } | Self::EulerKorteweg { law, .. } => law,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Euler { .. } => "euler",
            Self::EulerPoisson { .. } => "euler_poisson",
            Self::EulerKorteweg { .. } => "euler_korteweg",
        }
    }

    pub fn limit_name(&self) -> &'static str {
        match self {
            Self::Euler { .. } => "porous_medium",
            Self::EulerPoisson { .. } => "keller_segel",
            Self::EulerKorteweg { .. } => "cahn_hilliard",
        }
    }

    pub fn c_kappa(&self) -> f64 {
        match self {
            Self::EulerKorteweg { c_kappa, .. } => *c_kappa,
            _ => 0.0,
        }
    }

    /// Records the outcome of the `C_x < 2/K̂` check (Euler–Poisson only).
    pub fn record_hc(&mut self, passed: bool) {
        if let Self::EulerPoisson { hc_passed, .. } = self {
            *hc_passed = Some(passed);
        }
    }

    pub fn parameters_json(&self) -> Value {
        let law = self.law().to_json();
        match self {
            Self::Euler { confinement, .. } => {
                json!({ "law": law, "confinement": confinement.is_some() })
            }
            Self::EulerPoisson { c_x, beta, hc_passed, .. } => {
                json!({ "law": law, "c_x": c_x, "beta": beta, "hc_passed": hc_passed })
            }
            Self::EulerKorteweg { c_kappa, .. } => json!({ "law": law, "c_kappa": c_kappa }),
        }
    }

    fn check_confinement(&self, rho: &ScalarField) -> Result<()> {
        if let Self::Euler { confinement: Some(v), .. } = self {
            rho.check_grid(v)?;
        }
        Ok(())
    }

    /// Chemoattractant `c` for Euler–Poisson, `None` otherwise.
    pub fn potential_field(&self, rho: &ScalarField, sp: &Spectral) -> Result<Option<ScalarField>> {
        match self {
            Self::EulerPoisson { beta, .. } => Ok(Some(elliptic::solve_screened_poisson(rho, *beta, sp)?)),
            _ => Ok(None),
        }
    }

    /// `E(ρ)` (including `∫ρV` when confined).
    pub fn potential_energy(&self, rho: &ScalarField, sp: &Spectral) -> Result<f64> {
        self.check_confinement(rho)?;
        let internal = total_internal_energy(self.law(), rho)?;
        Ok(match self {
            Self::Euler { confinement, .. } => internal + confinement.as_ref().map_or(0.0, |v| rho.inner(v)),
            Self::EulerPoisson { c_x, beta, .. } => {
                let c = elliptic::solve_screened_poisson(rho, *beta, sp)?;
                internal - 0.5 * c_x * rho.inner(&c)
            }
            Self::EulerKorteweg { c_kappa, .. } => {
                internal + 0.5 * c_kappa * sp.dirichlet_energy(rho)
            }
        })
    }

    /// `δE/δρ`: `h'(ρ) (+V)`, `h'(ρ) - C_x c`, or `h'(ρ) - C_κ△ρ`.
    pub fn variational_derivative(&self, rho: &ScalarField, sp: &Spectral) -> Result<ScalarField> {
        self.check_confinement(rho)?;
        check_nonnegative(rho)?;
        let law = self.law();
        let hp = rho.map(|r| law.h_d1(r));
        Ok(match self {
            Self::Euler { confinement, .. } => match confinement {
                Some(v) => &hp + v,
                None => hp,
            },
            Self::EulerPoisson { c_x, beta, .. } => {
                let c = elliptic::solve_screened_poisson(rho, *beta, sp)?;
                &hp - &c.scale(*c_x)
            }
            Self::EulerKorteweg { c_kappa, .. } => &hp - &sp.laplacian(rho).scale(*c_kappa),
        })
    }

    /// `E(ρ|ρ̄) = E(ρ) - E(ρ̄) - <δE/δρ(ρ̄), ρ-ρ̄>`.
    pub fn relative_potential_energy(&self, rho: &ScalarField, rho_bar: &ScalarField, sp: &Spectral) -> Result<f64> {
        let base = relative_internal_energy(self.law(), rho, rho_bar)?;
        Ok(match self {
            Self::Euler { .. } => base,
            Self::EulerPoisson { c_x, beta, .. } => {
                let delta = rho - rho_bar;
                let c_delta = elliptic::solve_screened_poisson(&delta, *beta, sp)?;
                base - 0.5 * c_x * delta.inner(&c_delta)
            }
            Self::EulerKorteweg { c_kappa, .. } => {
                base + 0.5 * c_kappa * sp.dirichlet_energy(&(rho - rho_bar))
            }
        })
    }
}

/// Central-difference ladder for the first variation of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateauxLadder {
    pub taus: Vec<f64>,
    /// `<δE/δρ, ψ>`.
    pub directional: f64,
    pub residuals: Vec<f64>,
    /// Residuals divided by `|<δE/δρ, ψ>|` (absolute when that vanishes).
    pub relative: Vec<f64>,
    /// Observed convergence orders between consecutive `τ`.
    pub rates: Vec<f64>,
}

/// `r(τ) = |(E(ρ+τψ) - E(ρ-τψ))/(2τ) - <δE/δρ, ψ>|` over the ladder.
pub fn gateaux_check(
    model: &EnergyModel,
    rho: &ScalarField,
    psi: &ScalarField,
    taus: &[f64],
    sp: &Spectral,
) -> Result<GateauxLadder> {
    rho.check_grid(psi)?;
    if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidParameter("tau ladder must be positive".into()));
    }
    let mu = model.variational_derivative(rho, sp)?;
    let directional = mu.inner(psi);
    let mut residuals = Vec::with_capacity(taus.len());
    for &tau in taus {
        let plus = rho + &psi.scale(tau);
        let minus = rho - &psi.scale(tau);
        check_positive(&plus)?;
        check_positive(&minus)?;
        let fd = (model.potential_energy(&plus, sp)? - model.potential_energy(&minus, sp)?) / (2.0 * tau);
        residuals.push((fd - directional).abs());
    }
    let scale = if directional.abs() > 0.0 { directional.abs() } else { 1.0 };
    let relative = residuals.iter().map(|r| r / scale).collect();
    let rates = residuals
        .windows(2)
        .zip(taus.windows(2))
        .map(|(r, t)| (r[0] / r[1]).ln() / (t[0] / t[1]).ln())
        .collect();
    Ok(GateauxLadder { taus: taus.to_vec(), directional, residuals, relative, rates })
}

/// Velocity `m/ρ`, zero at floored nodes; errors on vacuum under momentum.
pub fn velocity(rho: &ScalarField, m: &VectorField, rho_min: f64) -> Result<VectorField> {
    rho.check_grid(m.component(0))?;
    check_nonnegative(rho)?;
    let comps = m
        .components()
        .iter()
        .map(|mc| {
            let mut out = Vec::with_capacity(rho.len());
            for (i, (&r, &mv)) in rho.values().iter().zip(mc.values()).enumerate() {
                if r > rho_min {
                    out.push(mv / r);
                } else if mv == 0.0 {
                    out.push(0.0);
                } else {
                    return Err(Error::Vacuum { index: i, rho: r });
                }
            }
            Ok(ScalarField::from_raw(rho.grid(), out))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorField::from_raw(comps))
}

/// `K = ∫ ½|m|²/ρ`.
pub fn kinetic_energy(rho: &ScalarField, m: &VectorField) -> Result<f64> {
    kinetic_energy_floor(rho, m, DEFAULT_RHO_MIN)
}

pub fn kinetic_energy_floor(rho: &ScalarField, m: &VectorField, rho_min: f64) -> Result<f64> {
    let u = velocity(rho, m, rho_min)?;
    Ok(0.5 * u.dot(m).integral())
}

/// `½∫ρ|m/ρ - m̄/ρ̄|²`.
pub fn relative_kinetic(rho: &ScalarField, m: &VectorField, rho_bar: &ScalarField, m_bar: &VectorField) -> Result<f64> {
    relative_kinetic_floor(rho, m, rho_bar, m_bar, DEFAULT_RHO_MIN)
}

pub fn relative_kinetic_floor(
    rho: &ScalarField,
    m: &VectorField,
    rho_bar: &ScalarField,
    m_bar: &VectorField,
    rho_min: f64,
) -> Result<f64> {
    rho.check_grid(rho_bar)?;
    check_positive(rho_bar)?;
    let u = velocity(rho, m, rho_min)?;
    let u_bar = velocity(rho_bar, m_bar, 0.0)?;
    let w = &u - &u_bar;
    Ok(0.5 * w.norm_sq().inner(rho))
}

/// `q = ½ m|m|²/ρ² + m h'(ρ)`.
pub fn entropy_flux(law: &GammaLaw, rho: &ScalarField, m: &VectorField) -> Result<VectorField> {
    rho.check_grid(m.component(0))?;
    check_positive(rho)?;
    let msq = m.norm_sq();
    let factor = ScalarField::from_raw(
        rho.grid(),
        rho.values()
            .iter()
            .zip(msq.values())
            .map(|(&r, &s)| 0.5 * s / (r * r) + law.h_d1(r))
            .collect(),
    );
    Ok(m.scale_by(&factor))
}

/// Minimizer of a ratio over a sampled box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioMinimum {
    pub value: f64,
    pub rho: f64,
    pub rho_bar: f64,
}

/// Minimum of `h(ρ|ρ̄)/|ρ-ρ̄|^q` over a box, by a corner-inclusive grid search
/// followed by golden-section polishing. Diagonal points `ρ = ρ̄` are skipped.
pub fn min_relative_energy_ratio(
    law: &GammaLaw,
    q: f64,
    rho: (f64, f64),
    rho_bar: (f64, f64),
    samples: usize,
) -> RatioMinimum {
    let ratio = |r: f64, rb: f64| {
        let d = (r - rb).abs();
        if d < 1e-9 * rb {
            f64::INFINITY
        } else {
            law.h_rel(r, rb) / d.powf(q)
        }
    };
    let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (samples - 1) as f64;
    let mut best = RatioMinimum { value: f64::INFINITY, rho: rho.0, rho_bar: rho_bar.0 };
    for i in 0..samples {
        let r = lin(rho.0, rho.1, i);
        for j in 0..samples {
            let rb = lin(rho_bar.0, rho_bar.1, j);
            let v = ratio(r, rb);
            if v < best.value {
                best = RatioMinimum { value: v, rho: r, rho_bar: rb };
            }
        }
    }
    let hr = (rho.1 - rho.0) / (samples - 1) as f64;
    let hb = (rho_bar.1 - rho_bar.0) / (samples - 1) as f64;
    for _ in 0..4 {
        let lo = (best.rho - hr).max(rho.0);
        let hi = (best.rho + hr).min(rho.1);
        let r = golden_min(|x| ratio(x, best.rho_bar), lo, hi);
        let v = ratio(r, best.rho_bar);
        if v < best.value {
            best = RatioMinimum { value: v, rho: r, rho_bar: best.rho_bar };
        }
        let lo = (best.rho_bar - hb).max(rho_bar.0);
        let hi = (best.rho_bar + hb).min(rho_bar.1);
        let rb = golden_min(|x| ratio(best.rho, x), lo, hi);
        let v = ratio(best.rho, rb);
        if v < best.value {
            best = RatioMinimum { value: v, rho: best.rho, rho_bar: rb };
        }
    }
    best
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    [a, b, x].into_iter().fold(x, |best, t| if f(t) < f(best) { t } else { best })
}

mod common;

use std::f64::consts::PI;

use common::{dense_solve, grid1, grid2, random_density, random_field, rng};
use gradflow_core::elliptic::{
    elliptic_ratio, energy_identity_residual, estimate_k, hc_check, k_ratio, solve_screened_poisson, solver_residual,
};
use gradflow_core::energetics::{self, GammaLaw};
use gradflow_core::field::{ScalarField, Spectral, TorusGrid};
use proptest::prelude::*;

fn law2() -> GammaLaw {
    GammaLaw::new(1.0, 2.0).unwrap()
}

#[test]
fn eigenfunction_examples() {
    let g = grid1(32);
    let sp = Spectral::new(&g);
    let rho = ScalarField::from_fn(&g, |x| 1.0 + x[0].cos());
    let c = solve_screened_poisson(&rho, 1.0, &sp).unwrap();
    assert!((&c - &ScalarField::from_fn(&g, |x| 0.5 * x[0].cos())).max_abs() < 1e-14);
    let rho = ScalarField::from_fn(&g, |x| 3.0 + (2.0 * x[0]).cos());
    let c = solve_screened_poisson(&rho, 0.0, &sp).unwrap();
    assert!((&c - &ScalarField::from_fn(&g, |x| 0.25 * (2.0 * x[0]).cos())).max_abs() < 1e-14);
    assert!(solve_screened_poisson(&rho, -0.5, &sp).is_err());
}

#[test]
fn spectral_solve_matches_dense_direct_solve() {
    for (g, seed) in [(grid1(32), 1), (grid2(16), 2)] {
        let sp = Spectral::new(&g);
        let mut r = rng(seed);
        for beta in [0.0, 0.3, 1.0, 10.0] {
            // Full-spectrum random data, Nyquist included.
            let values = (0..g.len()).map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0)).collect();
            let f = ScalarField::new(&g, values).unwrap();
            let spectral = solve_screened_poisson(&f, beta, &sp).unwrap();
            let dense = dense_solve(&g, &f, beta);
            let err = (&spectral - &dense).max_abs();
            assert!(err < 1e-10, "dim {} beta {beta}: {err:e}", g.dim());
        }
    }
}

#[test]
fn energy_identity_examples() {
    let g = grid1(64);
    let sp = Spectral::new(&g);
    let uniform = ScalarField::constant(&g, 1.4);
    let c = solve_screened_poisson(&uniform, 1.0, &sp).unwrap();
    assert_eq!(c.max_abs(), 0.0);
    assert_eq!(energy_identity_residual(&uniform, &c, 1.0, &sp).unwrap(), 0.0);

    let rho = ScalarField::from_fn(&g, |x| 2.0 + x[0].cos());
    let c = solve_screened_poisson(&rho, 1.0, &sp).unwrap();
    // ∫(ρ-<ρ>)c = ∫½cos² = π/2 = ∫(c² + |∇c|²).
    let lhs = rho.map(|v| v - 2.0).inner(&c);
    assert!((lhs - 0.5 * PI).abs() < 1e-13);
    assert!(energy_identity_residual(&rho, &c, 1.0, &sp).unwrap() < 1e-12);
}

#[test]
fn elliptic_ratio_examples() {
    let g = grid1(64);
    let sp = Spectral::new(&g);
    let rb = ScalarField::constant(&g, 1.0);
    assert_eq!(elliptic_ratio(&rb, &rb, 0.0, 2.0, &sp).unwrap(), 0.0);
    // ρ - ρ̄ = cos x, β = 0: c - c̄ = cos x, ∫|∇(c-c̄)|² = π = ‖ρ-ρ̄‖²₂.
    let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.5 * x[0].cos());
    let delta_unit = ScalarField::from_fn(&g, |x| x[0].cos());
    let ratio = elliptic_ratio(&(&rb + &delta_unit), &rb, 0.0, 2.0, &sp).unwrap();
    assert!((ratio - 1.0).abs() < 1e-13, "{ratio}");
    // Quadratic in the perturbation on both sides.
    assert!((elliptic_ratio(&rho, &rb, 0.0, 2.0, &sp).unwrap() - 1.0).abs() < 1e-13);
}

#[test]
fn elliptic_ratio_rejects_inadmissible_exponents() {
    let g1 = grid1(16);
    let g2 = grid2(16);
    let (s1, s2) = (Spectral::new(&g1), Spectral::new(&g2));
    let a = ScalarField::constant(&g1, 1.0);
    let b = ScalarField::constant(&g2, 1.0);
    assert!(elliptic_ratio(&a, &a, 1.0, 0.9, &s1).is_err());
    assert!(elliptic_ratio(&a, &a, 1.0, 1.0, &s1).is_ok());
    assert!(elliptic_ratio(&b, &b, 1.0, 1.0, &s2).is_err());
    assert!(elliptic_ratio(&b, &b, 1.0, 1.01, &s2).is_ok());
}

#[test]
fn elliptic_ratio_is_bounded_and_resolution_stable() {
    // The same 100 band-limited pairs sampled at increasing resolution.
    let mut maxima = Vec::new();
    for n in [32, 64, 128] {
        let g = grid1(n);
        let sp = Spectral::new(&g);
        let mut r = rng(21);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let a = random_density(&g, 1.0, 0.4, 5, &mut r);
            let b = random_density(&g, 1.0, 0.4, 5, &mut r);
            let ratio = elliptic_ratio(&a, &b, 0.0, 1.5, &sp).unwrap();
            assert!(ratio.is_finite() && ratio >= 0.0);
            worst = worst.max(ratio);
        }
        maxima.push(worst);
    }
    // |ρ-ρ̄|^q has kinks at sign changes, so the quadrature converges
    // algebraically: the max is monotone with shrinking increments.
    let steps: Vec<f64> = maxima.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(steps.iter().all(|d| *d <= 0.0) || steps.iter().all(|d| *d >= 0.0), "{maxima:?}");
    assert!(steps[1].abs() < 0.5 * steps[0].abs(), "{maxima:?}");
    assert!(steps[0].abs() < 1e-3 * maxima[0]);
}

#[test]
fn k_estimate_single_mode() {
    let g = grid1(64);
    let sp = Spectral::new(&g);
    let rb = ScalarField::constant(&g, 1.0);
    let rho = ScalarField::from_fn(&g, |x| 1.0 + 0.1 * x[0].cos());
    // β = 0: c - c̄ = 0.1cos x, ∫(ρ-ρ̄)(c-c̄) = 0.01π = ∫h(ρ|ρ̄), ratio 1.
    let k0 = estimate_k(std::slice::from_ref(&rho), &rb, 0.0, &law2(), &sp).unwrap();
    assert!((k0 - 1.0).abs() < 1e-12, "{k0}");
    // β = 1 halves c - c̄.
    let k1 = estimate_k(std::slice::from_ref(&rho), &rb, 1.0, &law2(), &sp).unwrap();
    assert!((k1 - 0.5).abs() < 1e-12, "{k1}");
    assert!(estimate_k(&[rb.clone(), rb.clone()], &rb, 0.0, &law2(), &sp).is_err());
    assert!(k_ratio(&rb, &rb, 0.0, &law2(), &sp).unwrap().is_none());
}

#[test]
fn k_estimate_respects_the_analytic_constant() {
    // γ = 2, k = 1: ∫(ρ-ρ̄)(c-c̄) = Σ|δ̂|²/(|k|²+β) ≤ ∫h(ρ|ρ̄)/(1+β).
    let g = grid2(16);
    let sp = Spectral::new(&g);
    let mut r = rng(22);
    let rb = random_density(&g, 1.0, 0.2, 3, &mut r);
    let samples: Vec<_> = (0..40).map(|_| &rb + &random_field(&g, 4, &mut r).scale(0.3)).collect();
    for beta in [0.5, 1.0, 4.0] {
        let k = estimate_k(&samples, &rb, beta, &law2(), &sp).unwrap();
        assert!(k <= 1.0 / (1.0 + beta) * (1.0 + 1e-12));
        let hc = hc_check(k, 0.1);
        assert!(hc.passed && hc.lambda > 0.0);
        for s in &samples {
            let h = energetics::relative_internal_energy(&law2(), s, &rb).unwrap();
            let delta = s - &rb;
            let cd = solve_screened_poisson(&delta, beta, &sp).unwrap();
            let total = h - 0.05 * delta.inner(&cd);
            assert!(total >= hc.lambda * h * (1.0 - 1e-12));
        }
    }
    let fail = hc_check(1.0, 3.0);
    assert!(!fail.passed && fail.lambda < 0.0);
}

fn density(dim: usize, n: usize) -> impl Strategy<Value = ScalarField> {
    any::<u64>().prop_map(move |seed| {
        let g = TorusGrid::periodic(dim, n).unwrap();
        random_density(&g, 1.0, 0.5, (n / 4) as i32, &mut rng(seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_residual_mean_and_energy_identity(rho in prop_oneof![density(1, 64), density(2, 16)], beta in 0.0..5.0f64) {
        let sp = Spectral::new(rho.grid());
        let c = solve_screened_poisson(&rho, beta, &sp).unwrap();
        prop_assert!(solver_residual(&rho, &c, beta, &sp).unwrap() <= 1e-10);
        prop_assert!(c.mean().abs() <= 1e-14);
        let scale = sp.dirichlet_energy(&c) + beta * c.inner(&c);
        prop_assert!(energy_identity_residual(&rho, &c, beta, &sp).unwrap() <= 1e-10 * scale);
    }

    #[test]
    fn k_estimate_is_nondecreasing_in_samples(seed in any::<u64>()) {
        let g = grid1(32);
        let sp = Spectral::new(&g);
        let mut r = rng(seed);
        let rb = random_density(&g, 1.0, 0.3, 4, &mut r);
        let samples: Vec<_> = (0..8).map(|_| random_density(&g, 1.0, 0.4, 6, &mut r)).collect();
        let mut prev = 0.0;
        for k in 1..=samples.len() {
            let est = estimate_k(&samples[..k], &rb, 0.5, &law2(), &sp).unwrap();
            prop_assert!(est >= prev);
            prev = est;
        }
    }
}

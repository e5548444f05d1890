#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use gradflow_core::field::{ScalarField, TorusGrid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid1(n: usize) -> Arc<TorusGrid> {
    TorusGrid::periodic(1, n).unwrap()
}

pub fn grid2(n: usize) -> Arc<TorusGrid> {
    TorusGrid::periodic(2, n).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random trigonometric polynomial with modes up to `kmax` per axis, as a closure.
pub struct Trig {
    dim: usize,
    terms: Vec<([f64; 2], f64, f64)>,
    length: f64,
}

impl Trig {
    pub fn random(dim: usize, kmax: i32, rng: &mut ChaCha8Rng, length: f64) -> Self {
        let mut terms = Vec::new();
        let ky_range = if dim == 2 { -kmax..=kmax } else { 0..=0 };
        for kx in 0..=kmax {
            for ky in ky_range.clone() {
                if kx == 0 && ky <= 0 {
                    continue;
                }
                terms.push(([kx as f64, ky as f64], rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        Self { dim, terms, length }
    }

    fn phase(&self, k: &[f64; 2], x: &[f64]) -> f64 {
        let w = 2.0 * PI / self.length;
        (0..self.dim).map(|a| w * k[a] * x[a]).sum()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(k, a, b)| {
            let t = self.phase(k, x);
            a * t.cos() + b * t.sin()
        }).sum()
    }

    pub fn derivative(&self, x: &[f64], axis: usize) -> f64 {
        let w = 2.0 * PI / self.length;
        self.terms.iter().map(|(k, a, b)| {
            let t = self.phase(k, x);
            w * k[axis] * (-a * t.sin() + b * t.cos())
        }).sum()
    }

    pub fn sample(&self, grid: &Arc<TorusGrid>) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.value(x))
    }
}

/// Random band-limited field (modes up to `kmax`), scaled to unit max norm.
pub fn random_field(grid: &Arc<TorusGrid>, kmax: i32, rng: &mut ChaCha8Rng) -> ScalarField {
    let f = Trig::random(grid.dim(), kmax, rng, grid.length()).sample(grid);
    let s = f.max_abs();
    f.scale(1.0 / s)
}

/// Positive density `base + amp·(unit random field)`.
pub fn random_density(grid: &Arc<TorusGrid>, base: f64, amp: f64, kmax: i32, rng: &mut ChaCha8Rng) -> ScalarField {
    let f = random_field(grid, kmax, rng);
    f.map(|v| base + amp * v)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) + rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Second-derivative matrix of the trigonometric interpolant on `N` (even)
/// equispaced points of `[0, 2π)`, from its closed-form entries.
pub fn d2_matrix(n: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -PI * PI / (3.0 * h * h) - 1.0 / 6.0
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            -sign / (2.0 * (0.5 * d * h).sin().powi(2))
        }
    })
}

/// Dense solve of `(-Δ + β) c = f - <f>`; the rank-one mean term pins the
/// zero-mean solution when `β = 0`.
pub fn dense_solve(grid: &Arc<TorusGrid>, f: &ScalarField, beta: f64) -> ScalarField {
    let n = grid.n();
    let d2 = d2_matrix(n);
    let lap = if grid.dim() == 1 {
        d2
    } else {
        let id = DMatrix::<f64>::identity(n, n);
        d2.kronecker(&id) + id.kronecker(&d2)
    };
    let size = grid.len();
    let mut op = -lap + DMatrix::<f64>::identity(size, size) * beta;
    if beta == 0.0 {
        op += DMatrix::from_element(size, size, 1.0 / size as f64);
    }
    let mean = f.mean();
    let rhs = DVector::from_iterator(size, f.values().iter().map(|v| v - mean));
    let c = op.lu().solve(&rhs).expect("dense operator is invertible");
    ScalarField::new(grid, c.iter().copied().collect()).unwrap()
}

//! Periodic torus grids, collocation fields and Fourier-spectral calculus.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, L)^dim` with `n` points per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    length: f64,
    wavenumbers: Vec<f64>,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Arc<Self>> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        let wavenumbers = (0..n)
            .map(|j| 2.0 * PI * signed_index(j, n) as f64 / length)
            .collect();
        Ok(Arc::new(Self { dim, n, length, wavenumbers }))
    }

    /// Grid on the standard torus `[0, 2π)^dim`.
    pub fn periodic(dim: usize, n: usize) -> Result<Arc<Self>> {
        Self::new(dim, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of collocation nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn measure(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Per-axis wavenumbers `2πj/L` in FFT order; the Nyquist entry carries `-πN/L`.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Largest resolved wavenumber magnitude.
    pub fn k_max(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    /// Signed mode index of FFT slot `j`.
    pub fn mode_index(&self, j: usize) -> i64 {
        signed_index(j, self.n)
    }

    /// Coordinates of node `flat` (unused trailing entries are zero).
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [flat as f64 * h, 0.0],
            _ => [(flat / self.n) as f64 * h, (flat % self.n) as f64 * h],
        }
    }

    pub fn axis_coordinates(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|i| i as f64 * h).collect()
    }

    pub fn same_shape(&self, other: &TorusGrid) -> bool {
        self.dim == other.dim && self.n == other.n && self.length == other.length
    }
}

fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

fn ensure_grid(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Real scalar field sampled at the grid nodes (row-major, last axis fastest).
#[derive(Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.grid.dim)
            .field("n", &self.grid.n)
            .field("min", &self.min())
            .field("max", &self.max())
            .finish()
    }
}

impl ScalarField {
    /// Checked constructor: length must match the grid and all values be finite.
    pub fn new(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field".into()));
        }
        Ok(Self { grid: Arc::clone(grid), values })
    }

    pub(crate) fn from_raw(grid: &Arc<TorusGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid: Arc::clone(grid), values }
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<TorusGrid>, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.len()])
    }

    /// Samples `f(x)` at every node; `x` has `dim` entries.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim;
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..d])
            })
            .collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination. Panics if the grids differ.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(self.grid.same_shape(&other.grid), "zip_map on mismatched grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::from_raw(&self.grid, values)
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        ensure_grid(&self.grid, &other.grid)
    }

    /// Pointwise product without dealiasing.
    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Torus average `Σf / N^dim`.
    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.sum()
    }

    /// `L^q` norm by collocation quadrature; `q = ∞` gives the max norm.
    pub fn lq_norm(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidParameter(format!("lq_norm needs q >= 1, got {q}")));
        }
        if q.is_infinite() {
            return Ok(self.max_abs());
        }
        if q == 2.0 {
            return Ok(self.l2_norm());
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(q)).sum();
        Ok((self.grid.cell_volume() * s).powf(1.0 / q))
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ f g` by collocation quadrature.
    pub fn inner(&self, other: &Self) -> f64 {
        assert!(self.grid.same_shape(&other.grid), "inner on mismatched grids");
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        self.grid.cell_volume() * s
    }

    /// Writes the field dump format: a grid header followed by one value per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.len() * 24 + 64);
        out.push_str(&format!(
            "# grid dim={} n={} L={}\n",
            self.grid.dim, self.grid.n, self.grid.length
        ));
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Reads a field dump written by [`ScalarField::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Io("empty field file".into()))?;
        let (mut dim, mut n, mut len) = (None, None, None);
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("dim=") {
                dim = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("L=") {
                len = v.parse::<f64>().ok();
            }
        }
        let (Some(dim), Some(n), Some(len)) = (dim, n, len) else {
            return Err(Error::Io(format!("bad field header: {header}")));
        };
        let grid = TorusGrid::new(dim, n, len)?;
        let values = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|e| Error::Io(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(&grid, values)
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

/// `dim` scalar components on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidParameter("vector field needs components".into()))?;
        if components.len() != first.grid.dim {
            return Err(Error::InvalidParameter(format!(
                "vector field on a {}-d grid needs {} components, got {}",
                first.grid.dim,
                first.grid.dim,
                components.len()
            )));
        }
        for c in &components[1..] {
            first.check_grid(c)?;
        }
        Ok(Self { components })
    }

    pub(crate) fn from_raw(components: Vec<ScalarField>) -> Self {
        Self { components }
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::from_raw((0..grid.dim).map(|_| ScalarField::zeros(grid)).collect())
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::from_raw(self.components.iter().map(f).collect())
    }

    pub fn zip_components(
        &self,
        other: &Self,
        f: impl Fn(&ScalarField, &ScalarField) -> ScalarField,
    ) -> Self {
        Self::from_raw(self.components.iter().zip(&other.components).map(|(a, b)| f(a, b)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_components(|c| c.scale(s))
    }

    /// Multiplies every component pointwise by `s` (no dealiasing).
    pub fn scale_by(&self, s: &ScalarField) -> Self {
        self.map_components(|c| c.mul(s))
    }

    /// Pointwise `v·w`.
    pub fn dot(&self, other: &Self) -> ScalarField {
        let mut acc = self.components[0].mul(&other.components[0]);
        for (a, b) in self.components.iter().zip(&other.components).skip(1) {
            acc = &acc + &a.mul(b);
        }
        acc
    }

    pub fn norm_sq(&self) -> ScalarField {
        self.dot(self)
    }

    /// `‖v‖₂ = (∫|v|²)^½`.
    pub fn l2_norm(&self) -> f64 {
        self.components.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: Self) -> VectorField {
        self.zip_components(rhs, |a, b| a + b)
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: Self) -> VectorField {
        self.zip_components(rhs, |a, b| a - b)
    }
}

/// Square `dim × dim` tensor field stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    dim: usize,
    entries: Vec<ScalarField>,
}

impl TensorField {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> ScalarField) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    /// `s·I`.
    pub fn isotropic(s: &ScalarField) -> Self {
        let dim = s.grid().dim();
        Self::from_fn(dim, |i, j| if i == j { s.clone() } else { ScalarField::zeros(s.grid()) })
    }

    /// Pointwise `a ⊗ b` (no dealiasing).
    pub fn outer(a: &VectorField, b: &VectorField) -> Self {
        Self::from_fn(a.dim(), |i, j| a.component(i).mul(b.component(j)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.dim + j]
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.entries[0].grid()
    }

    pub fn row(&self, i: usize) -> VectorField {
        VectorField::from_raw((0..self.dim).map(|j| self.get(i, j).clone()).collect())
    }

    pub fn map_entries(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(f).collect() }
    }

    pub fn zip_entries(&self, other: &Self, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_entries(|e| e.scale(s))
    }

    /// Pointwise double contraction `A : B = Σ A_ij B_ij`.
    pub fn contract(&self, other: &Self) -> ScalarField {
        let mut acc = self.entries[0].mul(&other.entries[0]);
        for (a, b) in self.entries.iter().zip(&other.entries).skip(1) {
            acc = &acc + &a.mul(b);
        }
        acc
    }

    /// Pointwise `(A v)_i = Σ_j A_ij v_j`.
    pub fn apply(&self, v: &VectorField) -> VectorField {
        VectorField::from_raw((0..self.dim).map(|i| self.row(i).dot(v)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }

    /// Frobenius `L²` norm `(∫ Σ A_ij²)^½`.
    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.l2_norm().powi(2)).sum::<f64>().sqrt()
    }
}

impl Add for &TensorField {
    type Output = TensorField;
    fn add(self, rhs: Self) -> TensorField {
        self.zip_entries(rhs, |a, b| a + b)
    }
}

impl Sub for &TensorField {
    type Output = TensorField;
    fn sub(self, rhs: Self) -> TensorField {
        self.zip_entries(rhs, |a, b| a - b)
    }
}

/// FFT plans, wavenumber tables and the 2/3 dealias mask for one grid.
///
/// Methods take `&self`; each concurrent run should still own its workspace.
#[derive(Clone)]
pub struct Spectral {
    grid: Arc<TorusGrid>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Odd-derivative symbol: Nyquist slot zeroed.
    k_odd: Vec<f64>,
    /// Even-derivative symbol: Nyquist kept as `πN/L`.
    k_even: Vec<f64>,
    keep: Vec<bool>,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &Arc<TorusGrid>) -> Self {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut k_odd = grid.wavenumbers.clone();
        k_odd[n / 2] = 0.0;
        let mut k_even = grid.wavenumbers.clone();
        k_even[n / 2] = grid.k_max();
        let keep = (0..n).map(|j| 3 * grid.mode_index(j).unsigned_abs() as usize <= n).collect();
        Self { grid: Arc::clone(grid), forward, inverse, k_odd, k_even, keep }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let n = self.grid.n;
        plan.process(buf);
        if self.grid.dim == 2 {
            transpose(buf, n);
            plan.process(buf);
            transpose(buf, n);
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, f: &ScalarField) -> Vec<Complex64> {
        assert!(self.grid.same_shape(f.grid()), "spectral workspace grid mismatch");
        let mut buf: Vec<Complex64> = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut buf, false);
        buf
    }

    /// Inverse transform (normalized), keeping the real part.
    pub fn inverse(&self, mut coeffs: Vec<Complex64>) -> ScalarField {
        self.run(&mut coeffs, true);
        let s = 1.0 / self.grid.len() as f64;
        ScalarField::from_raw(&self.grid, coeffs.iter().map(|c| c.re * s).collect())
    }

    /// Signed-wavenumber tuple of flat spectral slot `idx`.
    fn slots(&self, idx: usize) -> [usize; 2] {
        let n = self.grid.n;
        if self.grid.dim == 1 {
            [idx, 0]
        } else {
            [idx / n, idx % n]
        }
    }

    /// `|k|²` with Nyquist kept (Laplacian symbol is `-|k|²`).
    pub fn k_squared(&self, idx: usize) -> f64 {
        let s = self.slots(idx);
        (0..self.grid.dim).map(|a| self.k_even[s[a]].powi(2)).sum()
    }

    /// Multiplies the spectrum by `symbol(idx)` and transforms back.
    pub fn apply_symbol(&self, f: &ScalarField, symbol: impl Fn(usize) -> Complex64) -> ScalarField {
        let mut c = self.forward(f);
        for (i, v) in c.iter_mut().enumerate() {
            *v *= symbol(i);
        }
        self.inverse(c)
    }

    /// `∂f/∂x_axis`.
    pub fn derivative(&self, f: &ScalarField, axis: usize) -> ScalarField {
        self.apply_symbol(f, |i| Complex64::new(0.0, self.k_odd[self.slots(i)[axis]]))
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        let c = self.forward(f);
        VectorField::from_raw(
            (0..self.grid.dim)
                .map(|axis| {
                    let d = c
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * Complex64::new(0.0, self.k_odd[self.slots(i)[axis]]))
                        .collect();
                    self.inverse(d)
                })
                .collect(),
        )
    }

    pub fn divergence(&self, v: &VectorField) -> ScalarField {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (axis, comp) in v.components().iter().enumerate() {
            let c = self.forward(comp);
            for (i, (a, x)) in acc.iter_mut().zip(c).enumerate() {
                *a += x * Complex64::new(0.0, self.k_odd[self.slots(i)[axis]]);
            }
        }
        self.inverse(acc)
    }

    pub fn laplacian(&self, f: &ScalarField) -> ScalarField {
        self.apply_symbol(f, |i| Complex64::new(-self.k_squared(i), 0.0))
    }

    /// Second derivatives `∂_i∂_j f`.
    pub fn hessian(&self, f: &ScalarField) -> TensorField {
        let c = self.forward(f);
        let dim = self.grid.dim;
        TensorField::from_fn(dim, |a, b| {
            let d = c
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let s = self.slots(i);
                    let sym = if a == b {
                        -self.k_even[s[a]].powi(2)
                    } else {
                        -self.k_odd[s[a]] * self.k_odd[s[b]]
                    };
                    v * sym
                })
                .collect();
            self.inverse(d)
        })
    }

    /// Row-wise divergence of a tensor: `(div S)_i = Σ_j ∂_j S_ij`.
    pub fn tensor_divergence(&self, s: &TensorField) -> VectorField {
        VectorField::from_raw((0..s.dim()).map(|i| self.divergence(&s.row(i))).collect())
    }

    /// Whether slot `idx` survives the 2/3 rule.
    pub fn is_kept(&self, idx: usize) -> bool {
        let s = self.slots(idx);
        (0..self.grid.dim).all(|a| self.keep[s[a]])
    }

    /// Zeroes every mode with some `|index| > N/3`.
    pub fn dealias(&self, f: &ScalarField) -> ScalarField {
        let mut c = self.forward(f);
        for (i, v) in c.iter_mut().enumerate() {
            if !self.is_kept(i) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse(c)
    }

    /// Dealiased pointwise product.
    pub fn product(&self, a: &ScalarField, b: &ScalarField) -> ScalarField {
        self.dealias(&a.mul(b))
    }

    pub fn dealias_vector(&self, v: &VectorField) -> VectorField {
        v.map_components(|c| self.dealias(c))
    }

    /// Dealiased `s·v`.
    pub fn scale_vector(&self, s: &ScalarField, v: &VectorField) -> VectorField {
        v.map_components(|c| self.product(s, c))
    }

    /// `∫|∇f|²` of the band-limited interpolant, summed in Fourier space
    /// (the Nyquist mode contributes, unlike a collocated gradient).
    pub fn dirichlet_energy(&self, f: &ScalarField) -> f64 {
        let c = self.forward(f);
        let nn = self.grid.len() as f64;
        self.grid.measure()
            * c.iter().enumerate().map(|(i, v)| self.k_squared(i) * v.norm_sqr()).sum::<f64>()
            / (nn * nn)
    }

    /// `measure · Σ |f̂_j / N^dim|²`, which equals `‖f‖₂²` by Parseval.
    pub fn spectral_energy(&self, f: &ScalarField) -> f64 {
        let c = self.forward(f);
        let nn = self.grid.len() as f64;
        self.grid.measure() * c.iter().map(|v| v.norm_sqr()).sum::<f64>() / (nn * nn)
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

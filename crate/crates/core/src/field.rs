//! Real fields on the flat torus `[0, 2π)^d`, their Fourier coefficients and
//! dealiased polynomial nonlinearities.
//!
//! Fourier coefficients use the convention `u(x) = Σ_k û_k e^{i⟨k,x⟩}`, so the
//! forward transform divides by the number of grid points and a constant
//! field `a` has `û_0 = a`. The *retained band* is `|k_i| < n/2` on every
//! axis; the Nyquist row is dropped whenever a field passes through a
//! nonlinearity or the time stepper.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{config_err, Error, Result};

/// Highest polynomial degree the zero-padding dealiaser is sized for.
pub const MAX_DEALIAS_DEGREE: usize = 9;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Forward and inverse plans for a `n^dim` row-major array.
#[derive(Clone)]
pub(crate) struct FftNd {
    n: usize,
    dim: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub(crate) fn new(n: usize, dim: usize) -> Self {
        let (fwd, inv) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        });
        Self { n, dim, fwd, inv }
    }

    pub(crate) fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len())
    }

    /// Unnormalized in-place transform.
    pub(crate) fn process(&self, data: &mut [Complex64], inverse: bool, scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(data.len(), self.len());
        let need = self.scratch_len();
        if scratch.len() < need {
            scratch.resize(need, Complex64::new(0.0, 0.0));
        }
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process_with_scratch(data, &mut scratch[..need]);
        if self.dim == 2 {
            transpose_square(data, self.n);
            plan.process_with_scratch(data, &mut scratch[..need]);
            transpose_square(data, self.n);
        }
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Uniform periodic grid with `n` points per axis on `[0, 2π)^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(config_err(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(config_err(format!(
                "points per axis must be a power of two and at least 8, got {n}"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of grid points, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(2π)^dim`.
    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.dim as i32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Real dimension of the retained band `|k_i| < n/2`.
    pub fn band_dim(&self) -> usize {
        (self.n - 1).pow(self.dim as u32)
    }

    /// Signed wavenumber stored at FFT position `i` along one axis.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Wave vector of the flat spectral index.
    pub fn wave_vector(&self, flat: usize) -> [i64; 2] {
        match self.dim {
            1 => [self.wavenumber(flat), 0],
            _ => [self.wavenumber(flat / self.n), self.wavenumber(flat % self.n)],
        }
    }

    /// `|k|²` of the flat spectral index.
    pub fn k_squared(&self, flat: usize) -> f64 {
        let k = self.wave_vector(flat);
        (k[0] * k[0] + k[1] * k[1]) as f64
    }

    pub fn in_band(&self, flat: usize) -> bool {
        let half = (self.n / 2) as i64;
        let k = self.wave_vector(flat);
        k[0].abs() < half && k[1].abs() < half
    }

    /// Flat spectral index of a wave vector, if it lies in the retained band.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let half = (self.n / 2) as i64;
        if k.iter().any(|c| c.abs() >= half) {
            return None;
        }
        let n = self.n as i64;
        let wrap = |c: i64| c.rem_euclid(n) as usize;
        Some(match self.dim {
            1 => wrap(k[0]),
            _ => wrap(k[0]) * self.n + wrap(k[1]),
        })
    }

    /// Coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [flat as f64 * h, 0.0],
            _ => [(flat / self.n) as f64 * h, (flat % self.n) as f64 * h],
        }
    }

    pub(crate) fn fft(&self) -> FftNd {
        FftNd::new(self.n, self.dim)
    }
}

/// Transform direction for [`transform`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Grid values to normalized Fourier coefficients.
    Forward,
    /// Fourier coefficients to grid values.
    Inverse,
}

/// Discrete Fourier transform pair on the grid, normalized so that the
/// forward direction returns `û_k` and the inverse reconstructs values.
pub fn transform(grid: &TorusGrid, data: &[Complex64], direction: Direction) -> Result<Vec<Complex64>> {
    if data.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), got: data.len() });
    }
    let mut out = data.to_vec();
    let mut scratch = Vec::new();
    let fft = grid.fft();
    match direction {
        Direction::Forward => {
            fft.process(&mut out, false, &mut scratch);
            let s = 1.0 / grid.len() as f64;
            out.iter_mut().for_each(|c| *c *= s);
        }
        Direction::Inverse => fft.process(&mut out, true, &mut scratch),
    }
    Ok(out)
}

/// Grid values of a real function on the torus.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: TorusGrid, a: f64) -> Self {
        Self { grid, values: vec![a; grid.len()] }
    }

    /// Samples `f` at the grid points; `f` receives `dim` coordinates.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..grid.dim()])
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_spectrum(&self) -> Spectrum {
        let data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let coeffs = transform(&self.grid, &data, Direction::Forward).expect("length matches grid");
        Spectrum { grid: self.grid, coeffs }
    }

    /// Drops the Nyquist components.
    pub fn band_limited(&self) -> Field {
        self.to_spectrum().band_limited().to_field()
    }

    /// `L²(𝕋^d)` inner product by the grid rule (exact for band-limited products).
    pub fn inner(&self, other: &Field) -> f64 {
        let w = self.grid.volume() / self.grid.len() as f64;
        w * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn distance(&self, other: &Field) -> f64 {
        let w = self.grid.volume() / self.grid.len() as f64;
        (w * self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
        .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn norms(&self) -> SobolevNorms {
        self.to_spectrum().norms()
    }

    pub fn laplacian(&self) -> Field {
        self.to_spectrum().laplacian().to_field()
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

impl Add<&Field> for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&Field> for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.scaled(rhs)
    }
}

/// `L²`, `H¹`, `H²` norms computed by Parseval with weights `(1 + |k|²)^s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevNorms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Normalized Fourier coefficients of a real field.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Shape { expected: grid.len(), got: coeffs.len() });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of wave vector `k` (zero outside the band).
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.grid
            .mode_index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Real part of the inverse transform.
    pub fn to_field(&self) -> Field {
        let vals = transform(&self.grid, &self.coeffs, Direction::Inverse).expect("length matches grid");
        Field { grid: self.grid, values: vals.into_iter().map(|c| c.re).collect() }
    }

    pub fn band_limited(mut self) -> Spectrum {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if !self.grid.in_band(i) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self
    }

    /// Largest deviation from `û_{-k} = conj(û_k)`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n() as i64;
        let mut worst = 0.0_f64;
        for i in 0..self.coeffs.len() {
            let k = self.grid.wave_vector(i);
            let wrap = |c: i64| (-c).rem_euclid(n) as usize;
            let j = match self.grid.dim() {
                1 => wrap(k[0]),
                _ => wrap(k[0]) * self.grid.n() + wrap(k[1]),
            };
            worst = worst.max((self.coeffs[i] - self.coeffs[j].conj()).norm());
        }
        worst
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (1.0 + self.grid.k_squared(i)).powf(s) * c.norm_sqr())
            .sum();
        (self.grid.volume() * sum).sqrt()
    }

    pub fn norms(&self) -> SobolevNorms {
        SobolevNorms {
            l2: self.sobolev_norm(0.0),
            h1: self.sobolev_norm(1.0),
            h2: self.sobolev_norm(2.0),
        }
    }

    pub fn laplacian(&self) -> Spectrum {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * -self.grid.k_squared(i))
            .collect();
        Spectrum { grid: self.grid, coeffs }
    }

    /// `L²` inner product via Parseval.
    pub fn inner(&self, other: &Spectrum) -> f64 {
        self.grid.volume() * spectral_dot(&self.coeffs, &other.coeffs)
    }
}

/// `Re Σ conj(a_k) b_k`; the Euclidean inner product the Krylov and adjoint
/// code works in. Multiply by `(2π)^d` for the `L²` product.
pub(crate) fn spectral_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Polynomial nonlinearity `f(u) = Σ c_n u^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// A dissipative nonlinearity: odd degree `p ≥ 3` with `c_p > 0`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let poly = Self::general(coeffs)?;
        let p = poly.degree();
        if p < 3 || p % 2 == 0 {
            return Err(config_err(format!("nonlinearity must have odd degree p >= 3, got degree {p}")));
        }
        if poly.coeffs[p] <= 0.0 {
            return Err(config_err("leading coefficient of the nonlinearity must be positive"));
        }
        Ok(poly)
    }

    /// Any finite real polynomial, including `f ≡ 0`; used for linear
    /// diagnostics where dissipativity is not needed.
    pub fn general(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(config_err("polynomial coefficients must be finite"));
        }
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        if coeffs.len() - 1 > MAX_DEALIAS_DEGREE {
            return Err(config_err(format!(
                "polynomial degree {} exceeds the supported dealiasing degree {MAX_DEALIAS_DEGREE}",
                coeffs.len() - 1
            )));
        }
        Ok(Self { coeffs })
    }

    /// `u³ − u`.
    pub fn allen_cahn() -> Self {
        Self { coeffs: vec![0.0, -1.0, 0.0, 1.0] }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_dissipative(&self) -> bool {
        let p = self.degree();
        p >= 3 && p % 2 == 1 && self.coeffs[p] > 0.0
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (n, c)| acc * u + n as f64 * c)
    }

    /// `F(u) = ∫_0^u f`, so `F(0) = 0`.
    pub fn antiderivative(&self, u: f64) -> f64 {
        u * self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (n, c)| acc * u + c / (n as f64 + 1.0))
    }

    /// `f(u) + c·u`; shifts `f′` by `c`.
    pub fn with_linear_shift(&self, c: f64) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() < 2 {
            coeffs.resize(2, 0.0);
        }
        coeffs[1] += c;
        Polynomial { coeffs }
    }

    /// `f(u) − a`.
    pub fn shifted_by_constant(&self, a: f64) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] -= a;
        Polynomial { coeffs }
    }

    /// Real roots by sign-change bracketing on the Cauchy bound, polished by
    /// bisection. Tangential (even multiplicity) roots are not reported.
    pub fn real_roots(&self) -> Vec<f64> {
        let p = self.degree();
        if p == 0 {
            return Vec::new();
        }
        let lead = self.coeffs[p];
        let bound = 1.0 + self.coeffs[..p].iter().map(|c| (c / lead).abs()).fold(0.0, f64::max);
        let samples = 4000;
        let mut roots: Vec<f64> = Vec::new();
        let mut prev_x = -bound;
        let mut prev_f = self.eval(prev_x);
        for i in 1..=samples {
            let x = -bound + 2.0 * bound * i as f64 / samples as f64;
            let fx = self.eval(x);
            if prev_f == 0.0 {
                roots.push(prev_x);
            } else if prev_f * fx < 0.0 {
                let (mut lo, mut hi) = (prev_x, x);
                let mut flo = prev_f;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = self.eval(mid);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if flo * fm < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev_x = x;
            prev_f = fx;
        }
        if prev_f == 0.0 {
            roots.push(prev_x);
        }
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        roots
    }

    /// Scans `[-range, range]` for constants witnessing the growth and
    /// dissipativity bounds `-C ≤ f′(u) ≤ C(1+|u|)^{p−1}` and
    /// `f(u)u ≥ c|u|^{p+1} − C`, with `c = c_p / 2`.
    pub fn growth_witness(&self, range: f64) -> GrowthWitness {
        let p = self.degree();
        let c = 0.5 * self.coeffs[p].max(0.0);
        let mut dissipation_const = 0.0_f64;
        let mut growth_const = 0.0_f64;
        let samples = 20_000;
        for i in 0..=samples {
            let u = -range + 2.0 * range * i as f64 / samples as f64;
            let gap = c * u.abs().powi(p as i32 + 1) - self.eval(u) * u;
            dissipation_const = dissipation_const.max(gap);
            let d = self.derivative(u);
            growth_const = growth_const
                .max(-d)
                .max(d / (1.0 + u.abs()).powi(p as i32 - 1));
        }
        GrowthWitness { range, c, dissipation_const, growth_const }
    }
}

/// Constants found by [`Polynomial::growth_witness`] on a bounded interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthWitness {
    pub range: f64,
    pub c: f64,
    pub dissipation_const: f64,
    pub growth_const: f64,
}

/// Zero-padded evaluation of pointwise nonlinearities of band-limited data.
///
/// The fine grid has `m ≥ (p+1)n/2` points per axis so products of degree
/// `p` are computed without aliasing into the retained band.
#[derive(Clone)]
pub(crate) struct Dealias {
    grid: TorusGrid,
    m: usize,
    fine: FftNd,
}

impl Dealias {
    pub(crate) fn new(grid: TorusGrid, degree: usize) -> Result<Self> {
        if degree > MAX_DEALIAS_DEGREE {
            return Err(config_err(format!(
                "degree {degree} exceeds the supported dealiasing degree {MAX_DEALIAS_DEGREE}"
            )));
        }
        let p = degree.max(1);
        let need = ((p + 1) * grid.n()).div_ceil(2);
        let m = need + need % 2;
        Ok(Self { grid, m, fine: FftNd::new(m, grid.dim()) })
    }

    pub(crate) fn fine_len(&self) -> usize {
        self.m.pow(self.grid.dim() as u32)
    }

    pub(crate) fn scratch_len(&self) -> usize {
        self.fine.scratch_len()
    }

    fn fine_index(&self, k: [i64; 2]) -> usize {
        let m = self.m as i64;
        match self.grid.dim() {
            1 => k[0].rem_euclid(m) as usize,
            _ => k[0].rem_euclid(m) as usize * self.m + k[1].rem_euclid(m) as usize,
        }
    }

    /// Grid values on the fine grid of the band part of `spec` (real parts of
    /// the output when `spec` is Hermitian). Two real fields may be packed as
    /// `û + i v̂`.
    pub(crate) fn to_fine(&self, spec: &[Complex64], fine: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        fine.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for (i, c) in spec.iter().enumerate() {
            if self.grid.in_band(i) {
                fine[self.fine_index(self.grid.wave_vector(i))] = *c;
            }
        }
        self.fine.process(fine, true, scratch);
    }

    /// Band coefficients of fine-grid values; destroys `fine`.
    pub(crate) fn from_fine(&self, fine: &mut [Complex64], spec: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        self.fine.process(fine, false, scratch);
        let s = 1.0 / self.fine_len() as f64;
        for (i, c) in spec.iter_mut().enumerate() {
            *c = if self.grid.in_band(i) {
                fine[self.fine_index(self.grid.wave_vector(i))] * s
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
    }

    /// Band projection of `g(u)` for band-limited `u`.
    pub(crate) fn apply(&self, spec: &[Complex64], g: impl Fn(f64) -> f64) -> Vec<Complex64> {
        let mut fine = vec![Complex64::new(0.0, 0.0); self.fine_len()];
        let mut scratch = Vec::new();
        self.to_fine(spec, &mut fine, &mut scratch);
        fine.iter_mut().for_each(|c| *c = Complex64::new(g(c.re), 0.0));
        let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
        self.from_fine(&mut fine, &mut out, &mut scratch);
        out
    }

    /// Exact integral over the torus of `g(u)` when `g` is a polynomial of
    /// degree at most the dealiasing degree plus one.
    pub(crate) fn integrate(&self, spec: &[Complex64], g: impl Fn(f64) -> f64) -> f64 {
        let mut fine = vec![Complex64::new(0.0, 0.0); self.fine_len()];
        let mut scratch = Vec::new();
        self.to_fine(spec, &mut fine, &mut scratch);
        let w = self.grid.volume() / self.fine_len() as f64;
        w * fine.iter().map(|c| g(c.re)).sum::<f64>()
    }
}

/// `f(u)` projected onto the retained band, computed without aliasing.
pub fn apply_poly(f: &Polynomial, u: &Field) -> Result<Field> {
    let dealias = Dealias::new(*u.grid(), f.degree())?;
    let spec = u.to_spectrum();
    let out = dealias.apply(spec.coeffs(), |x| f.eval(x));
    Ok(Spectrum { grid: *u.grid(), coeffs: out }.to_field())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: TorusGrid, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::new(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(3, 16).is_err());
        assert!(TorusGrid::new(1, 4).is_err());
        assert!(TorusGrid::new(1, 24).is_err());
        let g = TorusGrid::new(2, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.band_dim(), 225);
    }

    #[test]
    fn constant_has_only_zero_mode() {
        let g = TorusGrid::new(2, 8).unwrap();
        let s = Field::constant(g, 1.0).to_spectrum();
        for (i, c) in s.coeffs().iter().enumerate() {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            assert!((c - Complex64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn cosine_has_two_conjugate_modes() {
        let g = TorusGrid::new(2, 16).unwrap();
        let s = Field::from_fn(g, |x| x[0].cos()).to_spectrum();
        let nonzero: Vec<usize> = (0..g.len()).filter(|&i| s.coeffs()[i].norm() > 1e-12).collect();
        assert_eq!(nonzero.len(), 2);
        assert!((s.coeff(&[1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((s.coeff(&[-1, 0]) - s.coeff(&[1, 0]).conj()).norm() < 1e-14);
    }

    #[test]
    fn round_trip_and_shape_error() {
        let g = TorusGrid::new(2, 16).unwrap();
        let u = random_field(g, 1);
        let back = u.to_spectrum().to_field();
        let dev = u.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-12);
        assert!(u.to_spectrum().hermitian_defect() < 1e-14);
        assert!(matches!(
            transform(&g, &[Complex64::new(0.0, 0.0); 3], Direction::Forward),
            Err(Error::Shape { .. })
        ));
        assert!(Field::new(g, vec![0.0; 10]).is_err());
    }

    #[test]
    fn cube_of_cosine() {
        let g = TorusGrid::new(1, 32).unwrap();
        let u = Field::from_fn(g, |x| x[0].cos());
        let cube = apply_poly(&Polynomial::general(vec![0.0, 0.0, 0.0, 1.0]).unwrap(), &u).unwrap();
        let expect = Field::from_fn(g, |x| 0.75 * x[0].cos() + 0.25 * (3.0 * x[0]).cos());
        assert!(cube.distance(&expect) < 1e-13);
    }

    #[test]
    fn poly_of_constants() {
        let g = TorusGrid::new(1, 16).unwrap();
        let f = Polynomial::allen_cahn();
        let zero = apply_poly(&f, &Field::constant(g, 1.0)).unwrap();
        assert!(zero.max_abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let out = apply_poly(&f, &Field::constant(g, a)).unwrap();
            assert!(out.values().iter().all(|v| (v - f.eval(a)).abs() < 1e-12));
        }
    }

    #[test]
    fn degree_beyond_padding_rejected() {
        assert!(Polynomial::general(vec![1.0; 12]).is_err());
        assert!(Dealias::new(TorusGrid::new(1, 16).unwrap(), 11).is_err());
    }

    #[test]
    fn polynomial_validation() {
        assert!(Polynomial::new(vec![0.0, 1.0]).is_err());
        assert!(Polynomial::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(Polynomial::new(vec![0.0, 0.0, 0.0, -1.0]).is_err());
        assert!(Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn polynomial_calculus() {
        let f = Polynomial::allen_cahn();
        assert_eq!(f.eval(2.0), 6.0);
        assert_eq!(f.derivative(1.0), 2.0);
        assert!((f.antiderivative(1.0) - (0.25 - 0.5)).abs() < 1e-15);
        assert_eq!(f.antiderivative(0.0), 0.0);
        let roots = f.real_roots();
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((r - e).abs() < 1e-12, "{r}");
        }
        let w = f.growth_witness(10.0);
        assert!(w.c > 0.0 && w.dissipation_const >= 0.0 && w.growth_const >= 1.0);
        for i in 0..=200 {
            let u = -10.0 + 0.1 * i as f64;
            assert!(f.eval(u) * u >= w.c * u.abs().powi(4) - w.dissipation_const - 1e-9);
        }
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = TorusGrid::new(1, 32).unwrap();
        let n1 = Field::constant(g, 1.0).norms();
        assert!((n1.l2 - (2.0 * PI).sqrt()).abs() < 1e-13);
        let nc = Field::from_fn(g, |x| x[0].cos()).norms();
        assert!((nc.l2 - PI.sqrt()).abs() < 1e-13);
        assert!((nc.h1 - (2.0 * PI).sqrt()).abs() < 1e-13);
        let z = Field::zeros(g).norms();
        assert_eq!((z.l2, z.h1, z.h2), (0.0, 0.0, 0.0));
        let g2 = TorusGrid::new(2, 8).unwrap();
        assert!((Field::constant(g2, 3.0).l2_norm() - 3.0 * 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn laplacian_eigenfunctions() {
        let g = TorusGrid::new(1, 32).unwrap();
        assert!(Field::constant(g, 2.0).laplacian().max_abs() < 1e-14);
        let c1 = Field::from_fn(g, |x| x[0].cos());
        assert!(c1.laplacian().distance(&c1.scaled(-1.0)) < 1e-13);
        let c3 = Field::from_fn(g, |x| (3.0 * x[0]).cos());
        assert!(c3.laplacian().distance(&c3.scaled(-9.0)) < 1e-12);
    }
}

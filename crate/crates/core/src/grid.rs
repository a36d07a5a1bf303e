//! Periodic truncation of the line and dyadic partitions of frequency space.
//!
//! The physical domain is the torus `[-πΛ, πΛ)` sampled at `n` points. Spectral
//! coefficients approximate the whole-line transform
//! `û(ξ) = (2π)⁻¹ ∫ u(x) e^{-ixξ} dx` at the lattice `ξ_k = k/Λ`, so that
//! products become convolutions without extra constants,
//! `(uv)^(ξ) = ∫ û(ξ₁) v̂(ξ - ξ₁) dξ₁`, and Parseval reads
//! `∫|u|² dx = 2π Σ |û(ξ_k)|² Δξ`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("half width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("dyadic shell of {0} is undefined")]
    NoShell(f64),
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Uniform discretization of the torus of period `2πΛ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    half_width: f64,
}

impl Grid1D {
    pub fn new(n: usize, half_width: f64) -> Result<Self, GridError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(n));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::BadHalfWidth(half_width));
        }
        Ok(Self { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Frequency spacing `Δξ = 1/Λ`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.half_width
    }

    pub fn period(&self) -> f64 {
        2.0 * PI * self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.period() / self.n as f64
    }

    /// Largest resolved frequency magnitude (the Nyquist mode sits at `-nyquist`).
    pub fn nyquist(&self) -> f64 {
        (self.n / 2) as f64 * self.spacing()
    }

    /// Integer wavenumber stored at `idx` in FFT order.
    pub fn wavenumber(&self, idx: usize) -> i64 {
        let half = self.n / 2;
        if idx < half {
            idx as i64
        } else {
            idx as i64 - self.n as i64
        }
    }

    pub fn index_of(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k < -half || k >= half {
            return None;
        }
        Some(if k >= 0 { k as usize } else { (k + self.n as i64) as usize })
    }

    pub fn frequency(&self, idx: usize) -> f64 {
        self.wavenumber(idx) as f64 * self.spacing()
    }

    /// Frequencies `k/Λ` for `k = -n/2, …, n/2 - 1`, ascending.
    pub fn frequencies(&self) -> Vec<f64> {
        let half = (self.n / 2) as i64;
        (-half..half).map(|k| k as f64 * self.spacing()).collect()
    }

    /// Frequencies in storage (FFT) order.
    pub fn frequencies_fft_order(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.frequency(i)).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n)
            .map(|j| -PI * self.half_width + j as f64 * dx)
            .collect()
    }

    /// Dyadic shell of a grid frequency; the zero mode joins the shell of `Δξ`.
    pub fn frequency_shell(&self, xi: f64) -> Dyadic {
        let x = xi.abs().max(self.spacing());
        // x > 0 here, so the shell always exists.
        dyadic_shell(x, false).expect("positive argument")
    }
}

/// Forward/inverse transforms between samples on the torus and spectral fields.
#[derive(Clone)]
pub struct Fourier {
    grid: Grid1D,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fourier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

impl Fourier {
    pub fn new(grid: Grid1D) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n),
            inverse: planner.plan_fft_inverse(grid.n),
        }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    fn parity(&self, idx: usize) -> f64 {
        // e^{iπk} for the shift of the origin to the left endpoint.
        if self.grid.wavenumber(idx).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// In-place transform of physical samples into continuum-normalized coefficients.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
        let scale = self.grid.half_width / self.grid.n as f64;
        for (i, c) in buf.iter_mut().enumerate() {
            *c *= scale * self.parity(i);
        }
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        let scale = self.grid.spacing();
        for (i, c) in buf.iter_mut().enumerate() {
            *c *= scale * self.parity(i);
        }
        self.inverse.process(buf);
    }

    pub fn forward(&self, samples: &[Complex64]) -> Result<SpectralField, GridError> {
        if samples.len() != self.grid.n {
            return Err(GridError::LengthMismatch {
                expected: self.grid.n,
                got: samples.len(),
            });
        }
        let mut buf = samples.to_vec();
        self.forward_in_place(&mut buf);
        Ok(SpectralField {
            grid: self.grid,
            coeffs: buf,
        })
    }

    pub fn forward_real(&self, samples: &[f64]) -> Result<SpectralField, GridError> {
        let c: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&c)
    }

    pub fn inverse(&self, field: &SpectralField) -> Vec<Complex64> {
        let mut buf = field.coeffs.clone();
        self.inverse_in_place(&mut buf);
        buf
    }
}

/// Samples of `û` on the frequency lattice of a grid, stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid1D,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid1D) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n],
        }
    }

    pub fn from_coeffs(grid: Grid1D, coeffs: Vec<Complex64>) -> Result<Self, GridError> {
        if coeffs.len() != grid.n {
            return Err(GridError::LengthMismatch {
                expected: grid.n,
                got: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    /// Builds a field by evaluating `f(ξ)` at every lattice frequency.
    pub fn from_fn(grid: Grid1D, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let coeffs = (0..grid.n).map(|i| f(grid.frequency(i))).collect();
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
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

    pub fn at_wavenumber(&self, k: i64) -> Option<Complex64> {
        self.grid.index_of(k).map(|i| self.coeffs[i])
    }

    /// Coefficients with their frequencies, ascending in frequency.
    pub fn ascending(&self) -> Vec<(f64, Complex64)> {
        let half = (self.grid.n / 2) as i64;
        (-half..half)
            .map(|k| {
                let i = self.grid.index_of(k).expect("in range");
                (self.grid.frequency(i), self.coeffs[i])
            })
            .collect()
    }

    /// Multiplies every coefficient by `symbol(ξ)`.
    pub fn apply_symbol(&self, mut symbol: impl FnMut(f64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * symbol(self.grid.frequency(i)))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    pub fn axpy(&mut self, a: Complex64, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// `Σ w(ξ)|û(ξ)|² Δξ`.
    pub fn weighted_mass(&self, mut weight: impl FnMut(f64) -> f64) -> f64 {
        let dxi = self.grid.spacing();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| weight(self.grid.frequency(i)) * c.norm_sqr())
            .sum::<f64>()
            * dxi
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Checks `û(-ξ) = conj û(ξ)` for all paired modes (the Nyquist mode must be real).
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let n = self.grid.n as i64;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..=n / 2 {
            let a = self.at_wavenumber(k);
            let b = self.at_wavenumber(-k);
            match (a, b) {
                (Some(a), Some(b)) => {
                    if (a - b.conj()).norm() > tol * scale {
                        return false;
                    }
                }
                (None, Some(b)) => {
                    if b.im.abs() > tol * scale {
                        return false;
                    }
                }
                _ => {}
            }
        }
        true
    }

    /// Projects onto conjugate-symmetric fields (the spectrum of a real function).
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        let half = (self.grid.n / 2) as i64;
        for k in 1..half {
            let i = self.grid.index_of(k).expect("in range");
            let j = self.grid.index_of(-k).expect("in range");
            let avg = 0.5 * (self.coeffs[i] + self.coeffs[j].conj());
            out.coeffs[i] = avg;
            out.coeffs[j] = avg.conj();
        }
        out.coeffs[0] = Complex64::new(self.coeffs[0].re, 0.0);
        let nyq = self.grid.index_of(-half).expect("in range");
        out.coeffs[nyq] = Complex64::new(self.coeffs[nyq].re, 0.0);
        out
    }
}

/// A dyadic number `2^k`. Modulation shells use `2^0` as the bottom shell `[0, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dyadic(pub i32);

impl Dyadic {
    pub const ONE: Dyadic = Dyadic(0);

    pub fn value(self) -> f64 {
        (self.0 as f64).exp2()
    }

    pub fn exponent(self) -> i32 {
        self.0
    }

    /// Exact inverse of [`Dyadic::value`]; `None` unless `v` is a power of two.
    pub fn from_value(v: f64) -> Option<Self> {
        if !(v.is_finite() && v > 0.0) {
            return None;
        }
        let k = v.log2().round() as i32;
        ((k as f64).exp2() == v).then_some(Dyadic(k))
    }

    /// Frequency shell membership `N ≤ x < 2N`.
    pub fn contains_frequency(self, x: f64) -> bool {
        let n = self.value();
        x >= n && x < 2.0 * n
    }

    /// Modulation shell membership: `[0, 2)` for the bottom shell, `[L, 2L)` otherwise.
    pub fn contains_modulation(self, x: f64) -> bool {
        let l = self.value();
        if self.0 <= 0 {
            x < 2.0
        } else {
            x >= l && x < 2.0 * l
        }
    }

    /// Lower edge of the modulation shell.
    pub fn modulation_floor(self) -> f64 {
        if self.0 <= 0 {
            0.0
        } else {
            self.value()
        }
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 >= 0 {
            write!(f, "{}", 1u64 << self.0.min(62))
        } else {
            write!(f, "2^{}", self.0)
        }
    }
}

/// Dyadic shell `2^⌊log₂ x⌋` of `x`; with `floor_at_one`, every `x ≤ 1` maps to the
/// bottom shell.
pub fn dyadic_shell(x: f64, floor_at_one: bool) -> Result<Dyadic, GridError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(GridError::NoShell(x));
    }
    if floor_at_one && x <= 1.0 {
        return Ok(Dyadic::ONE);
    }
    if x == 0.0 {
        return Err(GridError::NoShell(x));
    }
    let mut k = x.log2().floor() as i32;
    // Guard against rounding in log2 near exact powers of two.
    if (k as f64).exp2() > x {
        k -= 1;
    } else if ((k + 1) as f64).exp2() <= x {
        k += 1;
    }
    Ok(Dyadic(k))
}

/// `a ∼ b` read with an explicit constant: `b/c ≤ a ≤ c·b`.
pub fn comparable(a: f64, b: f64, c: f64) -> bool {
    a * c >= b && a <= c * b
}

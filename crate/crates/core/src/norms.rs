//! Sobolev and space-time norms, the time cutoff and scalar weight checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::grid::{Grid1D, GridError, SpectralField};
use crate::symbols::{bracket, bracket_c, modulation_lambda};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("cutoff scale must be positive, got {0}")]
    BadScale(f64),
    #[error("s = {s} is below s_c = {s_c}")]
    BelowCritical { s: f64, s_c: f64 },
    #[error("time grid needs at least one sample and a positive step")]
    BadTimeGrid,
    #[error("expected {expected} time samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// `(Σ ⟨ξ⟩^{2s} |φ̂(ξ)|² Δξ)^{1/2}`.
pub fn sobolev_norm(phi: &SpectralField, s: f64) -> f64 {
    if s == 0.0 {
        return phi.weighted_mass(|_| 1.0).sqrt();
    }
    phi.weighted_mass(|xi| bracket(xi).powf(2.0 * s)).sqrt()
}

/// Sobolev norm restricted to `|ξ| ≤ cut`.
pub fn sobolev_norm_below(phi: &SpectralField, s: f64, cut: f64) -> f64 {
    phi.weighted_mass(|xi| {
        if xi.abs() <= cut {
            bracket(xi).powf(2.0 * s)
        } else {
            0.0
        }
    })
    .sqrt()
}

/// Smooth step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, built from `e^{-1/x}`.
fn smooth_step(x: f64) -> f64 {
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let a = f(x);
    let b = f(1.0 - x);
    if a + b == 0.0 {
        // unreachable for finite x; keeps NaN out for extreme inputs
        return if x > 0.5 { 1.0 } else { 0.0 };
    }
    a / (a + b)
}

/// The fixed bump `ψ`: equal to 1 on `[-1, 1]`, supported in `[-2, 2]`.
pub fn psi(t: f64) -> f64 {
    smooth_step(2.0 - t.abs())
}

pub fn cutoff_psi(t: f64, scale: f64) -> Result<f64, NormError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(NormError::BadScale(scale));
    }
    Ok(psi(t / scale))
}

/// Smallest constant `C` with `⟨ξ⟩^p ≤ C(⟨ξ₁⟩^p + ⟨ξ-ξ₁⟩^p)` for all pairs,
/// `p = s - s_c`. It is 1 up to `p = 1` and `2^{p-1}` beyond.
pub fn triangle_weight_constant(s: f64, s_c: f64) -> f64 {
    (s - s_c - 1.0).max(0.0).exp2()
}

/// Scalar inequality `⟨ξ⟩^s ≤ C(⟨ξ⟩^{s_c}⟨ξ₁⟩^{s-s_c} + ⟨ξ⟩^{s_c}⟨ξ-ξ₁⟩^{s-s_c})`
/// with `C` from [`triangle_weight_constant`].
pub fn triangle_weight_check(xi: f64, xi1: f64, s: f64, s_c: f64) -> Result<bool, NormError> {
    if s < s_c {
        return Err(NormError::BelowCritical { s, s_c });
    }
    let lhs = bracket(xi).powf(s);
    let rhs = bracket(xi).powf(s_c)
        * (bracket(xi1).powf(s - s_c) + bracket(xi - xi1).powf(s - s_c));
    Ok(lhs <= triangle_weight_constant(s, s_c) * rhs * (1.0 + 1e-14))
}

/// Uniform time sampling `t_m = t0 + m·dt` on top of a spatial grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    pub space: Grid1D,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(space: Grid1D, t0: f64, dt: f64, nt: usize) -> Result<Self, NormError> {
        if nt == 0 || !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            return Err(NormError::BadTimeGrid);
        }
        Ok(Self { space, t0, dt, nt })
    }

    /// Covers `[start, end)` with `nt` samples.
    pub fn covering(space: Grid1D, start: f64, end: f64, nt: usize) -> Result<Self, NormError> {
        if !(end > start) || nt == 0 {
            return Err(NormError::BadTimeGrid);
        }
        Self::new(space, start, (end - start) / nt as f64, nt)
    }

    pub fn window(&self) -> f64 {
        self.dt * self.nt as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|m| self.t0 + m as f64 * self.dt).collect()
    }

    pub fn tau_spacing(&self) -> f64 {
        2.0 * PI / self.window()
    }

    /// Dual variable at FFT index `m`.
    pub fn tau(&self, m: usize) -> f64 {
        let half = self.nt / 2;
        let k = if m < self.nt - half { m as i64 } else { m as i64 - self.nt as i64 };
        k as f64 * self.tau_spacing()
    }
}

/// `û(ξ, τ)` on a `(τ, ξ)` lattice, row-major in `τ` (both axes in FFT order).
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    grid: SpaceTimeGrid,
    coeffs: Vec<Complex64>,
}

impl SpaceTimeField {
    /// Transforms in time a sequence of spectral states sampled at `grid.times()`.
    pub fn from_states(grid: SpaceTimeGrid, states: &[SpectralField]) -> Result<Self, NormError> {
        if states.len() != grid.nt {
            return Err(NormError::SampleCount {
                expected: grid.nt,
                got: states.len(),
            });
        }
        let n = grid.space.n();
        for st in states {
            if st.grid() != grid.space {
                return Err(NormError::Grid(GridError::LengthMismatch {
                    expected: n,
                    got: st.grid().n(),
                }));
            }
        }
        let nt = grid.nt;
        let fft = FftPlanner::new().plan_fft_forward(nt);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); nt * n];
        let mut col = vec![Complex64::new(0.0, 0.0); nt];
        let w = grid.dt / (2.0 * PI);
        for i in 0..n {
            for (m, st) in states.iter().enumerate() {
                col[m] = st.coeffs()[i];
            }
            fft.process(&mut col);
            for (m, c) in col.iter().enumerate() {
                let phase = Complex64::from_polar(w, -grid.tau(m) * grid.t0);
                coeffs[m * n + i] = c * phase;
            }
        }
        Ok(Self { grid, coeffs })
    }

    /// Samples `f(τ, ξ)` directly on the lattice.
    pub fn from_fn(grid: SpaceTimeGrid, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let n = grid.space.n();
        let mut coeffs = Vec::with_capacity(grid.nt * n);
        for m in 0..grid.nt {
            let tau = grid.tau(m);
            for i in 0..n {
                coeffs.push(f(tau, grid.space.frequency(i)));
            }
        }
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> SpaceTimeGrid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, m: usize, i: usize) -> Complex64 {
        self.coeffs[m * self.grid.space.n() + i]
    }

    /// `Σ w(τ, ξ)|û|² Δτ Δξ`.
    pub fn weighted_mass(&self, mut weight: impl FnMut(f64, f64) -> f64) -> f64 {
        let n = self.grid.space.n();
        let mut acc = 0.0;
        for m in 0..self.grid.nt {
            let tau = self.grid.tau(m);
            for i in 0..n {
                let c = self.coeffs[m * n + i];
                if c.re != 0.0 || c.im != 0.0 {
                    acc += weight(tau, self.grid.space.frequency(i)) * c.norm_sqr();
                }
            }
        }
        acc * self.grid.tau_spacing() * self.grid.space.spacing()
    }

    /// Checks `û(-ξ, -τ) = conj û(ξ, τ)` away from the Nyquist rows and columns.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        let n = self.grid.space.n();
        let nt = self.grid.nt;
        let scale = self
            .coeffs
            .iter()
            .map(|c| c.norm())
            .fold(f64::MIN_POSITIVE, f64::max);
        for m in 0..nt {
            if nt.is_multiple_of(2) && m == nt / 2 {
                continue;
            }
            let mm = (nt - m) % nt;
            for i in 0..n {
                if i == n / 2 {
                    continue;
                }
                let ii = (n - i) % n;
                if (self.get(m, i) - self.get(mm, ii).conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// `(∫∫ ⟨λ(τ, ξ)⟩^{2b} ⟨ξ⟩^{2s} |û(ξ, τ)|² dτ dξ)^{1/2}`.
pub fn bourgain_norm(u: &SpaceTimeField, b: f64, s: f64, alpha: f64) -> f64 {
    u.weighted_mass(|tau, xi| {
        let lw = if b == 0.0 {
            1.0
        } else {
            bracket_c(modulation_lambda(tau, xi, alpha)).powf(2.0 * b)
        };
        let sw = if s == 0.0 { 1.0 } else { bracket(xi).powf(2.0 * s) };
        lw * sw
    })
    .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Fourier;
    use crate::symbols::semigroup_w;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sobolev_examples() {
        let g = Grid1D::new(64, 4.0).unwrap();
        assert_eq!(sobolev_norm(&SpectralField::zeros(g), 1.0), 0.0);
        // indicator of [0, 1): 4 lattice points at spacing 1/4
        let chi = SpectralField::from_fn(g, |xi| {
            Complex64::new(if (0.0..1.0).contains(&xi) { 1.0 } else { 0.0 }, 0.0)
        });
        assert_relative_eq!(sobolev_norm(&chi, 0.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn sobolev_is_parseval_at_zero_and_monotone() {
        let g = Grid1D::new(128, 2.0).unwrap();
        let f = Fourier::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phi = f.forward_real(&u).unwrap();
        let l2 = (u.iter().map(|x| x * x).sum::<f64>() * g.dx() / (2.0 * PI)).sqrt();
        assert_relative_eq!(sobolev_norm(&phi, 0.0), l2, max_relative = 1e-12);
        let mut prev = 0.0;
        for s in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
            let v = sobolev_norm(&phi, s);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff_psi(0.5, 1.0).unwrap(), 1.0);
        assert_eq!(cutoff_psi(3.0, 1.0).unwrap(), 0.0);
        let v = cutoff_psi(2.5, 2.0).unwrap();
        assert!(v > 0.0 && v < 1.0);
        assert!(cutoff_psi(1.0, 0.0).is_err());
        for k in 0..=400 {
            let t = -3.0 + 6.0 * k as f64 / 400.0;
            let p = psi(t);
            assert!((0.0..=1.0).contains(&p));
            if t.abs() <= 1.0 {
                assert_eq!(p, 1.0);
            }
            if t.abs() >= 2.0 {
                assert_eq!(p, 0.0);
            }
            assert_eq!(p, psi(-t));
        }
    }

    #[test]
    fn triangle_weight_examples() {
        assert!(triangle_weight_check(0.0, 0.0, 0.0, -1.0).unwrap());
        assert!(triangle_weight_check(10.0, 10.0, -0.5, -1.0).unwrap());
        assert!(triangle_weight_check(1.0, 0.0, -2.0, -1.0).is_err());
        // without the constant the inequality fails once s - s_c > 1
        let (xi, s, s_c) = (100.0, 1.0, -1.0);
        let lhs = bracket(xi).powf(s - s_c);
        assert!(lhs > 2.0 * bracket(xi / 2.0).powf(s - s_c));
        assert!(triangle_weight_check(xi, xi / 2.0, s, s_c).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20_000 {
            let xi = rng.gen_range(-1e3..1e3);
            let xi1 = rng.gen_range(-1e3..1e3);
            let s_c = rng.gen_range(-2.0..0.0);
            let s = s_c + rng.gen_range(0.0..3.0);
            assert!(triangle_weight_check(xi, xi1, s, s_c).unwrap());
        }
    }

    #[test]
    fn space_time_plancherel() {
        let g = Grid1D::new(16, 1.0).unwrap();
        let st = SpaceTimeGrid::covering(g, -4.0, 4.0, 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = SpectralField::from_fn(g, |_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0))
            .symmetrized();
        let states: Vec<SpectralField> = st
            .times()
            .iter()
            .map(|&t| phi.scaled((-t * t).exp()))
            .collect();
        let u = SpaceTimeField::from_states(st, &states).unwrap();
        let direct: f64 = states.iter().map(|s| s.weighted_mass(|_| 1.0)).sum::<f64>() * st.dt
            / (2.0 * PI);
        assert_relative_eq!(bourgain_norm(&u, 0.0, 0.0, 1.0).powi(2), direct, max_relative = 1e-12);
        assert!(u.is_conjugate_symmetric(1e-12));
    }

    #[test]
    fn gaussian_in_time_transform() {
        // (2π)⁻¹∫e^{-t²}e^{-itτ}dt = e^{-τ²/4}/(2√π)
        let g = Grid1D::new(4, 1.0).unwrap();
        let st = SpaceTimeGrid::covering(g, -8.0, 8.0, 256).unwrap();
        let mut one = SpectralField::zeros(g);
        one.coeffs_mut()[0] = Complex64::new(1.0, 0.0);
        let states: Vec<_> = st.times().iter().map(|&t| one.scaled((-t * t).exp())).collect();
        let u = SpaceTimeField::from_states(st, &states).unwrap();
        for m in [0usize, 3, 10, 250] {
            let tau = st.tau(m);
            let expect = (-tau * tau / 4.0).exp() / (2.0 * PI.sqrt());
            assert!((u.get(m, 0) - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn free_solution_linear_estimate() {
        // ψ(t)W(t)φ has X^{1/2,s} norm bounded by a fixed multiple of the H^s norm.
        let g = Grid1D::new(16, 2.0).unwrap();
        let st = SpaceTimeGrid::covering(g, -4.0, 4.0, 4096).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let phi = SpectralField::from_fn(g, |_| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .symmetrized();
            let states: Vec<_> = st
                .times()
                .iter()
                .map(|&t| semigroup_w(t, &phi, 1.0).scaled(psi(t)))
                .collect();
            let u = SpaceTimeField::from_states(st, &states).unwrap();
            for s in [-1.0, 0.0, 1.0] {
                worst = worst.max(bourgain_norm(&u, 0.5, s, 1.0) / sobolev_norm(&phi, s));
            }
        }
        assert!(worst <= 10.0, "fitted constant {worst}");
    }
}

//! Fourier symbols of the linear part, modulations and the resonance function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::SpectralField;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolError {
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("frequencies do not sum to zero (residual {0:e})")]
    OffConstraint(f64),
    #[error("rho = {rho} outside (1/2, {upper})")]
    RhoOutOfRange { rho: f64, upper: f64 },
    #[error("delta must be positive, got {0}")]
    BadDelta(f64),
    #[error("beta must lie in (0, 2], got {0}")]
    BetaOutOfRange(f64),
}

/// Every exponent the experiments need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquationParams {
    pub alpha: f64,
    pub s: f64,
    pub b: f64,
    pub rho: f64,
    pub delta: f64,
    pub beta: f64,
    pub mu: f64,
    pub s_c: f64,
}

impl Default for EquationParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            s: 0.0,
            b: 0.5,
            rho: 0.75,
            delta: 0.01,
            beta: 1.0,
            mu: 0.01,
            s_c: -1.0,
        }
    }
}

impl EquationParams {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SymbolError> {
        check_alpha(self.alpha)?;
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(SymbolError::BetaOutOfRange(self.beta));
        }
        Ok(())
    }

    /// Extra constraints on `rho` and `delta` for the bilinear weight.
    pub fn validate_weight(&self) -> Result<(), SymbolError> {
        self.validate()?;
        let upper = rho_upper(self.alpha);
        if !(self.rho > 0.5 && self.rho < upper) {
            return Err(SymbolError::RhoOutOfRange {
                rho: self.rho,
                upper,
            });
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(SymbolError::BadDelta(self.delta));
        }
        Ok(())
    }
}

pub fn rho_upper(alpha: f64) -> f64 {
    ((3.0 + 2.0 * alpha) / 4.0).min(1.0)
}

pub fn check_alpha(alpha: f64) -> Result<(), SymbolError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(SymbolError::AlphaOutOfRange(alpha))
    }
}

/// `|ξ|^{2α}` without range checks. `0^0 = 1`, so `α = 0` gives the identity.
#[inline]
pub fn dissipation(xi: f64, alpha: f64) -> f64 {
    xi.abs().powf(2.0 * alpha)
}

pub fn dissipation_symbol(xi: f64, alpha: f64) -> Result<f64, SymbolError> {
    check_alpha(alpha)?;
    Ok(dissipation(xi, alpha))
}

/// `⟨x⟩ = (1 + x²)^{1/2}`.
#[inline]
pub fn bracket(x: f64) -> f64 {
    x.hypot(1.0)
}

#[inline]
pub fn bracket_c(z: Complex64) -> f64 {
    z.norm().hypot(1.0)
}

/// `h_j(ξ) = iξ³ - |ξ|^{2α}`, the symbol of the linear evolution.
#[inline]
pub fn linear_symbol(xi: f64, alpha: f64) -> Complex64 {
    Complex64::new(-dissipation(xi, alpha), xi * xi * xi)
}

/// Symbol of `W(t)`; the damping uses `|t|` so negative times stay bounded.
#[inline]
pub fn semigroup_factor(t: f64, xi: f64, alpha: f64) -> Complex64 {
    Complex64::from_polar((-t.abs() * dissipation(xi, alpha)).exp(), t * xi * xi * xi)
}

pub fn free_group_u(t: f64, phi: &SpectralField) -> SpectralField {
    phi.apply_symbol(|xi| Complex64::from_polar(1.0, t * xi * xi * xi))
}

pub fn semigroup_w(t: f64, phi: &SpectralField, alpha: f64) -> SpectralField {
    phi.apply_symbol(|xi| semigroup_factor(t, xi, alpha))
}

/// `λ = iτ - h(ξ) = i(τ - ξ³) + |ξ|^{2α}`.
#[inline]
pub fn modulation_lambda(tau: f64, xi: f64, alpha: f64) -> Complex64 {
    Complex64::new(dissipation(xi, alpha), tau - xi * xi * xi)
}

pub const CONSTRAINT_TOL: f64 = 1e-9;

/// `h(ξ) = 3iξ₁ξ₂ξ₃ - Σ|ξ_j|^{2α}` on `ξ₁ + ξ₂ + ξ₃ = 0`.
pub fn resonance_h(xi1: f64, xi2: f64, xi3: f64, alpha: f64) -> Result<Complex64, SymbolError> {
    check_alpha(alpha)?;
    let resid = xi1 + xi2 + xi3;
    let scale = xi1.abs().max(xi2.abs()).max(xi3.abs()).max(1.0);
    if resid.abs() > CONSTRAINT_TOL * scale {
        return Err(SymbolError::OffConstraint(resid));
    }
    Ok(resonance_unchecked(xi1, xi2, xi3, alpha))
}

#[inline]
pub fn resonance_unchecked(xi1: f64, xi2: f64, xi3: f64, alpha: f64) -> Complex64 {
    Complex64::new(
        -(dissipation(xi1, alpha) + dissipation(xi2, alpha) + dissipation(xi3, alpha)),
        3.0 * xi1 * xi2 * xi3,
    )
}

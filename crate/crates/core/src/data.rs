//! Initial data, specified in Fourier space.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid1D, SpectralField};
use crate::illposedness::{phi_n, IllposednessError};
use crate::norms::sobolev_norm;
use crate::symbols::bracket;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error(transparent)]
    Packet(#[from] IllposednessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    Zero,
    /// `û(ξ) = a·e^{-(wξ)²/2}`, a Gaussian bump of width `w` in space.
    Gaussian { amplitude: f64, width: f64 },
    /// Real data with Gaussian spectral envelope `e^{-(ξ/decay)²}` and i.i.d. normal
    /// coefficients, rescaled to the given `H⁰` norm.
    Random { norm: f64, decay: f64 },
    /// `û(ξ) = a⟨ξ⟩^{-exponent}`.
    Rough { amplitude: f64, exponent: f64 },
    /// The two-bump packet at frequency `±n` used by the inflation experiment.
    Packet { n: f64, s: f64 },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Gaussian {
            amplitude: 1.0,
            width: 1.0,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), DataError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(DataError::NotPositive { name, value })
    }
}

impl InitialData {
    pub fn build(&self, grid: Grid1D, seed: u64) -> Result<SpectralField, DataError> {
        match *self {
            InitialData::Zero => Ok(SpectralField::zeros(grid)),
            InitialData::Gaussian { amplitude, width } => {
                positive("width", width)?;
                Ok(SpectralField::from_fn(grid, |xi| {
                    Complex64::new(amplitude * (-0.5 * (width * xi).powi(2)).exp(), 0.0)
                }))
            }
            InitialData::Random { norm, decay } => {
                positive("decay", decay)?;
                random_smooth(grid, norm, decay, seed)
            }
            InitialData::Rough { amplitude, exponent } => Ok(SpectralField::from_fn(grid, |xi| {
                Complex64::new(amplitude * bracket(xi).powf(-exponent), 0.0)
            })),
            InitialData::Packet { n, s } => Ok(phi_n(n, s, grid)?),
        }
    }
}

fn random_smooth(grid: Grid1D, norm: f64, decay: f64, seed: u64) -> Result<SpectralField, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = SpectralField::from_fn(grid, |xi| {
        let env = (-(xi / decay).powi(2)).exp();
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) * env
    })
    .symmetrized();
    let current = sobolev_norm(&raw, 0.0);
    if current == 0.0 {
        return Ok(raw);
    }
    Ok(raw.scaled(norm / current))
}

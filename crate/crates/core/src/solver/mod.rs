//! Time evolution by an exponential integrator and by Duhamel/Picard iteration.

mod etd;
pub mod kernel;
mod picard;
mod smoothing;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Fourier, Grid1D, SpectralField};
use crate::norms::sobolev_norm;
use crate::symbols::{dissipation, EquationParams, SymbolError};

pub use etd::{step_exponential, EtdStepper};
pub use picard::{picard_iterate, PicardRun};
pub use smoothing::{smoothing_diagnostic, tail_mass, EnvelopeCheck, SmoothingReport, SmoothingRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("final time must be positive, got {0}")]
    BadFinalTime(f64),
    #[error("non-finite state after t = {last_good_time}")]
    BlowUp { last_good_time: f64 },
    #[error("Picard iteration diverges: distance grew from {previous:e} to {current:e} at iterate {iterate}")]
    Divergence {
        iterate: usize,
        previous: f64,
        current: f64,
    },
    #[error("initial data lives on a different grid")]
    GridMismatch,
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepperKind {
    Exponential,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    TwoThirds,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub stepper: StepperKind,
    pub picard_iterations: usize,
    pub dealias: Dealias,
    /// Distances below this are treated as converged by the Picard divergence test.
    pub tolerance: f64,
    /// Store every `save_every`-th step.
    pub save_every: usize,
    /// Switches the quadratic term off (pure linear flow).
    pub linear_only: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            stepper: StepperKind::Exponential,
            picard_iterations: 6,
            dealias: Dealias::TwoThirds,
            tolerance: 1e-14,
            save_every: 1,
            linear_only: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SolverError::BadStep(self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(SolverError::BadFinalTime(self.t_final));
        }
        Ok(())
    }

    /// Number of steps, rounding `t_final / dt` to the nearest integer.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }
}

/// Evaluates `½∂_x(u²)` in Fourier space.
#[derive(Debug, Clone)]
pub struct Nonlinearity {
    fourier: Fourier,
    keep: Vec<bool>,
    ik_half: Vec<Complex64>,
}

impl Nonlinearity {
    pub fn new(grid: Grid1D, dealias: Dealias) -> Self {
        let n = grid.n();
        let keep = (0..n)
            .map(|i| match dealias {
                Dealias::TwoThirds => 3 * grid.wavenumber(i).unsigned_abs() < n as u64,
                Dealias::None => true,
            })
            .collect();
        let ik_half = (0..n)
            .map(|i| Complex64::new(0.0, 0.5 * grid.frequency(i)))
            .collect();
        Self {
            fourier: Fourier::new(grid),
            keep,
            ik_half,
        }
    }

    pub fn grid(&self) -> Grid1D {
        self.fourier.grid()
    }

    /// Zeroes the modes the dealiasing rule discards.
    pub fn project(&self, coeffs: &mut [Complex64]) {
        for (c, &k) in coeffs.iter_mut().zip(&self.keep) {
            if !k {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Writes `(iξ/2)·F(u²)` into `out`.
    pub fn apply(&self, u: &[Complex64], out: &mut [Complex64]) {
        out.copy_from_slice(u);
        self.project(out);
        self.fourier.inverse_in_place(out);
        for v in out.iter_mut() {
            *v = Complex64::new(v.re * v.re - v.im * v.im, 2.0 * v.re * v.im);
        }
        self.fourier.forward_in_place(out);
        for ((c, &k), m) in out.iter_mut().zip(&self.keep).zip(&self.ik_half) {
            *c = if k { *c * m } else { Complex64::new(0.0, 0.0) };
        }
    }
}

/// Transform of `½∂_x(u²)`, dealiased by the 2/3 rule.
pub fn nonlinear_term(u: &SpectralField) -> SpectralField {
    let nl = Nonlinearity::new(u.grid(), Dealias::TwoThirds);
    let mut out = vec![Complex64::new(0.0, 0.0); u.grid().n()];
    nl.apply(u.coeffs(), &mut out);
    SpectralField::from_coeffs(u.grid(), out).expect("same length")
}

/// Stored states of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: EquationParams,
    pub dt: f64,
    times: Vec<f64>,
    states: Vec<SpectralField>,
}

impl Trajectory {
    pub fn new(params: EquationParams, dt: f64) -> Self {
        Self {
            params,
            dt,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    /// Appends a state; times must increase strictly.
    pub fn push(&mut self, t: f64, state: SpectralField) {
        if let Some(&last) = self.times.last() {
            assert!(t > last, "trajectory times must increase");
        }
        if let Some(first) = self.states.first() {
            assert_eq!(first.grid(), state.grid(), "trajectory grids must agree");
        }
        self.times.push(t);
        self.states.push(state);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &SpectralField)> {
        self.times.last().map(|&t| (t, self.states.last().unwrap()))
    }

    pub fn sobolev_norms(&self, s: f64) -> Vec<f64> {
        self.states.iter().map(|u| sobolev_norm(u, s)).collect()
    }

    /// `sup_t ‖u(t) - v(t)‖_{H^s}` over common stored times.
    pub fn distance(&self, other: &Trajectory, s: f64) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| sobolev_norm(&a.sub(b), s))
            .fold(0.0, f64::max)
    }

    /// `½‖u‖²` at each stored time.
    pub fn energies(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|u| 0.5 * u.weighted_mass(|_| 1.0))
            .collect()
    }

    /// `‖|D|^α u‖²` at each stored time.
    pub fn dissipation_rates(&self) -> Vec<f64> {
        let alpha = self.params.alpha;
        self.states
            .iter()
            .map(|u| u.weighted_mass(|xi| dissipation(xi, alpha)))
            .collect()
    }

    /// Residual of `d/dt ½‖u‖² + ‖|D|^α u‖² = 0` relative to `‖u‖²`, using fourth-order
    /// centered differences on the stored times (which must be uniformly spaced).
    pub fn energy_law_residuals(&self) -> Vec<(f64, f64)> {
        let e = self.energies();
        let d = self.dissipation_rates();
        if e.len() < 5 {
            return Vec::new();
        }
        let h = self.times[1] - self.times[0];
        (2..e.len() - 2)
            .map(|j| {
                let de = (e[j - 2] - 8.0 * e[j - 1] + 8.0 * e[j + 1] - e[j + 2]) / (12.0 * h);
                let scale = (2.0 * e[j]).max(f64::MIN_POSITIVE);
                (self.times[j], (de + d[j]).abs() / scale)
            })
            .collect()
    }
}

/// Runs the configured stepper from `phi` to `config.t_final`.
pub fn solve(
    phi: &SpectralField,
    params: &EquationParams,
    config: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    params.validate()?;
    config.validate()?;
    match config.stepper {
        StepperKind::Exponential => {
            let stepper = EtdStepper::new(phi.grid(), params.alpha, config);
            stepper.run(phi, params, config)
        }
        StepperKind::Picard => {
            picard_iterate(phi, config.t_final, config.picard_iterations, params, config)
                .map(|r| r.trajectory)
        }
    }
}

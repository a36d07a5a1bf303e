//! Picard iteration of the Duhamel map `u ↦ W(t)φ - ∫₀ᵗ W(t-t')·½∂_x(u²)(t') dt'`.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Nonlinearity, SolverConfig, SolverError, Trajectory};
use crate::grid::SpectralField;
use crate::norms::sobolev_norm;
use crate::symbols::{semigroup_factor, EquationParams};

/// The final iterate together with the distances between successive iterates.
#[derive(Debug, Clone)]
pub struct PicardRun {
    pub trajectory: Trajectory,
    /// `distances[n] = sup_t ‖u⁽ⁿ⁺¹⁾(t) - u⁽ⁿ⁾(t)‖_{H^s}`.
    pub distances: Vec<f64>,
}

impl PicardRun {
    /// `distances[n+1] / distances[n]`.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.distances
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .collect()
    }
}

type States = Vec<Vec<Complex64>>;

fn sup_distance(a: &States, b: &States, grid: crate::grid::Grid1D, s: f64) -> f64 {
    a.par_iter()
        .zip(b.par_iter())
        .map(|(x, y)| {
            let diff: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            sobolev_norm(&SpectralField::from_coeffs(grid, diff).expect("length"), s)
        })
        .reduce(|| 0.0, f64::max)
}

/// Returns the `k`-th Picard iterate on `[0, T]`, with the time integral evaluated by
/// the composite trapezoid rule on a uniform grid of step `config.dt` (rounded so that
/// it divides `T`) and the kernel `W(t - t')` applied exactly.
pub fn picard_iterate(
    phi: &SpectralField,
    t_final: f64,
    k: usize,
    params: &EquationParams,
    config: &SolverConfig,
) -> Result<PicardRun, SolverError> {
    params.validate()?;
    let cfg = SolverConfig {
        t_final,
        ..*config
    };
    cfg.validate()?;
    let grid = phi.grid();
    let n = grid.n();
    let steps = cfg.steps();
    let dt = t_final / steps as f64;
    let alpha = params.alpha;
    let nl = Nonlinearity::new(grid, cfg.dealias);

    let freqs = grid.frequencies_fft_order();
    let free: States = (0..=steps)
        .into_par_iter()
        .map(|j| {
            let t = j as f64 * dt;
            phi.coeffs()
                .iter()
                .zip(&freqs)
                .map(|(c, &xi)| c * semigroup_factor(t, xi, alpha))
                .collect()
        })
        .collect();
    let step: Vec<Complex64> = freqs
        .iter()
        .map(|&xi| semigroup_factor(dt, xi, alpha))
        .collect();

    let floor = cfg.tolerance
        * free
            .iter()
            .map(|c| sobolev_norm(&SpectralField::from_coeffs(grid, c.clone()).expect("length"), params.s))
            .fold(f64::MIN_POSITIVE, f64::max);

    let mut current = free.clone();
    let mut distances = Vec::with_capacity(k);
    let zero = Complex64::new(0.0, 0.0);
    for iterate in 0..k {
        if cfg.linear_only {
            distances.push(0.0);
            continue;
        }
        let forcing: States = current
            .par_iter()
            .map(|u| {
                let mut out = vec![zero; n];
                nl.apply(u, &mut out);
                out
            })
            .collect();
        let half = 0.5 * dt;
        let mut next = Vec::with_capacity(steps + 1);
        let mut acc = vec![zero; n];
        next.push(free[0].clone());
        for j in 0..steps {
            for i in 0..n {
                acc[i] = step[i] * (acc[i] + half * forcing[j][i]) + half * forcing[j + 1][i];
            }
            let u: Vec<Complex64> = free[j + 1].iter().zip(&acc).map(|(w, a)| w - a).collect();
            if u.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(SolverError::BlowUp {
                    last_good_time: j as f64 * dt,
                });
            }
            next.push(u);
        }
        let d = sup_distance(&next, &current, grid, params.s);
        if let Some(&prev) = distances.last() {
            if d > prev && d > floor {
                return Err(SolverError::Divergence {
                    iterate: iterate + 1,
                    previous: prev,
                    current: d,
                });
            }
        }
        distances.push(d);
        current = next;
    }

    let mut trajectory = Trajectory::new(*params, dt);
    for (j, c) in current.into_iter().enumerate() {
        trajectory.push(
            j as f64 * dt,
            SpectralField::from_coeffs(grid, c).expect("length"),
        );
    }
    Ok(PicardRun {
        trajectory,
        distances,
    })
}

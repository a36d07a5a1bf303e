//! Sobolev norms along a trajectory and spectral tail diagnostics.

use super::Trajectory;
use crate::grid::SpectralField;
use crate::norms::sobolev_norm;
use crate::symbols::dissipation;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingRow {
    pub t: f64,
    /// `‖u(t)‖_{H^σ}` for each requested σ.
    pub norms: Vec<f64>,
    /// `Σ_{|ξ| > cut} |û(t, ξ)|² Δξ`.
    pub tail: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingReport {
    pub s_list: Vec<f64>,
    pub tail_cut: f64,
    pub rows: Vec<SmoothingRow>,
    pub all_finite: bool,
    /// Tail mass is non-increasing over the stored times after the first one.
    pub tail_decreasing: bool,
}

pub fn tail_mass(u: &SpectralField, cut: f64) -> f64 {
    u.weighted_mass(|xi| if xi.abs() > cut { 1.0 } else { 0.0 })
}

pub fn smoothing_diagnostic(traj: &Trajectory, s_list: &[f64], tail_cut: f64) -> SmoothingReport {
    let rows: Vec<SmoothingRow> = traj
        .times()
        .iter()
        .zip(traj.states())
        .map(|(&t, u)| SmoothingRow {
            t,
            norms: s_list.iter().map(|&s| sobolev_norm(u, s)).collect(),
            tail: tail_mass(u, tail_cut),
        })
        .collect();
    let all_finite = rows
        .iter()
        .all(|r| r.norms.iter().all(|v| v.is_finite()) && r.tail.is_finite());
    let tail_decreasing = rows
        .iter()
        .skip(1)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1].tail <= w[0].tail);
    SmoothingReport {
        s_list: s_list.to_vec(),
        tail_cut,
        rows,
        all_finite,
        tail_decreasing,
    }
}

/// Tail of `u(t)` beyond `cut` against the linear prediction `e^{-t|ξ|^{2α}}|φ̂(ξ)|`,
/// both as `L²` norms over `|ξ| > cut`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeCheck {
    pub tail: f64,
    pub envelope: f64,
}

impl EnvelopeCheck {
    pub fn new(initial: &SpectralField, state: &SpectralField, t: f64, alpha: f64, cut: f64) -> Self {
        let tail = tail_mass(state, cut).sqrt();
        let envelope = initial
            .weighted_mass(|xi| {
                if xi.abs() > cut {
                    (-2.0 * t * dissipation(xi, alpha)).exp()
                } else {
                    0.0
                }
            })
            .sqrt();
        Self { tail, envelope }
    }

    pub fn holds(&self, factor: f64) -> bool {
        self.tail <= factor * self.envelope
    }
}

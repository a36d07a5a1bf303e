//! Dyadic blocks of the trilinear multiplier and numerical norm estimates.

pub mod estimate;
pub mod form;
pub mod lattice;
pub mod sweep;
pub mod weighted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Dyadic;
use crate::symbols::{bracket, check_alpha, dissipation, EquationParams, SymbolError, CONSTRAINT_TOL};

pub use estimate::{multiplier_norm_estimate, EstimateSettings, NormEstimate};
pub use form::{MultiplierGrid, SeparableTrilinear, SparseTrilinear, TrilinearForm};
pub use lattice::{block_form, BlockLattice};
pub use sweep::{verify_block_sweep, BlockRow, SweepReport, ShellRanges, SweepSettings};
pub use weighted::{bilinear_form, verify_weighted, WeightedReport, WeightedRow, WeightBox};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiplierError {
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("malformed form: {0}")]
    Malformed(String),
    #[error("block does not satisfy the hypotheses of case {expected:?} (it is {actual:?})")]
    CaseMismatch { expected: Case, actual: Case },
    #[error("alpha must be positive here, got {0}")]
    NeedsDissipation(f64),
    #[error("bad sweep settings: {0}")]
    BadSettings(String),
}

/// Space-time point `(τ, ξ)`.
pub type Eta = (f64, f64);

/// Frequency shells `N_j`, resonance shell `H` and modulation shells `L_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicBlock {
    pub n: [Dyadic; 3],
    pub h: Dyadic,
    pub l: [Dyadic; 3],
}

fn sorted3(v: [f64; 3]) -> [f64; 3] {
    let mut s = v;
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    s
}

impl DyadicBlock {
    pub fn new(n: [f64; 3], h: f64, l: [f64; 3]) -> Option<Self> {
        let d = |x: f64| Dyadic::from_value(x);
        Some(Self {
            n: [d(n[0])?, d(n[1])?, d(n[2])?],
            h: d(h)?,
            l: [d(l[0])?, d(l[1])?, d(l[2])?],
        })
    }

    pub fn n_values(&self) -> [f64; 3] {
        self.n.map(Dyadic::value)
    }

    pub fn l_values(&self) -> [f64; 3] {
        self.l.map(Dyadic::value)
    }

    /// `(min, med, max)` of the frequency shells.
    pub fn n_sorted(&self) -> [f64; 3] {
        sorted3(self.n_values())
    }

    pub fn l_sorted(&self) -> [f64; 3] {
        sorted3(self.l_values())
    }

    /// Slots reordered by `(N, L)`; blocks related by a permutation share it.
    pub fn canonical(&self) -> Self {
        let mut pairs = [(self.n[0], self.l[0]), (self.n[1], self.l[1]), (self.n[2], self.l[2])];
        pairs.sort();
        Self {
            n: pairs.map(|p| p.0),
            h: self.h,
            l: pairs.map(|p| p.1),
        }
    }

    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        Self {
            n: perm.map(|p| self.n[p]),
            h: self.h,
            l: perm.map(|p| self.l[p]),
        }
    }
}

impl std::fmt::Display for DyadicBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "N=({},{},{}) H={} L=({},{},{})",
            self.n[0], self.n[1], self.n[2], self.h, self.l[0], self.l[1], self.l[2]
        )
    }
}

/// Necessary conditions for a block to meet `ξ₁+ξ₂+ξ₃ = 0`, `τ₁+τ₂+τ₃ = 0`.
///
/// With `M = max(N_max² N_min, N_max^{2α})`: `N_max ≤ 2 N_med`, `M/2 < H`, `H < 36 M`
/// unless `H` is the bottom shell, `L_max ≤ 4 max(H, L_med)` and `max(H, L_med) ≤ 4 L_max`.
pub fn admissible(block: &DyadicBlock, alpha: f64) -> bool {
    let [n_min, n_med, n_max] = block.n_sorted();
    let [_, l_med, l_max] = block.l_sorted();
    let h = block.h.value();
    let m = (n_max * n_max * n_min).max(dissipation(n_max, alpha));
    let top = h.max(l_med);
    n_max <= 2.0 * n_med
        && h > 0.5 * m
        && (block.h.exponent() <= 0 || h < 36.0 * m)
        && l_max <= 4.0 * top
        && top <= 4.0 * l_max
}

/// `|λ_j| ≥ |ξ_j|^{2α}` rules out `2L_j ≤ N_j^{2α}`.
pub fn dissipation_compatible(block: &DyadicBlock, alpha: f64) -> bool {
    (0..3).all(|j| 2.0 * block.l[j].value() > dissipation(block.n[j].value(), alpha))
}

/// Membership of `x` with `x² = sq` in a modulation shell, compared in squares.
#[inline]
pub(crate) fn modulation_shell_contains_sq(shell: Dyadic, sq: f64) -> bool {
    let lo = shell.modulation_floor();
    let hi = 2.0 * shell.value();
    sq >= lo * lo && sq < hi * hi
}

/// `|λ|² = (τ - ξ³)² + |ξ|^{4α}`.
#[inline]
pub(crate) fn lambda_sq(tau: f64, xi: f64, alpha: f64) -> f64 {
    let mu = tau - xi * xi * xi;
    let a = dissipation(xi, alpha);
    mu * mu + a * a
}

/// `|h|²` of the resonance function.
#[inline]
pub(crate) fn resonance_sq(xi: [f64; 3], alpha: f64) -> f64 {
    let re: f64 = xi.iter().map(|&x| dissipation(x, alpha)).sum();
    let im = 3.0 * xi[0] * xi[1] * xi[2];
    re * re + im * im
}

/// Only `ξ₁+ξ₂+ξ₃ = 0` is enforced: the shells and the weight see `τ` through `λ_j` alone.
fn check_constraint(eta: [Eta; 3]) -> Result<(), MultiplierError> {
    let v = eta.map(|e| e.1);
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let resid = v.iter().sum::<f64>();
    if resid.abs() > CONSTRAINT_TOL * scale {
        return Err(SymbolError::OffConstraint(resid).into());
    }
    Ok(())
}

/// `1` when the three points lie in the block's shells, `0` otherwise.
pub fn block_indicator(eta: [Eta; 3], block: &DyadicBlock, alpha: f64) -> Result<u8, MultiplierError> {
    check_alpha(alpha)?;
    check_constraint(eta)?;
    let xi = eta.map(|e| e.1);
    let inside = (0..3).all(|j| {
        block.n[j].contains_frequency(xi[j].abs())
            && modulation_shell_contains_sq(block.l[j], lambda_sq(eta[j].0, xi[j], alpha))
    }) && modulation_shell_contains_sq(block.h, resonance_sq(xi, alpha));
    Ok(inside as u8)
}

/// Regimes of the block estimate, read with the factor-2 convention for `∼` and `≫`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    /// `L_med ≥ 2H`.
    HighModulation,
    /// Low modulation with `N_max ≤ 2 N_min`.
    LowBalanced,
    /// Low modulation, `N_a ∼ N_b ≫ N_slot`, and `L_slot` is the largest modulation with
    /// `L_slot ∼ H`.
    LowIsolated { slot: usize },
    LowOther,
}

pub fn classify(block: &DyadicBlock) -> Case {
    let [_, l_med, _] = block.l_sorted();
    let h = block.h.value();
    if l_med >= 2.0 * h {
        return Case::HighModulation;
    }
    let [n_min, _, n_max] = block.n_sorted();
    if n_max <= 2.0 * n_min {
        return Case::LowBalanced;
    }
    let n = block.n_values();
    let l = block.l_values();
    for j in 0..3 {
        let (a, b) = match j {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let pair_lo = n[a].min(n[b]);
        let pair_hi = n[a].max(n[b]);
        if pair_hi <= 2.0 * pair_lo
            && pair_lo > 2.0 * n[j]
            && l[j] >= l[a]
            && l[j] >= l[b]
            && l[j] <= 2.0 * h
            && h <= 2.0 * l[j]
        {
            return Case::LowIsolated { slot: j };
        }
    }
    Case::LowOther
}

/// Size of the block norm predicted in each regime, up to a uniform constant.
pub fn block_bound(block: &DyadicBlock, alpha: f64, case: Case, beta: f64) -> Result<f64, MultiplierError> {
    check_alpha(alpha)?;
    if alpha <= 0.0 {
        return Err(MultiplierError::NeedsDissipation(alpha));
    }
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(SymbolError::BetaOutOfRange(beta).into());
    }
    let actual = classify(block);
    if actual != case {
        return Err(MultiplierError::CaseMismatch {
            expected: case,
            actual,
        });
    }
    let [n_min, _, n_max] = block.n_sorted();
    let [l_min, l_med, _] = block.l_sorted();
    let q = 1.0 / (4.0 * alpha);
    let inner = match case {
        Case::HighModulation => n_min.sqrt(),
        Case::LowBalanced => (n_max.powf(-0.25) * l_med.powf(0.25)).min(l_med.powf(q)),
        Case::LowIsolated { slot } => {
            let n = block.n_values();
            let n1 = n[slot];
            // the smaller of the two comparable frequencies
            let n2 = (0..3).filter(|&k| k != slot).map(|k| n[k]).fold(f64::INFINITY, f64::min);
            let third = n2.powf((beta - 2.0) / (2.0 * beta))
                * n1.powf(-1.0 / (2.0 * beta))
                * l_med.powf(1.0 / (2.0 * beta));
            n1.sqrt().min(l_med.powf(q)).min(third)
        }
        Case::LowOther => (l_med.sqrt() / n_max).min(l_med.powf(q)).min(n_min.sqrt()),
    };
    Ok(l_min.sqrt() * inner)
}

/// `⟨ξ₁⟩^ρ⟨ξ₂⟩^ρ|ξ₃|⟨ξ₃⟩^{-ρ} / (⟨λ₁⟩^{1/2}⟨λ₂⟩^{1/2}⟨λ₃⟩^{1/2-δ})`.
pub fn bilinear_weight(eta: [Eta; 3], rho: f64, delta: f64, alpha: f64) -> Result<f64, MultiplierError> {
    let params = EquationParams {
        alpha,
        rho,
        delta,
        ..EquationParams::default()
    };
    params.validate_weight()?;
    check_constraint(eta)?;
    Ok(weight_factor(eta[0], rho, 0.5, alpha, false)
        * weight_factor(eta[1], rho, 0.5, alpha, false)
        * weight_factor(eta[2], rho, 0.5 - delta, alpha, true))
}

/// One slot of the separable weight: `⟨ξ⟩^{±ρ}` (times `|ξ|` for the output slot) over
/// `⟨λ⟩^b`.
pub(crate) fn weight_factor(eta: Eta, rho: f64, b: f64, alpha: f64, output: bool) -> f64 {
    let (tau, xi) = eta;
    let lam = lambda_sq(tau, xi, alpha);
    let br = (1.0 + lam).powf(-0.5 * b);
    if output {
        xi.abs() * bracket(xi).powf(-rho) * br
    } else {
        bracket(xi).powf(rho) * br
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blk(n: [f64; 3], h: f64, l: [f64; 3]) -> DyadicBlock {
        DyadicBlock::new(n, h, l).unwrap()
    }

    #[test]
    fn indicator_on_the_curve() {
        let eta = [(1.0, 1.0), (1.0, 1.0), (-8.0, -2.0)];
        let b = blk([1.0, 1.0, 2.0], 8.0, [1.0, 1.0, 4.0]);
        assert_eq!(block_indicator(eta, &b, 1.0).unwrap(), 1);
        let zero = [(1.0, 1.0), (-1.0, -1.0), (0.0, 0.0)];
        let b = blk([1.0, 1.0, 4.0], 8.0, [1.0, 1.0, 1.0]);
        assert_eq!(block_indicator(zero, &b, 1.0).unwrap(), 0);
        let off = [(0.0, 1.0), (0.0, 1.0), (0.0, -1.0)];
        assert!(block_indicator(off, &b, 1.0).is_err());
    }

    #[test]
    fn admissible_example_is_dissipation_incompatible() {
        let b = blk([4.0, 4.0, 1.0], 16.0, [16.0, 2.0, 2.0]);
        assert!(admissible(&b, 1.0));
        assert!(!dissipation_compatible(&b, 1.0));
    }

    #[test]
    fn bounds_in_each_regime() {
        let b = blk([2.0, 2.0, 1.0], 2.0, [4.0, 8.0, 16.0]);
        assert_eq!(classify(&b), Case::HighModulation);
        assert!((block_bound(&b, 1.0, Case::HighModulation, 1.0).unwrap() - 2.0).abs() < 1e-14);

        let b = blk([4.0, 4.0, 4.0], 16.0, [1.0, 16.0, 16.0]);
        assert_eq!(classify(&b), Case::LowBalanced);
        let v = block_bound(&b, 1.0, Case::LowBalanced, 1.0).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);

        let b = blk([1.0, 8.0, 8.0], 8.0, [1.0, 4.0, 8.0]);
        assert_eq!(classify(&b), Case::LowOther);
        assert!((block_bound(&b, 1.0, Case::LowOther, 1.0).unwrap() - 0.25).abs() < 1e-14);

        let b = blk([1.0, 8.0, 8.0], 8.0, [8.0, 4.0, 1.0]);
        assert_eq!(classify(&b), Case::LowIsolated { slot: 0 });
        // min{1, 4^{1/4}, 8^{-1/2}·1·4^{1/2}}
        let v = block_bound(&b, 1.0, Case::LowIsolated { slot: 0 }, 1.0).unwrap();
        assert!((v - (2.0 / 8f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn wrong_case_is_rejected() {
        let b = blk([1.0, 8.0, 8.0], 8.0, [1.0, 4.0, 8.0]);
        assert!(matches!(
            block_bound(&b, 1.0, Case::LowIsolated { slot: 0 }, 1.0),
            Err(MultiplierError::CaseMismatch { .. })
        ));
    }

    #[test]
    fn weight_at_a_curve_point() {
        let eta = [(1.0, 1.0), (1.0, 1.0), (-8.0, -2.0)];
        let w = bilinear_weight(eta, 0.75, 0.01, 1.0).unwrap();
        let expect = 2.0 * 2f64.powf(0.375) * 2f64.powf(0.375) * 5f64.powf(-0.375)
            / (2f64.powf(0.25) * 2f64.powf(0.25) * 17f64.powf(0.49 / 2.0));
        assert!((w - expect).abs() < 1e-14 * expect);
        assert!(bilinear_weight(eta, 1.2, 0.01, 1.0).is_err());
        assert!(bilinear_weight(eta, 0.75, 0.0, 1.0).is_err());
    }

    #[test]
    fn canonical_is_permutation_invariant() {
        let b = blk([4.0, 1.0, 4.0], 16.0, [2.0, 8.0, 1.0]);
        for p in [[0, 1, 2], [1, 0, 2], [2, 1, 0], [1, 2, 0], [2, 0, 1], [0, 2, 1]] {
            assert_eq!(b.permuted(p).canonical(), b.canonical());
            assert_eq!(admissible(&b.permuted(p), 1.0), admissible(&b, 1.0));
        }
    }
}

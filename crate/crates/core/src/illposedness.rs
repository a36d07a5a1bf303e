//! Second Picard iterate of the data `φ̂_N = N^{-s}(χ_{[N,N+2]} + χ_{[-N-2,-N]})` and the
//! norm inflation it exhibits below `s = -1`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid1D, SpectralField};
use crate::quadrature::{integrate, integrate_real, QuadSettings, QuadratureError};
use crate::solver::{picard_iterate, SolverConfig, SolverError};
use crate::symbols::{bracket, check_alpha, dissipation, linear_symbol, EquationParams, SymbolError};

/// Relative slack allowed when comparing computed norms with the closed-form bound.
pub const LOWER_BOUND_TOLERANCE: f64 = 0.01;

/// Fewest lattice points the interval `[N, N+2]` must contain.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Error)]
pub enum IllposednessError {
    #[error("N must be at least 1, got {0}")]
    BadN(f64),
    #[error("t must be nonnegative, got {0}")]
    BadTime(f64),
    #[error("[N, N+2] holds {points} lattice points, need {MIN_POINTS}")]
    UnderResolved { points: usize },
    #[error("N + 2 = {top} is not below the Nyquist frequency {nyquist}")]
    BeyondNyquist { top: f64, nyquist: f64 },
    #[error("ξ₁ = {xi1} is outside the interaction set of ξ = {xi}")]
    OutsideInteractionSet { xi: f64, xi1: f64 },
    #[error("ξ = {0} outside [-1/2, 1/2]")]
    OutsideLowBand(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn check_n(n: f64) -> Result<(), IllposednessError> {
    if n.is_finite() && n >= 1.0 {
        Ok(())
    } else {
        Err(IllposednessError::BadN(n))
    }
}

/// `φ_N` sampled on `grid`; the endpoints of `±[N, N+2]` get half weight.
pub fn phi_n(n: f64, s: f64, grid: Grid1D) -> Result<SpectralField, IllposednessError> {
    check_n(n)?;
    let top = n + 2.0;
    if top >= grid.nyquist() {
        return Err(IllposednessError::BeyondNyquist {
            top,
            nyquist: grid.nyquist(),
        });
    }
    let h = grid.spacing();
    let first = (n / h).ceil() as i64;
    let last = (top / h).floor() as i64;
    let points = (last - first + 1).max(0) as usize;
    if points < MIN_POINTS {
        return Err(IllposednessError::UnderResolved { points });
    }
    let amp = n.powf(-s);
    let eps = 1e-9 * h;
    Ok(SpectralField::from_fn(grid, |xi| {
        let a = xi.abs();
        let w = if (a - n).abs() <= eps || (a - top).abs() <= eps {
            0.5
        } else if a > n && a < top {
            1.0
        } else {
            0.0
        };
        Complex64::new(amp * w, 0.0)
    }))
}

/// `‖φ_N‖_{H^s}` of the continuum data.
pub fn phi_n_norm(n: f64, s: f64, quad: &QuadSettings) -> Result<f64, IllposednessError> {
    check_n(n)?;
    let (v, _) = integrate_real(|xi| bracket(xi).powf(2.0 * s), n, n + 2.0, &[], quad)?;
    Ok((2.0 * n.powf(-2.0 * s) * v).sqrt())
}

fn intersect(a: (f64, f64), b: (f64, f64)) -> Option<(f64, f64)> {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    (hi > lo).then_some((lo, hi))
}

/// Intervals of `ξ₁` with `ξ₁ ∈ σ₁I_N` and `ξ - ξ₁ ∈ σ₂I_N`, for the given sign pairs.
fn pieces(n: f64, xi: f64, signs: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let interval = |sg: f64| if sg > 0.0 { (n, n + 2.0) } else { (-n - 2.0, -n) };
    signs
        .iter()
        .filter_map(|&(s1, s2)| {
            let b = interval(s2);
            intersect(interval(s1), (xi - b.1, xi - b.0))
        })
        .collect()
}

const MIXED: [(f64, f64); 2] = [(-1.0, 1.0), (1.0, -1.0)];
const ALL: [(f64, f64); 4] = [(-1.0, 1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, -1.0)];

/// The interaction set: one factor in `I_N`, the other in `-I_N`.
pub fn interaction_set(n: f64, xi: f64) -> Vec<(f64, f64)> {
    pieces(n, xi, &MIXED)
}

pub fn interaction_measure(n: f64, xi: f64) -> f64 {
    interaction_set(n, xi).iter().map(|p| p.1 - p.0).sum()
}

/// `(|ξ₁³ + (ξ-ξ₁)³ - ξ³|, |ξ₁|^{2α} + |ξ-ξ₁|^{2α} - |ξ|^{2α})` for `ξ₁` in the interaction set.
pub fn resonance_magnitudes(n: f64, alpha: f64, xi: f64, xi1: f64) -> Result<(f64, f64), IllposednessError> {
    check_n(n)?;
    check_alpha(alpha)?;
    if xi.abs() > 0.5 {
        return Err(IllposednessError::OutsideLowBand(xi));
    }
    if !interaction_set(n, xi).iter().any(|p| xi1 >= p.0 && xi1 <= p.1) {
        return Err(IllposednessError::OutsideInteractionSet { xi, xi1 });
    }
    let xi2 = xi - xi1;
    let cubic = xi1.powi(3) + xi2.powi(3) - xi.powi(3);
    let diss = dissipation(xi1, alpha) + dissipation(xi2, alpha) - dissipation(xi, alpha);
    Ok((cubic.abs(), diss))
}

/// `(e^{t(a₁+a₂)} - e^{ta})/(a₁+a₂-a)`, continued through `a₁ + a₂ = a`.
fn duhamel_factor(t: f64, a1: Complex64, a2: Complex64, a: Complex64) -> Complex64 {
    let d = a1 + a2 - a;
    let z = d * t;
    if z.norm() < 1e-3 {
        (a * t).exp() * t * (1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        (((a1 + a2) * t).exp() - (a * t).exp()) / d
    }
}

/// `F_x(u_{2,N}(t))(ξ)` for `u₂ = ∫₀ᵗ W(t-t')∂_x(W(t')φ_N)² dt'`.
pub fn second_iterate_spectrum(
    n: f64,
    s: f64,
    alpha: f64,
    t: f64,
    xi: f64,
    quad: &QuadSettings,
) -> Result<Complex64, IllposednessError> {
    check_n(n)?;
    check_alpha(alpha)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(IllposednessError::BadTime(t));
    }
    if t == 0.0 || xi == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = linear_symbol(xi, alpha);
    let mut acc = Complex64::new(0.0, 0.0);
    for (lo, hi) in pieces(n, xi, &ALL) {
        let r = integrate(
            |x1| duhamel_factor(t, linear_symbol(x1, alpha), linear_symbol(xi - x1, alpha), a),
            lo,
            hi,
            &[],
            quad,
        )?;
        acc += r.value;
    }
    Ok(Complex64::new(0.0, xi) * n.powf(-2.0 * s) * acc)
}

fn weighted_square_integral(
    n: f64,
    s: f64,
    alpha: f64,
    t: f64,
    band: (f64, f64),
    breaks: &[f64],
    quad: &QuadSettings,
) -> Result<f64, IllposednessError> {
    let mut failure = None;
    let (v, _) = integrate_real(
        |xi| match second_iterate_spectrum(n, s, alpha, t, xi, quad) {
            Ok(u) => bracket(xi).powf(2.0 * s) * u.norm_sqr(),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        band.0,
        band.1,
        breaks,
        quad,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `(∫_{|ξ|≤1/2} ⟨ξ⟩^{2s} |û₂(t, ξ)|² dξ)^{1/2}`.
pub fn restricted_norm(n: f64, s: f64, alpha: f64, t: f64, quad: &QuadSettings) -> Result<f64, IllposednessError> {
    Ok(weighted_square_integral(n, s, alpha, t, (-0.5, 0.5), &[0.0], quad)?.sqrt())
}

/// `‖u₂(t)‖_{H^s}` over the whole support `[-4, 4] ∪ ±[2N, 2N+4]`.
pub fn full_norm(n: f64, s: f64, alpha: f64, t: f64, quad: &QuadSettings) -> Result<f64, IllposednessError> {
    let low = weighted_square_integral(n, s, alpha, t, (-4.0, 4.0), &[-2.0, 0.0, 2.0], quad)?;
    let mut high = 0.0;
    for sign in [1.0, -1.0] {
        let (a, b) = if sign > 0.0 {
            (2.0 * n, 2.0 * n + 4.0)
        } else {
            (-2.0 * n - 4.0, -2.0 * n)
        };
        high += weighted_square_integral(n, s, alpha, t, (a, b), &[sign * (2.0 * n + 2.0)], quad)?;
    }
    Ok((low + high).sqrt())
}

/// `N^{-2s-2}(e^{-(1/2)^{2α}t} - e^{-2(N+2)^{2α}t})`.
pub fn inflation_lower_bound(n: f64, s: f64, alpha: f64, t: f64) -> f64 {
    let gap = (-(0.5f64).powf(2.0 * alpha) * t).exp() - (-2.0 * (n + 2.0).powf(2.0 * alpha) * t).exp();
    n.powf(-2.0 * s - 2.0) * gap.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationSettings {
    pub s: f64,
    pub alpha: f64,
    pub t: f64,
    pub quad: QuadSettings,
}

impl Default for InflationSettings {
    fn default() -> Self {
        Self {
            s: -1.5,
            alpha: 1.0,
            t: 0.1,
            quad: QuadSettings {
                abs_tol: 0.0,
                rel_tol: 1e-9,
                max_subdivisions: 2000,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationRow {
    pub n: f64,
    pub phi_norm: f64,
    pub restricted: f64,
    pub full: f64,
    pub lower_bound: f64,
}

impl InflationRow {
    /// `‖u₂‖_{H^s} / ‖φ_N‖²_{H^s}`.
    pub fn ratio(&self) -> f64 {
        self.full / (self.phi_norm * self.phi_norm)
    }

    pub fn meets_bound(&self) -> bool {
        self.restricted >= self.lower_bound * (1.0 - LOWER_BOUND_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflationReport {
    pub settings: InflationSettings,
    pub rows: Vec<InflationRow>,
    /// Log-log slope of the restricted norm against `N`.
    pub slope: f64,
    /// Log-log slope of `‖u₂‖/‖φ_N‖²` against `N`.
    pub ratio_slope: f64,
    /// `N` of every row below the closed-form bound.
    pub violations: Vec<f64>,
    /// The quadratic estimate fails: the ratio grows with `N`.
    pub quadratic_estimate_fails: bool,
    /// Ratio slope at most 0.05.
    pub bounded_ratio: bool,
    /// Restricted norms increase along the sweep.
    pub increasing: bool,
    /// `α` outside `[1/2, 1]`.
    pub alpha_out_of_scope: bool,
}

pub(crate) fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Runs the sweep over `n_list`. With a grid, every `φ_N` must be representable on it.
pub fn inflation_experiment(
    settings: &InflationSettings,
    n_list: &[f64],
    grid: Option<Grid1D>,
) -> Result<InflationReport, IllposednessError> {
    check_alpha(settings.alpha)?;
    if !(settings.t > 0.0 && settings.t.is_finite()) {
        return Err(IllposednessError::BadTime(settings.t));
    }
    for &n in n_list {
        check_n(n)?;
        if let Some(g) = grid {
            phi_n(n, settings.s, g)?;
        }
    }
    let (s, alpha, t, q) = (settings.s, settings.alpha, settings.t, &settings.quad);
    let rows: Vec<InflationRow> = n_list
        .par_iter()
        .map(|&n| {
            Ok(InflationRow {
                n,
                phi_norm: phi_n_norm(n, s, q)?,
                restricted: restricted_norm(n, s, alpha, t, q)?,
                full: full_norm(n, s, alpha, t, q)?,
                lower_bound: inflation_lower_bound(n, s, alpha, t),
            })
        })
        .collect::<Result<_, IllposednessError>>()?;
    let ns: Vec<f64> = rows.iter().map(|r| r.n).collect();
    let slope = loglog_slope(&ns, &rows.iter().map(|r| r.restricted).collect::<Vec<_>>());
    let ratio_slope = loglog_slope(&ns, &rows.iter().map(InflationRow::ratio).collect::<Vec<_>>());
    let violations = rows.iter().filter(|r| !r.meets_bound()).map(|r| r.n).collect();
    let increasing = rows.windows(2).all(|w| w[1].restricted > w[0].restricted);
    Ok(InflationReport {
        settings: *settings,
        rows,
        slope,
        ratio_slope,
        violations,
        quadratic_estimate_fails: ratio_slope > 0.0,
        bounded_ratio: ratio_slope <= 0.05,
        increasing,
        alpha_out_of_scope: !(0.5..=1.0).contains(&alpha),
    })
}

/// `û₂(t)` on `grid` from two Picard runs with data `±εφ_N`: their sum is `-ε²u₂ + O(ε⁴)`.
pub fn picard_second_iterate(
    n: f64,
    s: f64,
    alpha: f64,
    t: f64,
    grid: Grid1D,
    config: &SolverConfig,
) -> Result<SpectralField, IllposednessError> {
    let phi = phi_n(n, s, grid)?;
    let eps = 1e-4 * n.powf(s);
    let params = EquationParams::with_alpha(alpha);
    let run = |sign: f64| -> Result<SpectralField, IllposednessError> {
        let r = picard_iterate(&phi.scaled(sign * eps), t, 2, &params, config)?;
        Ok(r.trajectory.last().expect("nonempty trajectory").1.clone())
    };
    let mut total = run(1.0)?;
    total.axpy(Complex64::new(1.0, 0.0), &run(-1.0)?);
    Ok(total.scaled(-1.0 / (eps * eps)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> QuadSettings {
        InflationSettings::default().quad
    }

    #[test]
    fn lower_bound_values() {
        let v = inflation_lower_bound(16.0, -2.0, 1.0, 0.1);
        let desk = 256.0 * ((-0.025f64).exp() - (-64.8f64).exp());
        assert!((v - desk).abs() < 1e-12 && (v - 249.68).abs() < 5e-3);
        assert_eq!(inflation_lower_bound(16.0, -2.0, 1.0, 0.0), 0.0);
        let a = inflation_lower_bound(16.0, -1.0, 0.5, 0.3);
        let b = inflation_lower_bound(512.0, -1.0, 0.5, 0.3);
        assert!((a - b).abs() < 1e-4 && a < b);
    }

    #[test]
    fn phi_norms() {
        // s = 0: measure of the support is 4
        assert!((phi_n_norm(64.0, 0.0, &quad()).unwrap() - 2.0).abs() < 1e-12);
        let v = phi_n_norm(512.0, -1.5, &quad()).unwrap();
        assert!((v - 2.0).abs() < 0.02, "{v}");
        let g = Grid1D::new(1024, 8.0).unwrap();
        let f = phi_n(16.0, 0.0, g).unwrap();
        assert!(f.is_conjugate_symmetric(0.0));
        // trapezoid weights make the lattice mass exact for constants
        assert!((crate::norms::sobolev_norm(&f, 0.0).powi(2) - 4.0 + 2.0 * g.spacing() * 0.5).abs() < 1e-12);
    }

    #[test]
    fn phi_rejects_bad_grids() {
        let coarse = Grid1D::new(256, 2.0).unwrap();
        assert!(matches!(phi_n(16.0, 0.0, coarse), Err(IllposednessError::UnderResolved { points: 5 })));
        let small = Grid1D::new(64, 4.0).unwrap();
        assert!(matches!(phi_n(16.0, 0.0, small), Err(IllposednessError::BeyondNyquist { .. })));
    }

    #[test]
    fn trivial_spectrum_values() {
        assert_eq!(second_iterate_spectrum(16.0, -2.0, 1.0, 0.0, 0.3, &quad()).unwrap(), 0.0.into());
        assert_eq!(second_iterate_spectrum(16.0, -2.0, 1.0, 0.1, 0.0, &quad()).unwrap(), 0.0.into());
    }

    #[test]
    fn interaction_set_measure() {
        for k in 0..=20 {
            let xi = -0.5 + k as f64 / 20.0;
            let m = interaction_measure(64.0, xi);
            assert!((m - 2.0 * (2.0 - xi.abs())).abs() < 1e-12);
            assert!(m >= 1.0);
        }
    }

    #[test]
    fn resonance_scalings() {
        let n = 1024.0;
        let (cubic, diss) = resonance_magnitudes(n, 1.0, 0.25, -n - 1.0).unwrap();
        let desk = 3.0 * 0.25 * (n + 1.0) * (n + 1.25);
        assert!((cubic - desk).abs() < 1e-6 * desk);
        assert!((cubic / (0.75 * n * n) - 1.0).abs() < 0.01);
        assert!((diss / (2.0 * n * n) - 1.0).abs() < 0.01);
        assert!(resonance_magnitudes(n, 1.0, 0.25, n - 5.0).is_err());
        assert!(resonance_magnitudes(n, 1.0, 0.7, -n - 1.0).is_err());
    }

    #[test]
    fn duhamel_factor_is_continuous() {
        let a = Complex64::new(-0.3, 0.2);
        let t = 0.7;
        let near = duhamel_factor(t, a, Complex64::new(1e-6, 0.0), a);
        let at = duhamel_factor(t, a, Complex64::new(0.0, 0.0), a);
        assert!((at - (a * t).exp() * t).norm() < 1e-15);
        assert!((near - at).norm() < 1e-5);
        let far = duhamel_factor(t, a, Complex64::new(-0.5, 0.4), a);
        let direct = ((Complex64::new(-0.5, 0.4) + a) * t).exp() - (a * t).exp();
        assert!((far - direct / Complex64::new(-0.5, 0.4)).norm() < 1e-14);
    }

    #[test]
    fn empty_sweep() {
        let rep = inflation_experiment(&InflationSettings::default(), &[], None).unwrap();
        assert!(rep.rows.is_empty() && rep.violations.is_empty());
    }
}

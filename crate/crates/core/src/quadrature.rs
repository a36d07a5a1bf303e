//! Adaptive Gauss–Kronrod (7, 15) quadrature for complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Gauss weights at the odd Kronrod nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("no convergence after {subdivisions} subdivisions: value {value}, error estimate {error:e}")]
    NoConvergence {
        value: Complex64,
        error: f64,
        subdivisions: usize,
    },
    #[error("non-finite integrand value near x = {0}")]
    NonFinite(f64),
    #[error("bad interval [{0}, {1}]")]
    BadInterval(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

struct Piece {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &mut impl FnMut(f64) -> Complex64, a: f64, b: f64) -> Result<Piece, QuadratureError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK[..7].iter().enumerate() {
        let (lo, hi) = (f(c - h * x), f(c + h * x));
        kron += (lo + hi) * WGK[j];
        if j % 2 == 1 {
            gauss += (lo + hi) * WG[j / 2];
        }
    }
    let value = kron * h;
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(QuadratureError::NonFinite(c));
    }
    Ok(Piece {
        a,
        b,
        value,
        error: ((kron - gauss) * h).norm(),
    })
}

/// `∫_a^b f`, with the interval split at every breakpoint inside it.
pub fn integrate(
    mut f: impl FnMut(f64) -> Complex64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    settings: &QuadSettings,
) -> Result<QuadResult, QuadratureError> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadratureError::BadInterval(a, b));
    }
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut cuts: Vec<f64> = breakpoints.iter().cloned().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);

    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        heap.push(gk15(&mut f, w[0], w[1])?);
    }
    let mut evaluations = 15 * heap.len();
    let mut subdivisions = 0;
    loop {
        let value: Complex64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= settings.abs_tol.max(settings.rel_tol * value.norm()) {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
            });
        }
        if subdivisions >= settings.max_subdivisions {
            return Err(QuadratureError::NoConvergence {
                value,
                error,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval at floating-point resolution
            return Err(QuadratureError::NoConvergence {
                value,
                error,
                subdivisions,
            });
        }
        heap.push(gk15(&mut f, worst.a, mid)?);
        heap.push(gk15(&mut f, mid, worst.b)?);
        evaluations += 30;
        subdivisions += 1;
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    settings: &QuadSettings,
) -> Result<(f64, f64), QuadratureError> {
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, breakpoints, settings)?;
    Ok((r.value.re, r.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_constants_and_odd_powers() {
        let k: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((k - 2.0).abs() < 1e-14 && (g - 2.0).abs() < 1e-14);
        // Gauss 7 is exact up to degree 13
        let m: f64 = 2.0 * (0..3).map(|j| WG[j] * XGK[2 * j + 1].powi(12)).sum::<f64>();
        assert!((m - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_is_exact() {
        let r = integrate_real(|x| 3.0 * x * x - x, 0.0, 2.0, &[], &QuadSettings::default()).unwrap();
        assert!((r.0 - 6.0).abs() < 1e-13);
    }

    #[test]
    fn kink_with_breakpoint() {
        let s = QuadSettings::default();
        let r = integrate_real(|x: f64| x.abs(), -1.0, 2.0, &[0.0], &s).unwrap();
        assert!((r.0 - 2.5).abs() < 1e-13);
        // without the breakpoint the adaptive refinement still gets there
        let r = integrate_real(|x: f64| x.abs(), -1.0, 2.0, &[], &s).unwrap();
        assert!((r.0 - 2.5).abs() < 1e-9);
    }

    #[test]
    fn oscillatory_complex() {
        let w = 40.0;
        let r = integrate(|x| Complex64::new(0.0, w * x).exp(), 0.0, 1.0, &[], &QuadSettings::default())
            .unwrap();
        let exact = (Complex64::new(0.0, w).exp() - 1.0) / Complex64::new(0.0, w);
        assert!((r.value - exact).norm() < 1e-10);
    }

    #[test]
    fn failures_are_reported() {
        let s = QuadSettings {
            max_subdivisions: 3,
            ..QuadSettings::default()
        };
        assert!(matches!(
            integrate_real(|x: f64| x.sqrt().recip(), 0.0, 1.0, &[], &s),
            Err(QuadratureError::NoConvergence { .. })
        ));
        assert!(integrate_real(|x| x, 1.0, 0.0, &[], &s).is_err());
        assert_eq!(integrate_real(|x| x, 1.0, 1.0, &[], &s).unwrap().0, 0.0);
    }
}

//! Lower bounds on trilinear norms by alternating maximization.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::form::TrilinearForm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSettings {
    /// Random starts tried after the all-ones start.
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when a sweep raises the value by less than this fraction.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iter: 500,
            tol: 1e-12,
            seed: 0,
        }
    }
}

/// `lower ≤ ‖m‖ ≤ upper`; `lower` is attained by `certificate`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    pub certificate: [Vec<Complex64>; 3],
    /// The best start stopped on the tolerance rather than the iteration cap.
    pub converged: bool,
    pub iterations: usize,
}

fn normalized(v: Vec<Complex64>) -> Vec<Complex64> {
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|c| c / n).collect()
    }
}

fn ascend(
    form: &dyn TrilinearForm,
    mut g: [Vec<Complex64>; 3],
    settings: &EstimateSettings,
) -> (f64, [Vec<Complex64>; 3], bool, usize) {
    let mut value = 0.0;
    for it in 1..=settings.max_iter {
        let before = value;
        for slot in 0..3 {
            let v = form.contract(slot, &g);
            let nv = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if nv == 0.0 {
                return (0.0, g, true, it);
            }
            g[slot] = v.into_iter().map(|c| c.conj() / nv).collect();
            value = nv;
        }
        if value - before <= settings.tol * value {
            return (value, g, true, it);
        }
    }
    (value, g, false, settings.max_iter)
}

/// Same iteration for nonnegative real coefficients, where the maximizers can be taken nonnegative.
fn ascend_real(
    form: &dyn TrilinearForm,
    mut g: [Vec<f64>; 3],
    settings: &EstimateSettings,
) -> (f64, [Vec<f64>; 3], bool, usize) {
    let mut value = 0.0;
    for it in 1..=settings.max_iter {
        let before = value;
        for slot in 0..3 {
            let v = form.contract_real(slot, &g).expect("real coefficients");
            let nv = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if nv == 0.0 {
                return (0.0, g, true, it);
            }
            g[slot] = v.into_iter().map(|c| c / nv).collect();
            value = nv;
        }
        if value - before <= settings.tol * value {
            return (value, g, true, it);
        }
    }
    (value, g, false, settings.max_iter)
}

fn unit_real(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n == 0.0 {
        v
    } else {
        v.into_iter().map(|c| c / n).collect()
    }
}

fn estimate_real(form: &dyn TrilinearForm, settings: &EstimateSettings) -> NormEstimate {
    let dims = form.dims();
    let mut best = ascend_real(form, dims.map(|d| unit_real(vec![1.0; d])), settings);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.restarts {
        let start = dims.map(|d| {
            unit_real(
                (0..d)
                    .map(|_| {
                        let x: f64 = StandardNormal.sample(&mut rng);
                        x.abs()
                    })
                    .collect(),
            )
        });
        let run = ascend_real(form, start, settings);
        if run.0 > best.0 {
            best = run;
        }
    }
    let (lower, g, converged, iterations) = best;
    NormEstimate {
        lower,
        upper: form.upper_bound().max(lower),
        certificate: g.map(|v| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect()),
        converged,
        iterations,
    }
}

pub fn multiplier_norm_estimate(form: &dyn TrilinearForm, settings: &EstimateSettings) -> NormEstimate {
    let dims = form.dims();
    if form.is_nonnegative() && form.contract_real(0, &dims.map(|d| vec![0.0; d])).is_some() {
        return estimate_real(form, settings);
    }
    let upper = form.upper_bound();
    let ones = dims.map(|d| normalized(vec![Complex64::new(1.0, 0.0); d]));
    let mut best = ascend(form, ones, settings);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    for _ in 0..settings.restarts {
        let start = dims.map(|d| {
            normalized(
                (0..d)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im)
                    })
                    .collect(),
            )
        });
        let run = ascend(form, start, settings);
        if run.0 > best.0 {
            best = run;
        }
    }
    let (lower, certificate, converged, iterations) = best;
    NormEstimate {
        lower,
        upper: upper.max(lower),
        certificate,
        converged,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplier::form::{MultiplierGrid, SparseTrilinear};

    fn point_grid() -> SparseTrilinear {
        MultiplierGrid::from_fn(1.0, 1.0, 1, 1, |a, b, _| {
            if a == (0.0, 0.0) && b == (0.0, 0.0) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap()
        .compile()
        .unwrap()
    }

    #[test]
    fn zero_form() {
        let f = MultiplierGrid::from_fn(0.5, 0.5, 1, 2, |_, _, _| Complex64::new(0.0, 0.0))
            .unwrap()
            .compile()
            .unwrap();
        let e = multiplier_norm_estimate(&f, &EstimateSettings::default());
        assert_eq!((e.lower, e.upper), (0.0, 0.0));
    }

    #[test]
    fn single_point() {
        let e = multiplier_norm_estimate(&point_grid(), &EstimateSettings::default());
        assert!((e.lower - 1.0).abs() < 1e-12 && (e.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_disjoint_points() {
        let f = SparseTrilinear::new([2, 2, 2], [vec![0, 1], vec![0, 1], vec![0, 1]], None, 1.0)
            .unwrap();
        let e = multiplier_norm_estimate(&f, &EstimateSettings::default());
        assert!((e.lower - 1.0).abs() < 1e-6, "{}", e.lower);
        assert!((e.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_attains_lower() {
        let f = SparseTrilinear::new(
            [3, 3, 3],
            [vec![0, 1, 2, 0], vec![1, 2, 0, 0], vec![2, 0, 1, 1]],
            Some(vec![
                Complex64::new(1.0, 1.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, -2.0),
                Complex64::new(0.3, 0.2),
            ]),
            1.0,
        )
        .unwrap();
        let e = multiplier_norm_estimate(&f, &EstimateSettings::default());
        assert!((f.value(&e.certificate).norm() - e.lower).abs() < 1e-12);
        assert!(e.lower <= e.upper + 1e-12);
    }
}

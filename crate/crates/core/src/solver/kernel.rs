//! The Duhamel kernel
//! `K_ξ(t) = ψ(t) ∫ (e^{itτ} - e^{-|t||ξ|^{2α}}) / (iτ + |ξ|^{2α}) ω̂(τ) dτ`
//! and the weighted `L²_τ` estimate of its time transform.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::norms::psi;
use crate::symbols::dissipation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("spectrum does not decay inside the sampled window (edge/peak = {0:e})")]
    WindowTooSmall(f64),
    #[error("spectrum needs at least two samples and a positive spacing")]
    BadSamples,
    #[error("the transform path needs |ξ|^(2α) > 0")]
    NoDissipation,
}

/// Edge samples larger than this fraction of the peak count as truncation.
pub const WINDOW_TOL: f64 = 1e-10;

/// Uniform samples `ω̂(τ₀ + kΔτ)`.
#[derive(Debug, Clone)]
pub struct SampledSpectrum {
    pub tau0: f64,
    pub dtau: f64,
    pub values: Vec<Complex64>,
}

impl SampledSpectrum {
    pub fn from_fn(
        tau0: f64,
        dtau: f64,
        len: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, KernelError> {
        if len < 2 || !(dtau > 0.0) {
            return Err(KernelError::BadSamples);
        }
        let values = (0..len).map(|k| f(tau0 + k as f64 * dtau)).collect();
        Ok(Self { tau0, dtau, values })
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.tau0 + k as f64 * self.dtau
    }

    fn check_window(&self) -> Result<(), KernelError> {
        if self.values.len() < 2 || !(self.dtau > 0.0) {
            return Err(KernelError::BadSamples);
        }
        let peak = self.values.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(());
        }
        let edge = self.values[0].norm().max(self.values[self.values.len() - 1].norm());
        if edge > WINDOW_TOL * peak {
            return Err(KernelError::WindowTooSmall(edge / peak));
        }
        Ok(())
    }
}

/// `(e^w - 1)/w`, accurate near 0.
fn phi1(w: Complex64) -> Complex64 {
    if w.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..24 {
            term = term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        (w.exp() - 1.0) / w
    }
}

/// `(e^{itτ} - e^{-|t|a}) / (iτ + a)` without cancellation for small `|t(iτ + a)|`.
pub fn kernel_weight(t: f64, tau: f64, a: f64) -> Complex64 {
    let s = t.abs();
    let z = Complex64::new(a, tau);
    let damp = (-s * a).exp();
    if t >= 0.0 {
        let w = z * s;
        if w.norm() < 1.0 {
            return phi1(w) * (damp * s);
        }
    } else {
        // e^{itτ} - e^{-sa} = e^{-sa}(e^{s z̄} - 1)
        let zb = z.conj();
        let w = zb * s;
        if w.norm() < 1.0 {
            let ratio = if z.norm() == 0.0 { Complex64::new(-1.0, 0.0) } else { zb / z };
            return phi1(w) * (damp * s) * ratio;
        }
    }
    (Complex64::from_polar(1.0, t * tau) - damp) / z
}

/// `K_ξ(t)` by trapezoid quadrature over the samples of `ω̂`.
pub fn duhamel_kernel_k(
    xi: f64,
    omega: &SampledSpectrum,
    t: f64,
    alpha: f64,
) -> Result<Complex64, KernelError> {
    omega.check_window()?;
    let cut = psi(t);
    if cut == 0.0 || t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = dissipation(xi, alpha);
    let last = omega.values.len() - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, w) in omega.values.iter().enumerate() {
        let weight = if k == 0 || k == last { 0.5 } else { 1.0 };
        acc += kernel_weight(t, omega.tau(k), a) * w * weight;
    }
    Ok(acc * (omega.dtau * cut))
}

/// Sum of Gaussians in `τ`, a convenient rapidly decaying `ω̂`.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    /// `(amplitude, center, width)`.
    pub terms: Vec<(Complex64, f64, f64)>,
}

impl GaussianMixture {
    pub fn eval(&self, tau: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|&(a, c, w)| {
                let x = (tau - c) / w;
                a * (-0.5 * x * x).exp()
            })
            .sum()
    }

    /// One to four bumps with centers in `[-spread, spread]` and widths in `[0.5, 5]`.
    pub fn random<R: Rng>(rng: &mut R, spread: f64) -> Self {
        let count = rng.gen_range(1..=4);
        let terms = (0..count)
            .map(|_| {
                (
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    rng.gen_range(-spread..=spread),
                    rng.gen_range(0.5..5.0),
                )
            })
            .collect();
        Self { terms }
    }
}

/// Discretization of the transform check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTransformSettings {
    /// Time step; `π/dt` is the largest resolved `|τ|`.
    pub dt: f64,
    /// `log₂` of the FFT length used to evaluate `K_ξ` (sets the `τ` spacing of `ω̂`).
    pub log2_len: u32,
}

impl Default for KernelTransformSettings {
    fn default() -> Self {
        Self {
            dt: 1.0 / 2048.0,
            log2_len: 18,
        }
    }
}

/// Both sides of
/// `‖⟨iτ + a⟩^{1/2} F_t K_ξ‖²_{L²} ≲ (∫|ω̂|/⟨iτ + a⟩)² + ∫|ω̂|²/⟨iτ + a⟩`, `a = |ξ|^{2α}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelTransformCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl KernelTransformCheck {
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else {
            0.0
        }
    }
}

/// Evaluates `K_ξ` on a time grid through one long FFT in `τ`, then transforms it back
/// over `[-4, 4)` to form the weighted norm.
pub fn kernel_transform_check(
    xi: f64,
    alpha: f64,
    omega: impl Fn(f64) -> Complex64,
    settings: &KernelTransformSettings,
) -> Result<KernelTransformCheck, KernelError> {
    let a = dissipation(xi, alpha);
    if a <= 0.0 {
        return Err(KernelError::NoDissipation);
    }
    let dt = settings.dt;
    let big = 1usize << settings.log2_len;
    let dtau = 2.0 * PI / (big as f64 * dt);
    let signed = |m: usize, len: usize| -> i64 {
        if m < len / 2 {
            m as i64
        } else {
            m as i64 - len as i64
        }
    };

    let samples: Vec<Complex64> = (0..big)
        .map(|k| omega(signed(k, big) as f64 * dtau))
        .collect();
    let peak = samples.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let edge = samples[big / 2].norm().max(samples[big / 2 - 1].norm());
    if peak > 0.0 && edge > WINDOW_TOL * peak {
        return Err(KernelError::WindowTooSmall(edge / peak));
    }

    let mut rhs_l1 = 0.0;
    let mut rhs_l2 = 0.0;
    let mut g = Vec::with_capacity(big);
    for (k, w) in samples.iter().enumerate() {
        let tau = signed(k, big) as f64 * dtau;
        let z = Complex64::new(a, tau);
        let br = (1.0 + z.norm_sqr()).sqrt();
        rhs_l1 += w.norm() / br;
        rhs_l2 += w.norm_sqr() / br;
        g.push(w / z);
    }
    let rhs = (rhs_l1 * dtau).powi(2) + rhs_l2 * dtau;

    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(big).process(&mut g);
    // g[m] · Δτ = ∫ e^{i t_m τ} ω̂(τ)/(iτ + a) dτ at t_m = m·dt
    let b0 = g[0] * dtau;

    let small = (8.0 / dt).round() as usize;
    let mut k = vec![Complex64::new(0.0, 0.0); small];
    for (m, slot) in k.iter_mut().enumerate() {
        let sm = signed(m, small);
        let t = sm as f64 * dt;
        let cut = psi(t);
        if cut == 0.0 {
            continue;
        }
        let idx = sm.rem_euclid(big as i64) as usize;
        *slot = (g[idx] * dtau - b0 * (-t.abs() * a).exp()) * cut;
    }
    planner.plan_fft_forward(small).process(&mut k);
    let dtau2 = 2.0 * PI / (small as f64 * dt);
    let scale = dt / (2.0 * PI);
    let lhs = k
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let tau = signed(j, small) as f64 * dtau2;
            (1.0 + tau * tau + a * a).sqrt() * (c * scale).norm_sqr()
        })
        .sum::<f64>()
        * dtau2;
    Ok(KernelTransformCheck { lhs, rhs })
}

/// `K_ξ(t)` at the grid times `m·dt`, `|m·dt| < 4`, through the same FFT route as
/// [`kernel_transform_check`]; exposed for cross-checks.
pub fn kernel_samples(
    xi: f64,
    alpha: f64,
    omega: impl Fn(f64) -> Complex64,
    settings: &KernelTransformSettings,
) -> Result<Vec<(f64, Complex64)>, KernelError> {
    let a = dissipation(xi, alpha);
    if a <= 0.0 {
        return Err(KernelError::NoDissipation);
    }
    let dt = settings.dt;
    let big = 1usize << settings.log2_len;
    let dtau = 2.0 * PI / (big as f64 * dt);
    let mut g: Vec<Complex64> = (0..big)
        .map(|k| {
            let kk = if k < big / 2 { k as i64 } else { k as i64 - big as i64 };
            let tau = kk as f64 * dtau;
            omega(tau) / Complex64::new(a, tau)
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(big).process(&mut g);
    let b0 = g[0] * dtau;
    let half = (4.0 / dt).round() as i64;
    Ok((-half..half)
        .map(|m| {
            let t = m as f64 * dt;
            let idx = m.rem_euclid(big as i64) as usize;
            (t, (g[idx] * dtau - b0 * (-t.abs() * a).exp()) * psi(t))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(tau: f64) -> Complex64 {
        Complex64::new((-(tau - 1.0).powi(2) / 4.0).exp(), 0.3 * (-tau * tau / 2.0).exp())
    }

    #[test]
    fn trivial_values() {
        let w = SampledSpectrum::from_fn(-40.0, 0.02, 4001, gaussian).unwrap();
        assert_eq!(duhamel_kernel_k(1.0, &w, 0.0, 1.0).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(duhamel_kernel_k(1.0, &w, 2.0, 1.0).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(duhamel_kernel_k(1.0, &w, -3.0, 1.0).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn double_resolution_oracle() {
        let coarse = SampledSpectrum::from_fn(-40.0, 0.02, 4001, gaussian).unwrap();
        let fine = SampledSpectrum::from_fn(-40.0, 0.01, 8001, gaussian).unwrap();
        for &(xi, alpha, t) in &[(1.0, 1.0, 0.5), (0.1, 0.5, -1.2), (3.0, 0.5, 1.7)] {
            let a = duhamel_kernel_k(xi, &coarse, t, alpha).unwrap();
            let b = duhamel_kernel_k(xi, &fine, t, alpha).unwrap();
            assert!((a - b).norm() < 1e-6, "{xi} {t}: {a} vs {b}");
        }
    }

    #[test]
    fn truncated_window_is_reported() {
        let w = SampledSpectrum::from_fn(-2.0, 0.01, 401, gaussian).unwrap();
        assert!(matches!(
            duhamel_kernel_k(1.0, &w, 0.5, 1.0),
            Err(KernelError::WindowTooSmall(_))
        ));
    }

    #[test]
    fn weight_is_continuous_across_branches() {
        for &a in &[0.0, 0.3, 2.0] {
            for &t in &[-1.5, -0.2, 0.2, 1.5] {
                for k in 0..200 {
                    let tau = -10.0 + 0.1 * k as f64;
                    let direct = if a == 0.0 && tau == 0.0 {
                        Complex64::new(t, 0.0)
                    } else {
                        (Complex64::from_polar(1.0, t * tau) - (-t.abs() * a).exp())
                            / Complex64::new(a, tau)
                    };
                    let w = kernel_weight(t, tau, a);
                    assert!((w - direct).norm() < 1e-9 * (1.0 + direct.norm()));
                }
            }
        }
    }

    #[test]
    fn fft_route_matches_quadrature() {
        let settings = KernelTransformSettings {
            dt: 1.0 / 512.0,
            log2_len: 16,
        };
        let samples = kernel_samples(1.0, 1.0, gaussian, &settings).unwrap();
        let w = SampledSpectrum::from_fn(-40.0, 0.01, 8001, gaussian).unwrap();
        for (t, v) in samples.iter().step_by(97) {
            let q = duhamel_kernel_k(1.0, &w, *t, 1.0).unwrap();
            assert!((q - v).norm() < 1e-6, "t={t}: {q} vs {v}");
        }
    }

    #[test]
    fn transform_check_has_moderate_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let settings = KernelTransformSettings {
            dt: 1.0 / 1024.0,
            log2_len: 17,
        };
        for _ in 0..3 {
            let w = GaussianMixture::random(&mut rng, 20.0);
            let c = kernel_transform_check(1.0, 1.0, |t| w.eval(t), &settings).unwrap();
            assert!(c.lhs > 0.0 && c.rhs > 0.0);
            assert!(c.ratio() < 10.0, "ratio {}", c.ratio());
        }
    }
}

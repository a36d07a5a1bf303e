//! Fourth-order exponential time differencing (Cox–Matthews), with the φ-function
//! coefficients evaluated by contour averages near the origin.

use num_complex::Complex64;

use super::{Nonlinearity, SolverConfig, SolverError, Trajectory};
use crate::grid::{Grid1D, SpectralField};
use crate::symbols::{linear_symbol, semigroup_factor, EquationParams};

const CONTOUR_POINTS: usize = 32;
const CONTOUR_SWITCH: f64 = 0.5;

fn direct_coefficients(w: Complex64) -> [Complex64; 4] {
    let ew = w.exp();
    let w3 = w * w * w;
    [
        ((w * 0.5).exp() - 1.0) / w,
        (-4.0 - w + ew * (4.0 - 3.0 * w + w * w)) / w3,
        (2.0 + w + ew * (w - 2.0)) / w3,
        (-4.0 - 3.0 * w - w * w + ew * (4.0 - w)) / w3,
    ]
}

// The functions are entire, so their value is the mean over a unit circle around z.
fn contour_coefficients(z: Complex64) -> [Complex64; 4] {
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    for j in 0..CONTOUR_POINTS {
        let theta = std::f64::consts::TAU * (j as f64 + 0.5) / CONTOUR_POINTS as f64;
        let v = direct_coefficients(z + Complex64::from_polar(1.0, theta));
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b;
        }
    }
    acc.map(|a| a / CONTOUR_POINTS as f64)
}

/// `((e^{z/2}-1)/z, f₁(z), f₂(z), f₃(z))` of the Cox–Matthews scheme; multiply by the
/// step to get the update weights.
fn etd_coefficients(z: Complex64) -> [Complex64; 4] {
    if z.norm() >= CONTOUR_SWITCH {
        direct_coefficients(z)
    } else {
        contour_coefficients(z)
    }
}

/// Precomputed per-mode coefficients for a fixed grid, `α` and step.
#[derive(Debug, Clone)]
pub struct EtdStepper {
    nl: Nonlinearity,
    dt: f64,
    linear_only: bool,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl EtdStepper {
    pub fn new(grid: Grid1D, alpha: f64, config: &SolverConfig) -> Self {
        let h = config.dt;
        let n = grid.n();
        let mut s = Self {
            nl: Nonlinearity::new(grid, config.dealias),
            dt: h,
            linear_only: config.linear_only,
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for i in 0..n {
            let xi = grid.frequency(i);
            let z = linear_symbol(xi, alpha) * h;
            let [q, f1, f2, f3] = etd_coefficients(z);
            s.e.push(semigroup_factor(h, xi, alpha));
            s.e2.push(semigroup_factor(0.5 * h, xi, alpha));
            s.q.push(q * h);
            s.f1.push(f1 * h);
            s.f2.push(f2 * h);
            s.f3.push(f3 * h);
        }
        s
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn rhs(&self, v: &[Complex64], out: &mut [Complex64]) {
        self.nl.apply(v, out);
        for c in out.iter_mut() {
            *c = -*c;
        }
    }

    /// Advances `v` by one step in place.
    pub fn step(&self, v: &mut [Complex64]) {
        if self.linear_only {
            for (x, e) in v.iter_mut().zip(&self.e) {
                *x *= e;
            }
            return;
        }
        let n = v.len();
        let zero = Complex64::new(0.0, 0.0);
        let mut nv = vec![zero; n];
        let mut na = vec![zero; n];
        let mut nb = vec![zero; n];
        let mut nc = vec![zero; n];
        let mut a = vec![zero; n];
        let mut b = vec![zero; n];
        let mut c = vec![zero; n];

        self.rhs(v, &mut nv);
        for i in 0..n {
            a[i] = self.e2[i] * v[i] + self.q[i] * nv[i];
        }
        self.rhs(&a, &mut na);
        for i in 0..n {
            b[i] = self.e2[i] * v[i] + self.q[i] * na[i];
        }
        self.rhs(&b, &mut nb);
        for i in 0..n {
            c[i] = self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i]);
        }
        self.rhs(&c, &mut nc);
        for i in 0..n {
            v[i] = self.e[i] * v[i]
                + nv[i] * self.f1[i]
                + 2.0 * (na[i] + nb[i]) * self.f2[i]
                + nc[i] * self.f3[i];
        }
    }

    /// Integrates from `phi` to `config.t_final`.
    pub fn run(
        &self,
        phi: &SpectralField,
        params: &EquationParams,
        config: &SolverConfig,
    ) -> Result<Trajectory, SolverError> {
        if phi.grid() != self.nl.grid() {
            return Err(SolverError::GridMismatch);
        }
        let steps = config.steps();
        let every = config.save_every.max(1);
        let mut v = phi.coeffs().to_vec();
        let grid = phi.grid();
        let mut traj = Trajectory::new(*params, self.dt);
        traj.push(0.0, SpectralField::from_coeffs(grid, v.clone()).expect("length"));
        for k in 1..=steps {
            self.step(&mut v);
            if v.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(SolverError::BlowUp {
                    last_good_time: (k - 1) as f64 * self.dt,
                });
            }
            if k % every == 0 || k == steps {
                let state = SpectralField::from_coeffs(grid, v.clone()).expect("length");
                traj.push(k as f64 * self.dt, state);
            }
        }
        Ok(traj)
    }
}

/// One exponential step of the full equation.
pub fn step_exponential(
    state: &SpectralField,
    dt: f64,
    params: &EquationParams,
) -> Result<SpectralField, SolverError> {
    params.validate()?;
    let config = SolverConfig {
        dt,
        t_final: dt,
        ..SolverConfig::default()
    };
    config.validate()?;
    let stepper = EtdStepper::new(state.grid(), params.alpha, &config);
    let mut v = state.coeffs().to_vec();
    stepper.step(&mut v);
    if v.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(SolverError::BlowUp { last_good_time: 0.0 });
    }
    Ok(SpectralField::from_coeffs(state.grid(), v).expect("length"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::sobolev_norm;
    use crate::symbols::semigroup_w;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_data(grid: Grid1D, seed: u64, amp: f64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = SpectralField::from_fn(grid, |xi| {
            let w = (-xi * xi / 2.0).exp();
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w
        })
        .symmetrized();
        let norm = sobolev_norm(&raw, 0.0);
        raw.scaled(amp / norm)
    }

    #[test]
    fn contour_matches_direct_where_both_are_accurate() {
        for k in 0..16 {
            let z = Complex64::from_polar(0.5 + 0.2 * k as f64, 0.7 * k as f64);
            let a = direct_coefficients(z);
            let b = contour_coefficients(z);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() < 1e-13 * x.norm().max(1.0));
            }
        }
        // limits at the origin: 1/2, 1/6, 1/6, 1/6
        let c = etd_coefficients(Complex64::new(0.0, 0.0));
        for (v, e) in c.iter().zip([0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((v - e).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = Grid1D::new(32, 2.0).unwrap();
        let p = EquationParams::with_alpha(1.0);
        let out = step_exponential(&SpectralField::zeros(g), 0.01, &p).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn linear_run_is_semigroup() {
        let g = Grid1D::new(64, 2.0).unwrap();
        let p = EquationParams::with_alpha(0.5);
        let phi = smooth_data(g, 1, 1.0);
        let cfg = SolverConfig {
            dt: 0.01,
            t_final: 0.01,
            linear_only: true,
            ..SolverConfig::default()
        };
        let st = EtdStepper::new(g, p.alpha, &cfg);
        let mut v = phi.coeffs().to_vec();
        st.step(&mut v);
        let w = semigroup_w(0.01, &phi, 0.5);
        for (a, b) in v.iter().zip(w.coeffs()) {
            assert!((a - b).norm() <= 1e-14);
        }
    }

    #[test]
    fn zero_amplitude_nonlinear_path_is_semigroup() {
        // at this amplitude the quadratic term is below roundoff
        let g = Grid1D::new(64, 2.0).unwrap();
        let p = EquationParams::with_alpha(1.0);
        let phi = smooth_data(g, 2, 1e-12);
        let out = step_exponential(&phi, 0.01, &p).unwrap();
        let w = semigroup_w(0.01, &phi, 1.0);
        assert!(out.sub(&w).max_abs() <= 1e-14 * phi.max_abs());
    }

    #[test]
    fn fourth_order_convergence() {
        let g = Grid1D::new(64, 2.0).unwrap();
        let p = EquationParams::with_alpha(0.5);
        let phi = smooth_data(g, 3, 2.0);
        let run = |dt: f64| {
            let cfg = SolverConfig {
                dt,
                t_final: 0.5,
                ..SolverConfig::default()
            };
            let st = EtdStepper::new(g, p.alpha, &cfg);
            st.run(&phi, &p, &cfg).unwrap().last().unwrap().1.clone()
        };
        let reference = run(0.5 / 1024.0);
        let e1 = sobolev_norm(&run(0.5 / 16.0).sub(&reference), 0.0);
        let e2 = sobolev_norm(&run(0.5 / 32.0).sub(&reference), 0.0);
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        let g = Grid1D::new(16, 1.0).unwrap();
        let p = EquationParams::with_alpha(1.0);
        let mut phi = SpectralField::zeros(g);
        phi.coeffs_mut()[1] = Complex64::new(f64::NAN, 0.0);
        let cfg = SolverConfig {
            dt: 0.1,
            t_final: 0.2,
            ..SolverConfig::default()
        };
        let st = EtdStepper::new(g, p.alpha, &cfg);
        assert_eq!(
            st.run(&phi, &p, &cfg).unwrap_err(),
            SolverError::BlowUp { last_good_time: 0.0 }
        );
    }
}

//! Discrete trilinear forms `T(g₁, g₂, g₃) = s·Σ m(i₁, i₂, i₃) g₁[i₁] g₂[i₂] g₃[i₃]`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::MultiplierError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A trilinear form on three finite coordinate spaces.
pub trait TrilinearForm: Sync {
    fn dims(&self) -> [usize; 3];

    /// `v[i] = ∂T/∂g_slot[i]`: the form with `g_slot` left free.
    fn contract(&self, slot: usize, g: &[Vec<Complex64>; 3]) -> Vec<Complex64>;

    /// A certified bound on `sup |T|` over unit vectors.
    fn upper_bound(&self) -> f64;

    /// All coefficients are real and nonnegative.
    fn is_nonnegative(&self) -> bool;

    /// `contract` for real arguments, when the coefficients are real.
    fn contract_real(&self, _slot: usize, _g: &[Vec<f64>; 3]) -> Option<Vec<f64>> {
        None
    }

    fn value(&self, g: &[Vec<Complex64>; 3]) -> Complex64 {
        self.contract(2, g)
            .iter()
            .zip(&g[2])
            .map(|(v, x)| v * x)
            .sum()
    }
}

fn others(slot: usize) -> (usize, usize) {
    match slot {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

#[derive(Debug, Clone)]
enum Coeffs {
    Ones,
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Coordinate-list storage; entries without explicit values are 1.
#[derive(Debug, Clone)]
pub struct SparseTrilinear {
    dims: [usize; 3],
    idx: [Vec<u32>; 3],
    coeffs: Coeffs,
    scale: f64,
    upper: f64,
}

impl SparseTrilinear {
    pub fn new(
        dims: [usize; 3],
        idx: [Vec<u32>; 3],
        values: Option<Vec<Complex64>>,
        scale: f64,
    ) -> Result<Self, MultiplierError> {
        if let Some(v) = &values {
            if v.len() != idx[0].len() {
                return Err(MultiplierError::Malformed("value column has wrong length".into()));
            }
        }
        Self::validate(&dims, &idx, scale)?;
        let coeffs = match values {
            None => Coeffs::Ones,
            Some(v) if v.iter().all(|c| c.im == 0.0) => Coeffs::Real(v.iter().map(|c| c.re).collect()),
            Some(v) => Coeffs::Complex(v),
        };
        Ok(Self::build(dims, idx, coeffs, scale))
    }

    /// Real coefficients.
    pub fn new_real(
        dims: [usize; 3],
        idx: [Vec<u32>; 3],
        values: Vec<f64>,
        scale: f64,
    ) -> Result<Self, MultiplierError> {
        if values.len() != idx[0].len() {
            return Err(MultiplierError::Malformed("value column has wrong length".into()));
        }
        Self::validate(&dims, &idx, scale)?;
        Ok(Self::build(dims, idx, Coeffs::Real(values), scale))
    }

    /// Real coefficients with a Schur bound computed by the caller.
    pub(crate) fn new_real_with_bound(
        dims: [usize; 3],
        idx: [Vec<u32>; 3],
        values: Vec<f64>,
        scale: f64,
        upper: f64,
    ) -> Result<Self, MultiplierError> {
        if values.len() != idx[0].len() {
            return Err(MultiplierError::Malformed("value column has wrong length".into()));
        }
        Self::validate(&dims, &idx, scale)?;
        Ok(Self {
            dims,
            idx,
            coeffs: Coeffs::Real(values),
            scale,
            upper,
        })
    }

    fn validate(dims: &[usize; 3], idx: &[Vec<u32>; 3], scale: f64) -> Result<(), MultiplierError> {
        let len = idx[0].len();
        if idx[1].len() != len || idx[2].len() != len {
            return Err(MultiplierError::Malformed("index columns differ in length".into()));
        }
        for s in 0..3 {
            if idx[s].iter().any(|&i| i as usize >= dims[s]) {
                return Err(MultiplierError::Malformed(format!("index out of range in slot {s}")));
            }
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(MultiplierError::Malformed(format!("bad scale {scale}")));
        }
        Ok(())
    }

    fn build(dims: [usize; 3], idx: [Vec<u32>; 3], coeffs: Coeffs, scale: f64) -> Self {
        let mut form = Self {
            dims,
            idx,
            coeffs,
            scale,
            upper: 0.0,
        };
        form.upper = form.schur_bound();
        form
    }

    pub fn nnz(&self) -> usize {
        self.idx[0].len()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn coeff(&self, e: usize) -> Complex64 {
        match &self.coeffs {
            Coeffs::Ones => Complex64::new(1.0, 0.0),
            Coeffs::Real(v) => Complex64::new(v[e], 0.0),
            Coeffs::Complex(v) => v[e],
        }
    }

    fn magnitude(&self, e: usize) -> f64 {
        match &self.coeffs {
            Coeffs::Ones => 1.0,
            Coeffs::Real(v) => v[e].abs(),
            Coeffs::Complex(v) => v[e].norm(),
        }
    }

    #[cfg(test)]
    pub(crate) fn recomputed_bound(&self) -> f64 {
        self.schur_bound()
    }

    /// `min_c (max row sum · max column sum)^{1/2}` of the unfolding with output slot `c`.
    fn schur_bound(&self) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..3 {
            let (a, b) = others(c);
            let mut rows = vec![0.0f64; self.dims[c]];
            for e in 0..self.nnz() {
                rows[self.idx[c][e] as usize] += self.magnitude(e);
            }
            let row_max = rows.iter().cloned().fold(0.0, f64::max);
            let mut keys: Vec<(u64, f64)> = (0..self.nnz())
                .map(|e| {
                    let k = self.idx[a][e] as u64 * self.dims[b] as u64 + self.idx[b][e] as u64;
                    (k, self.magnitude(e))
                })
                .collect();
            keys.sort_unstable_by_key(|p| p.0);
            let mut col_max = 0.0f64;
            let mut i = 0;
            while i < keys.len() {
                let mut j = i;
                let mut sum = 0.0;
                while j < keys.len() && keys[j].0 == keys[i].0 {
                    sum += keys[j].1;
                    j += 1;
                }
                col_max = col_max.max(sum);
                i = j;
            }
            best = best.min((row_max * col_max).sqrt());
        }
        best * self.scale
    }

    /// Same form with slots reordered: slot `k` of the result is slot `perm[k]` here.
    pub fn permuted(&self, perm: [usize; 3]) -> Self {
        let idx = [
            self.idx[perm[0]].clone(),
            self.idx[perm[1]].clone(),
            self.idx[perm[2]].clone(),
        ];
        let dims = [self.dims[perm[0]], self.dims[perm[1]], self.dims[perm[2]]];
        Self {
            dims,
            idx,
            coeffs: self.coeffs.clone(),
            scale: self.scale,
            upper: self.upper,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            scale: self.scale * c,
            upper: self.upper * c,
            ..self.clone()
        }
    }

    /// Entry-wise sum of two forms on the same coordinate spaces (duplicates are kept).
    pub fn sum(&self, other: &SparseTrilinear) -> Result<Self, MultiplierError> {
        if self.dims != other.dims {
            return Err(MultiplierError::Malformed("dimension mismatch".into()));
        }
        let mut idx = self.idx.clone();
        for s in 0..3 {
            idx[s].extend_from_slice(&other.idx[s]);
        }
        let vals = |f: &SparseTrilinear| -> Vec<Complex64> {
            (0..f.nnz()).map(|e| f.coeff(e) * f.scale).collect()
        };
        let mut values = vals(self);
        values.extend(vals(other));
        Self::new(self.dims, idx, Some(values), 1.0)
    }
}

impl TrilinearForm for SparseTrilinear {
    fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn contract(&self, slot: usize, g: &[Vec<Complex64>; 3]) -> Vec<Complex64> {
        let (a, b) = others(slot);
        let mut out = vec![ZERO; self.dims[slot]];
        let (ia, ib, io) = (&self.idx[a], &self.idx[b], &self.idx[slot]);
        let (ga, gb) = (&g[a], &g[b]);
        match &self.coeffs {
            Coeffs::Ones => {
                for e in 0..io.len() {
                    out[io[e] as usize] += ga[ia[e] as usize] * gb[ib[e] as usize];
                }
            }
            Coeffs::Real(v) => {
                for e in 0..io.len() {
                    out[io[e] as usize] += ga[ia[e] as usize] * gb[ib[e] as usize] * v[e];
                }
            }
            Coeffs::Complex(v) => {
                for e in 0..io.len() {
                    out[io[e] as usize] += v[e] * ga[ia[e] as usize] * gb[ib[e] as usize];
                }
            }
        }
        for x in out.iter_mut() {
            *x *= self.scale;
        }
        out
    }

    fn contract_real(&self, slot: usize, g: &[Vec<f64>; 3]) -> Option<Vec<f64>> {
        let (a, b) = others(slot);
        let mut out = vec![0.0; self.dims[slot]];
        let (ia, ib, io) = (&self.idx[a], &self.idx[b], &self.idx[slot]);
        let (ga, gb) = (&g[a], &g[b]);
        match &self.coeffs {
            Coeffs::Ones => {
                for e in 0..io.len() {
                    out[io[e] as usize] += ga[ia[e] as usize] * gb[ib[e] as usize];
                }
            }
            Coeffs::Real(v) => {
                for e in 0..io.len() {
                    out[io[e] as usize] += v[e] * ga[ia[e] as usize] * gb[ib[e] as usize];
                }
            }
            Coeffs::Complex(_) => return None,
        }
        for x in out.iter_mut() {
            *x *= self.scale;
        }
        Some(out)
    }

    fn upper_bound(&self) -> f64 {
        self.upper
    }

    fn is_nonnegative(&self) -> bool {
        match &self.coeffs {
            Coeffs::Ones => true,
            Coeffs::Real(v) => v.iter().all(|&c| c >= 0.0),
            Coeffs::Complex(_) => false,
        }
    }
}

/// Samples of `m(η₁, η₂)` on a uniform `(τ, ξ)` window `|τ| ≤ kτ·Δτ`, `|ξ| ≤ kξ·Δξ`,
/// with `η₃ = -η₁ - η₂`. All three test functions live on the same window.
#[derive(Debug, Clone)]
pub struct MultiplierGrid {
    pub dtau: f64,
    pub dxi: f64,
    pub half_tau: usize,
    pub half_xi: usize,
    values: Vec<Complex64>,
}

impl MultiplierGrid {
    fn side(&self) -> (usize, usize) {
        (2 * self.half_tau + 1, 2 * self.half_xi + 1)
    }

    /// Evaluates `f(η₁, η₂, η₃)` (each `η = (τ, ξ)`) at every lattice pair.
    pub fn from_fn(
        dtau: f64,
        dxi: f64,
        half_tau: usize,
        half_xi: usize,
        mut f: impl FnMut((f64, f64), (f64, f64), (f64, f64)) -> Complex64,
    ) -> Result<Self, MultiplierError> {
        if !(dtau > 0.0 && dxi > 0.0) {
            return Err(MultiplierError::Malformed("spacings must be positive".into()));
        }
        let nt = 2 * half_tau + 1;
        let nx = 2 * half_xi + 1;
        let pts = nt * nx;
        let mut values = Vec::with_capacity(pts * pts);
        let coord = |p: usize| -> (i64, i64) {
            ((p / nx) as i64 - half_tau as i64, (p % nx) as i64 - half_xi as i64)
        };
        for p1 in 0..pts {
            let (t1, x1) = coord(p1);
            for p2 in 0..pts {
                let (t2, x2) = coord(p2);
                let (t3, x3) = (-t1 - t2, -x1 - x2);
                values.push(f(
                    (t1 as f64 * dtau, x1 as f64 * dxi),
                    (t2 as f64 * dtau, x2 as f64 * dxi),
                    (t3 as f64 * dtau, x3 as f64 * dxi),
                ));
            }
        }
        Ok(Self {
            dtau,
            dxi,
            half_tau,
            half_xi,
            values,
        })
    }

    pub fn value(&self, p1: usize, p2: usize) -> Complex64 {
        let (nt, nx) = self.side();
        self.values[p1 * nt * nx + p2]
    }

    /// Drops zero samples and pairs whose `η₃` leaves the window; the weight per node is
    /// `Δτ·Δξ`, so the `ℓ²` form is scaled by `(ΔτΔξ)^{1/2}`.
    pub fn compile(&self) -> Result<SparseTrilinear, MultiplierError> {
        let (nt, nx) = self.side();
        let pts = nt * nx;
        let (ht, hx) = (self.half_tau as i64, self.half_xi as i64);
        let mut idx = [Vec::new(), Vec::new(), Vec::new()];
        let mut vals = Vec::new();
        for p1 in 0..pts {
            let (t1, x1) = ((p1 / nx) as i64 - ht, (p1 % nx) as i64 - hx);
            for p2 in 0..pts {
                let v = self.values[p1 * pts + p2];
                if v == ZERO {
                    continue;
                }
                let (t2, x2) = ((p2 / nx) as i64 - ht, (p2 % nx) as i64 - hx);
                let (t3, x3) = (-t1 - t2, -x1 - x2);
                if t3.abs() > ht || x3.abs() > hx {
                    continue;
                }
                let p3 = ((t3 + ht) as usize) * nx + (x3 + hx) as usize;
                idx[0].push(p1 as u32);
                idx[1].push(p2 as u32);
                idx[2].push(p3 as u32);
                vals.push(v);
            }
        }
        SparseTrilinear::new(
            [pts; 3],
            idx,
            Some(vals),
            (self.dtau * self.dxi).sqrt(),
        )
    }
}

/// `m(η₁, η₂, η₃) = w₁(η₁) w₂(η₂) w₃(η₃)` on a centered `nτ × nξ` window shared by the
/// three slots; contractions are two-dimensional convolutions done by FFT.
pub struct SeparableTrilinear {
    nt: usize,
    nx: usize,
    weights: [Vec<f64>; 3],
    scale: f64,
    fft_t: Arc<dyn Fft<f64>>,
    ifft_t: Arc<dyn Fft<f64>>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    upper: f64,
}

impl std::fmt::Debug for SeparableTrilinear {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SeparableTrilinear")
            .field("nt", &self.nt)
            .field("nx", &self.nx)
            .field("scale", &self.scale)
            .finish()
    }
}

impl SeparableTrilinear {
    /// Weights are indexed `k·nξ + j` with `τ = (k - ⌊nτ/2⌋)Δτ`, `ξ = (j - ⌊nξ/2⌋)Δξ`.
    pub fn new(
        nt: usize,
        nx: usize,
        weights: [Vec<f64>; 3],
        scale: f64,
    ) -> Result<Self, MultiplierError> {
        if weights.iter().any(|w| w.len() != nt * nx) || nt == 0 || nx == 0 {
            return Err(MultiplierError::Malformed("weight length mismatch".into()));
        }
        if weights.iter().flatten().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(MultiplierError::Malformed("weights must be finite and nonnegative".into()));
        }
        let mut planner = FftPlanner::new();
        let mut form = Self {
            nt,
            nx,
            fft_t: planner.plan_fft_forward(2 * nt),
            ifft_t: planner.plan_fft_inverse(2 * nt),
            fft_x: planner.plan_fft_forward(2 * nx),
            ifft_x: planner.plan_fft_inverse(2 * nx),
            weights,
            scale,
            upper: 0.0,
        };
        form.upper = form.schur_bound();
        Ok(form)
    }

    /// Index of `-η₁ - η₂` given the index sum `s` along one axis of length `n`.
    fn reflect(s: usize, n: usize) -> Option<usize> {
        // centre h = ⌊n/2⌋: k₃ - h = -(k₁ - h) - (k₂ - h)
        let h = (n / 2) as i64;
        let k = 3 * h - s as i64;
        (0..n as i64).contains(&k).then_some(k as usize)
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let (mt, mx) = (2 * self.nt, 2 * self.nx);
        let (ft, fx) = if inverse {
            (&self.ifft_t, &self.ifft_x)
        } else {
            (&self.fft_t, &self.fft_x)
        };
        for row in data.chunks_mut(mx) {
            fx.process(row);
        }
        let mut col = vec![ZERO; mt];
        for j in 0..mx {
            for k in 0..mt {
                col[k] = data[k * mx + j];
            }
            ft.process(&mut col);
            for k in 0..mt {
                data[k * mx + j] = col[k];
            }
        }
    }

    /// Linear convolution of two window functions on the doubled grid.
    fn convolve(&self, p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
        let (mt, mx) = (2 * self.nt, 2 * self.nx);
        let pad = |v: &[Complex64]| {
            let mut out = vec![ZERO; mt * mx];
            for k in 0..self.nt {
                out[k * mx..k * mx + self.nx].copy_from_slice(&v[k * self.nx..(k + 1) * self.nx]);
            }
            out
        };
        let mut a = pad(p);
        let mut b = pad(q);
        self.fft2(&mut a, false);
        self.fft2(&mut b, false);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        self.fft2(&mut a, true);
        let norm = (mt * mx) as f64;
        a.iter_mut().for_each(|x| *x /= norm);
        a
    }

    fn gather(&self, conv: &[Complex64], slot: usize) -> Vec<Complex64> {
        let mx = 2 * self.nx;
        let mut out = vec![ZERO; self.nt * self.nx];
        for st in 0..2 * self.nt - 1 {
            let Some(k) = Self::reflect(st, self.nt) else { continue };
            for sx in 0..2 * self.nx - 1 {
                let Some(j) = Self::reflect(sx, self.nx) else { continue };
                out[k * self.nx + j] = conv[st * mx + sx] * self.weights[slot][k * self.nx + j] * self.scale;
            }
        }
        out
    }

    fn schur_bound(&self) -> f64 {
        let mut best = f64::INFINITY;
        let n = self.nt * self.nx;
        for c in 0..3 {
            let (a, b) = others(c);
            let wa: Vec<Complex64> = self.weights[a].iter().map(|&w| Complex64::new(w, 0.0)).collect();
            let wb: Vec<Complex64> = self.weights[b].iter().map(|&w| Complex64::new(w, 0.0)).collect();
            let rows = self.gather(&self.convolve(&wa, &wb), c);
            let row_max = rows.iter().map(|z| z.re.abs()).fold(0.0, f64::max) / self.scale;
            // every column (η_a, η_b) holds a single coefficient
            let mut col_max = 0.0f64;
            for pa in 0..n {
                let (ka, ja) = (pa / self.nx, pa % self.nx);
                let wa = self.weights[a][pa];
                if wa == 0.0 {
                    continue;
                }
                for pb in 0..n {
                    let (kb, jb) = (pb / self.nx, pb % self.nx);
                    let (Some(k), Some(j)) =
                        (Self::reflect(ka + kb, self.nt), Self::reflect(ja + jb, self.nx))
                    else {
                        continue;
                    };
                    col_max = col_max.max(wa * self.weights[b][pb] * self.weights[c][k * self.nx + j]);
                }
            }
            best = best.min((row_max * col_max).sqrt());
        }
        best * self.scale
    }
}

impl TrilinearForm for SeparableTrilinear {
    fn dims(&self) -> [usize; 3] {
        [self.nt * self.nx; 3]
    }

    fn contract(&self, slot: usize, g: &[Vec<Complex64>; 3]) -> Vec<Complex64> {
        let (a, b) = others(slot);
        let p: Vec<Complex64> = g[a].iter().zip(&self.weights[a]).map(|(x, w)| x * w).collect();
        let q: Vec<Complex64> = g[b].iter().zip(&self.weights[b]).map(|(x, w)| x * w).collect();
        self.gather(&self.convolve(&p, &q), slot)
    }

    fn upper_bound(&self) -> f64 {
        self.upper
    }

    fn is_nonnegative(&self) -> bool {
        true
    }
}

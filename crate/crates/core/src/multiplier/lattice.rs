//! Semi-discrete form of a dyadic block.
//!
//! Frequencies live on one lattice `hZ` with `P` points in each sign of the smallest shell.
//! The two slots other than the largest frequency shell are enumerated and the remaining
//! frequency is fixed by the constraint. Modulations are integrated
//! exactly. On each frequency fiber a test function is constant on cells of
//! `μ = τ - ξ³`, of width `w(min(L_j, L_med))/Q` with `w(L)` the shell width, so each
//! coefficient is the area of a polygon.

use std::collections::HashMap;

use rustc_hash::FxHashMap;


use super::{modulation_shell_contains_sq, resonance_sq, DyadicBlock, MultiplierError, SparseTrilinear};
use crate::grid::{dyadic_shell, Dyadic};
use crate::symbols::{check_alpha, dissipation};

fn others(slot: usize) -> (usize, usize) {
    match slot {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Index of the largest entry, ties going to the last one.
fn argmax_last(v: [Dyadic; 3]) -> usize {
    let mut best = 0;
    for j in 1..3 {
        if v[j] >= v[best] {
            best = j;
        }
    }
    best
}

fn shell_width(l: Dyadic) -> f64 {
    if l.exponent() <= 0 {
        2.0
    } else {
        l.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockLattice {
    /// Frequency points per shell and sign.
    pub resolution: usize,
    /// Modulation cells per shell width.
    pub cells: usize,
    pub xi_spacing: [f64; 3],
    /// Slot whose frequency is fixed by the other two.
    pub xi_coarse: usize,
    /// Slot whose modulation cells are found from the other two.
    pub mu_last: usize,
    pub cell_width: [f64; 3],
}

impl BlockLattice {
    pub fn new(block: &DyadicBlock, resolution: usize, cells: usize) -> Result<Self, MultiplierError> {
        if resolution == 0 || !resolution.is_power_of_two() {
            return Err(MultiplierError::BadSettings(format!(
                "lattice resolution must be a power of two, got {resolution}"
            )));
        }
        if cells == 0 || !cells.is_power_of_two() {
            return Err(MultiplierError::BadSettings(format!(
                "cells per shell must be a power of two, got {cells}"
            )));
        }
        let p = resolution as f64;
        let xi_coarse = argmax_last(block.n);
        let (a, b) = others(xi_coarse);
        let h = block.n[a].min(block.n[b]).value() / p;
        let xi_spacing = [h; 3];
        let mut ls = block.l;
        ls.sort();
        let med = ls[1];
        Ok(Self {
            resolution,
            cells,
            xi_spacing,
            xi_coarse,
            mu_last: argmax_last(block.l),
            cell_width: block.l.map(|l| shell_width(l.min(med)) / cells as f64),
        })
    }

    /// `(h_a h_b / h_c)^{1/2}` for the frequency quadrature.
    pub fn scale(&self) -> f64 {
        let (a, b) = others(self.xi_coarse);
        (self.xi_spacing[a] * self.xi_spacing[b] / self.xi_spacing[self.xi_coarse]).sqrt()
    }

    /// `±k·h` inside the shell of `slot`.
    fn xi_points(&self, slot: usize, n: Dyadic) -> Vec<f64> {
        let h = self.xi_spacing[slot];
        let p = (n.value() / h).round() as i64;
        (p..2 * p)
            .flat_map(|k| [k as f64 * h, -(k as f64) * h])
            .collect()
    }
}

/// Closed `|μ|` range of the modulation set of shell `l` at dissipation `a`, if nonempty.
fn mu_range(l: Dyadic, a: f64) -> Option<(f64, f64)> {
    let lo = l.modulation_floor();
    let hi = 2.0 * l.value();
    if hi <= a {
        return None;
    }
    Some(((lo * lo - a * a).max(0.0).sqrt(), (hi * hi - a * a).sqrt()))
}

/// `∫∫_{[0,u]×[0,v]} 1{x + y ≤ s}`.
fn ramp_area(s: f64, u: f64, v: f64) -> f64 {
    let g = |x: f64| if x > 0.0 { 0.5 * x * x } else { 0.0 };
    g(s) - g(s - u) - g(s - v) + g(s - u - v)
}

/// Area of `{(x, y) ∈ A×B : -r - x - y ∈ C}` for intervals `A`, `B`, `C`.
pub(crate) fn overlap_area(a: (f64, f64), b: (f64, f64), c: (f64, f64), r: f64) -> f64 {
    let (u, v) = (a.1 - a.0, b.1 - b.0);
    // x + y ∈ (-r - c.1, -r - c.0], shifted so that A×B starts at the origin
    let base = a.0 + b.0;
    let hi = -r - c.0 - base;
    let lo = -r - c.1 - base;
    (ramp_area(hi, u, v) - ramp_area(lo, u, v)).max(0.0)
}

/// Nonempty pieces of `M ∩ [kw, (k+1)w)` with `M = [-hi, -lo] ∪ [lo, hi]`.
fn cells_of(range: (f64, f64), w: f64) -> Vec<(i64, (f64, f64))> {
    let (lo, hi) = range;
    let mut out = Vec::new();
    let k1 = (hi / w).ceil() as i64;
    for k in -k1..k1 {
        let (p, q) = (k as f64 * w, (k + 1) as f64 * w);
        let piece = if k >= 0 { (p.max(lo), q.min(hi)) } else { (p.max(-hi), q.min(-lo)) };
        if piece.1 > piece.0 {
            out.push((k, piece));
        }
    }
    out
}

/// One coefficient: frequency indices, modulation cells and the weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub key: [(i64, i64); 3],
    pub value: f64,
}

/// Calls `f` with every coefficient above the area tolerance; returns how many there were.
pub(crate) fn for_each_entry(
    block: &DyadicBlock,
    alpha: f64,
    lat: &BlockLattice,
    mut f: impl FnMut(Entry),
) -> usize {
    let (xa, xb) = others(lat.xi_coarse);
    let (ta, tb) = others(lat.mu_last);
    let tc = lat.mu_last;
    let wc = lat.cell_width[tc];
    let mut count = 0;
    for &u in &lat.xi_points(xa, block.n[xa]) {
        for &v in &lat.xi_points(xb, block.n[xb]) {
            let mut xi = [0.0; 3];
            xi[xa] = u;
            xi[xb] = v;
            xi[lat.xi_coarse] = -u - v;
            if !block.n[lat.xi_coarse].contains_frequency(xi[lat.xi_coarse].abs()) {
                continue;
            }
            if !modulation_shell_contains_sq(block.h, resonance_sq(xi, alpha)) {
                continue;
            }
            let ranges: Vec<(f64, f64)> = (0..3)
                .filter_map(|j| mu_range(block.l[j], dissipation(xi[j], alpha)))
                .collect();
            if ranges.len() < 3 {
                continue;
            }
            let r: f64 = xi.iter().map(|x| x * x * x).sum();
            let ca = cells_of(ranges[ta], lat.cell_width[ta]);
            let cb = cells_of(ranges[tb], lat.cell_width[tb]);
            let (lo_c, hi_c) = ranges[tc];
            let xk = [0, 1, 2].map(|j| (xi[j] / lat.xi_spacing[j]).round() as i64);
            for &(ka, ia) in &ca {
                for &(kb, ib) in &cb {
                    // μ_c ∈ [-r - ia.1 - ib.1, -r - ia.0 - ib.0]
                    let m_lo = -r - ia.1 - ib.1;
                    let m_hi = -r - ia.0 - ib.0;
                    if m_hi < -hi_c || m_lo > hi_c || (m_lo > -lo_c && m_hi < lo_c) {
                        continue;
                    }
                    let tol = 1e-12 * (r.abs() + hi_c + 1.0).powi(2);
                    let k0 = (m_lo / wc).floor() as i64;
                    let k1 = (m_hi / wc).floor() as i64;
                    for kc in k0..=k1 {
                        let (p, q) = (kc as f64 * wc, (kc + 1) as f64 * wc);
                        let ic = if kc >= 0 { (p.max(lo_c), q.min(hi_c)) } else { (p.max(-hi_c), q.min(-lo_c)) };
                        if ic.1 <= ic.0 {
                            continue;
                        }
                        let area = overlap_area(ia, ib, ic, r);
                        if area <= tol {
                            continue;
                        }
                        let widths = (ia.1 - ia.0) * (ib.1 - ib.0) * (ic.1 - ic.0);
                        let mut key = [(0, 0); 3];
                        key[ta] = (xk[ta], ka);
                        key[tb] = (xk[tb], kb);
                        key[tc] = (xk[tc], kc);
                        f(Entry {
                            key,
                            value: area / widths.sqrt(),
                        });
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Number of coefficients of the block with positive area.
pub fn support_size(block: &DyadicBlock, alpha: f64, resolution: usize, cells: usize) -> Result<usize, MultiplierError> {
    check_alpha(alpha)?;
    let lat = BlockLattice::new(block, resolution, cells)?;
    Ok(for_each_entry(block, alpha, &lat, |_| {}))
}

fn pack(key: (i64, i64)) -> u64 {
    (((key.0 + (1 << 31)) as u64) << 32) | ((key.1 + (1 << 31)) as u64 & 0xffff_ffff)
}

/// Adds the column sums of one frequency-pair segment to `col_max`. Every column of the
/// unfolding with output slot `c` fixes two frequencies, hence the third, so columns never
/// straddle segments.
fn segment_columns(segment: &[Entry], col_max: &mut [f64; 3], scratch: &mut Vec<((i64, i64), f64)>) {
    for c in 0..3 {
        let (a, b) = others(c);
        scratch.clear();
        scratch.extend(segment.iter().map(|e| ((e.key[a].1, e.key[b].1), e.value)));
        scratch.sort_unstable_by_key(|p| p.0);
        let mut i = 0;
        while i < scratch.len() {
            let mut sum = 0.0;
            let mut j = i;
            while j < scratch.len() && scratch[j].0 == scratch[i].0 {
                sum += scratch[j].1;
                j += 1;
            }
            col_max[c] = col_max[c].max(sum);
            i = j;
        }
    }
}

/// The block indicator as a sparse form on cell-constant test functions.
pub fn block_form(
    block: &DyadicBlock,
    alpha: f64,
    resolution: usize,
    cells: usize,
) -> Result<SparseTrilinear, MultiplierError> {
    check_alpha(alpha)?;
    let lat = BlockLattice::new(block, resolution, cells)?;
    let (xa, xb) = others(lat.xi_coarse);
    let mut maps: [FxHashMap<u64, u32>; 3] = Default::default();
    let mut idx: [Vec<u32>; 3] = Default::default();
    let mut values = Vec::new();
    let mut col_max = [0.0f64; 3];
    let mut segment: Vec<Entry> = Vec::new();
    let mut scratch = Vec::new();
    for_each_entry(block, alpha, &lat, |e| {
        if let Some(last) = segment.last() {
            if last.key[xa].0 != e.key[xa].0 || last.key[xb].0 != e.key[xb].0 {
                segment_columns(&segment, &mut col_max, &mut scratch);
                segment.clear();
            }
        }
        for j in 0..3 {
            let next = maps[j].len() as u32;
            idx[j].push(*maps[j].entry(pack(e.key[j])).or_insert(next));
        }
        values.push(e.value);
        segment.push(e);
    });
    segment_columns(&segment, &mut col_max, &mut scratch);
    let dims = [maps[0].len(), maps[1].len(), maps[2].len()];
    let mut upper = f64::INFINITY;
    for c in 0..3 {
        let mut rows = vec![0.0f64; dims[c]];
        for (i, v) in idx[c].iter().zip(&values) {
            rows[*i as usize] += v;
        }
        let row_max = rows.iter().cloned().fold(0.0, f64::max);
        upper = upper.min((row_max * col_max[c]).sqrt());
    }
    if values.is_empty() {
        upper = 0.0;
    }
    SparseTrilinear::new_real_with_bound(dims, idx, values, lat.scale(), upper * lat.scale())
}

/// Shell exponents covered by a sweep.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ShellSets {
    pub n: Vec<Dyadic>,
    pub h: Vec<Dyadic>,
    pub l: Vec<Dyadic>,
}

/// For one ordered frequency triple: every `(H, L₁, L₂, L₃)` that some lattice frequency
/// triple meets with real modulations. Closed intervals make this a superset, so a block
/// missing from it has no coefficients.
pub(crate) fn reachable_modulations(
    n: [Dyadic; 3],
    alpha: f64,
    sets: &ShellSets,
    resolution: usize,
) -> HashMap<Dyadic, Vec<bool>> {
    let nl = sets.l.len();
    let probe = DyadicBlock {
        n,
        h: Dyadic::ONE,
        l: [Dyadic::ONE; 3],
    };
    let lat = BlockLattice::new(&probe, resolution, 1).expect("power of two");
    let (xa, xb) = others(lat.xi_coarse);
    let mut out: HashMap<Dyadic, Vec<bool>> = HashMap::new();
    let l_first = sets.l[0].exponent();
    for &u in &lat.xi_points(xa, n[xa]) {
        for &v in &lat.xi_points(xb, n[xb]) {
            let mut xi = [0.0; 3];
            xi[xa] = u;
            xi[xb] = v;
            xi[lat.xi_coarse] = -u - v;
            if !n[lat.xi_coarse].contains_frequency(xi[lat.xi_coarse].abs()) {
                continue;
            }
            let Ok(h) = dyadic_shell(resonance_sq(xi, alpha).sqrt(), true) else {
                continue;
            };
            if !sets.h.contains(&h) {
                continue;
            }
            let a = xi.map(|x| dissipation(x, alpha));
            let r: f64 = xi.iter().map(|x| x * x * x).sum();
            let ranges: [Vec<(usize, (f64, f64))>; 3] = [0, 1, 2].map(|j| {
                sets.l
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &l)| mu_range(l, a[j]).map(|m| (i, m)))
                    .collect()
            });
            let bits = out.entry(h).or_insert_with(|| vec![false; nl * nl * nl]);
            for &(i1, (lo1, hi1)) in &ranges[0] {
                for &(i2, (lo2, hi2)) in &ranges[1] {
                    // μ₃ = -r - μ₁ - μ₂ with μ_j = ±[lo_j, hi_j]
                    for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let (p1, q1) = if s1 > 0.0 { (lo1, hi1) } else { (-hi1, -lo1) };
                        let (p2, q2) = if s2 > 0.0 { (lo2, hi2) } else { (-hi2, -lo2) };
                        let m_lo = -r - q1 - q2;
                        let m_hi = -r - p1 - p2;
                        let abs_lo = if m_lo <= 0.0 && m_hi >= 0.0 {
                            0.0
                        } else {
                            m_lo.abs().min(m_hi.abs())
                        };
                        let abs_hi = m_lo.abs().max(m_hi.abs());
                        let slack = 1e-9 * (1.0 + abs_hi + r.abs());
                        let lam_lo = ((abs_lo - slack).max(0.0).powi(2) + a[2] * a[2]).sqrt();
                        let lam_hi = ((abs_hi + slack).powi(2) + a[2] * a[2]).sqrt();
                        let first = dyadic_shell(lam_lo, true).expect("finite").exponent();
                        let last = dyadic_shell(lam_hi, true).expect("finite").exponent();
                        for e in first.max(l_first)..=last {
                            let i3 = (e - l_first) as usize;
                            if i3 < nl {
                                bits[(i1 * nl + i2) * nl + i3] = true;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

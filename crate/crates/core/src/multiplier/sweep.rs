//! Sweep over dyadic blocks: emptiness of inadmissible blocks and norm estimates against
//! the predicted block sizes.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::{block_form, reachable_modulations, support_size, ShellSets};
use super::{
    admissible, classify, block_bound, multiplier_norm_estimate, Case, DyadicBlock, EstimateSettings,
    MultiplierError,
};
use crate::grid::Dyadic;
use crate::symbols::check_alpha;

/// Inclusive exponent ranges of the dyadic shells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellRanges {
    pub n: (i32, i32),
    pub h: (i32, i32),
    pub l: (i32, i32),
}

impl Default for ShellRanges {
    fn default() -> Self {
        Self {
            n: (-2, 6),
            h: (0, 13),
            l: (0, 10),
        }
    }
}

impl ShellRanges {
    /// An inverted range is empty.
    fn sets(&self) -> Result<ShellSets, MultiplierError> {
        let span = |(a, b): (i32, i32)| (a..=b).map(Dyadic).collect::<Vec<_>>();
        if self.l.0 < 0 || self.h.0 < 0 {
            return Err(MultiplierError::BadSettings(
                "modulation shells start at the bottom shell 1".into(),
            ));
        }
        Ok(ShellSets {
            n: span(self.n),
            h: span(self.h),
            l: span(self.l),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub alpha: f64,
    pub beta: f64,
    pub ranges: ShellRanges,
    /// Frequency lattice points per shell and sign.
    pub resolution: usize,
    /// Modulation cells per shell width.
    pub cells: usize,
    pub estimate: EstimateSettings,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            ranges: ShellRanges::default(),
            resolution: 32,
            cells: 2,
            estimate: EstimateSettings {
                restarts: 2,
                max_iter: 200,
                tol: 1e-8,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: DyadicBlock,
    pub case: Case,
    pub support: usize,
    pub lower: f64,
    pub upper: f64,
    pub bound: f64,
}

impl BlockRow {
    pub fn ratio(&self) -> f64 {
        self.lower / self.bound
    }

    pub fn n_max(&self) -> f64 {
        self.block.n_sorted()[2]
    }

    pub fn l_max(&self) -> f64 {
        self.block.l_sorted()[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub settings: SweepSettings,
    /// One row per admissible block with lattice support, up to slot permutation.
    pub rows: Vec<BlockRow>,
    pub admissible_blocks: usize,
    pub inadmissible_blocks: usize,
    /// Inadmissible blocks that needed an exact lattice count.
    pub inadmissible_counted: usize,
    /// Inadmissible blocks with lattice points.
    pub violations: Vec<DyadicBlock>,
    /// `max lower/bound` over all rows.
    pub fitted_c: f64,
    /// Least-squares slope of `log max(lower/bound)` against `log N_max`.
    pub slope_n_max: f64,
    pub slope_l_max: f64,
}

fn slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Fit of `log₂ max ratio` against `log₂ key` over the distinct keys.
fn envelope_slope(rows: &[BlockRow], key: impl Fn(&BlockRow) -> f64) -> f64 {
    let mut best: HashMap<i64, f64> = HashMap::new();
    for r in rows {
        let k = key(r).log2().round() as i64;
        let e = best.entry(k).or_insert(0.0);
        *e = e.max(r.ratio());
    }
    let mut pts: Vec<(f64, f64)> = best
        .into_iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(k, v)| (k as f64, v.log2()))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
    slope(&pts)
}

fn estimate_block(block: &DyadicBlock, settings: &SweepSettings) -> Result<Option<BlockRow>, MultiplierError> {
    let form = block_form(block, settings.alpha, settings.resolution, settings.cells)?;
    if form.nnz() == 0 {
        return Ok(None);
    }
    let case = classify(block);
    let bound = block_bound(block, settings.alpha, case, settings.beta)?;
    let est = multiplier_norm_estimate(&form, &settings.estimate);
    Ok(Some(BlockRow {
        block: *block,
        case,
        support: form.nnz(),
        lower: est.lower,
        upper: est.upper,
        bound,
    }))
}

pub fn verify_block_sweep(settings: &SweepSettings) -> Result<SweepReport, MultiplierError> {
    check_alpha(settings.alpha)?;
    if settings.alpha <= 0.0 {
        return Err(MultiplierError::NeedsDissipation(settings.alpha));
    }
    for (name, v) in [("resolution", settings.resolution), ("cells", settings.cells)] {
        if v == 0 || !v.is_power_of_two() {
            return Err(MultiplierError::BadSettings(format!("{name} must be a power of two, got {v}")));
        }
    }
    let sets = settings.ranges.sets()?;
    let alpha = settings.alpha;
    let nl = sets.l.len();

    let mut triples: Vec<[Dyadic; 3]> = Vec::new();
    let empty = sets.h.is_empty() || sets.l.is_empty();
    for &a in sets.n.iter().filter(|_| !empty) {
        for &b in &sets.n {
            for &c in &sets.n {
                triples.push([a, b, c]);
            }
        }
    }
    let reach: HashMap<[Dyadic; 3], HashMap<Dyadic, Vec<bool>>> = triples
        .par_iter()
        .map(|&n| (n, reachable_modulations(n, alpha, &sets, settings.resolution)))
        .collect();
    let reachable = |b: &DyadicBlock| -> bool {
        let idx = |d: Dyadic| (d.exponent() - sets.l[0].exponent()) as usize;
        reach[&b.n]
            .get(&b.h)
            .is_some_and(|bits| bits[(idx(b.l[0]) * nl + idx(b.l[1])) * nl + idx(b.l[2])])
    };

    let mut admissible_blocks = 0usize;
    let mut inadmissible_blocks = 0usize;
    let mut to_count: Vec<DyadicBlock> = Vec::new();
    let mut to_estimate: BTreeSet<DyadicBlock> = BTreeSet::new();
    for &n in &triples {
        for &h in &sets.h {
            for &l1 in &sets.l {
                for &l2 in &sets.l {
                    for &l3 in &sets.l {
                        let b = DyadicBlock { n, h, l: [l1, l2, l3] };
                        if admissible(&b, alpha) {
                            if b == b.canonical() {
                                admissible_blocks += 1;
                                if reachable(&b) {
                                    to_estimate.insert(b);
                                }
                            }
                        } else {
                            inadmissible_blocks += 1;
                            if reachable(&b) {
                                to_count.push(b);
                            }
                        }
                    }
                }
            }
        }
    }

    let counts: Vec<(DyadicBlock, usize)> = to_count
        .par_iter()
        .map(|b| support_size(b, alpha, settings.resolution, settings.cells).map(|c| (*b, c)))
        .collect::<Result<_, _>>()?;
    let mut violations: Vec<DyadicBlock> = counts.iter().filter(|c| c.1 > 0).map(|c| c.0).collect();
    violations.sort();

    let blocks: Vec<DyadicBlock> = to_estimate.into_iter().collect();
    let rows: Vec<BlockRow> = blocks
        .par_iter()
        .map(|b| estimate_block(b, settings))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();

    let fitted_c = rows.iter().map(BlockRow::ratio).fold(0.0, f64::max);
    let slope_n_max = envelope_slope(&rows, BlockRow::n_max);
    let slope_l_max = envelope_slope(&rows, BlockRow::l_max);
    Ok(SweepReport {
        settings: *settings,
        rows,
        admissible_blocks,
        inadmissible_blocks,
        inadmissible_counted: to_count.len(),
        violations,
        fitted_c,
        slope_n_max,
        slope_l_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep() {
        let settings = SweepSettings {
            ranges: ShellRanges {
                n: (-1, 1),
                h: (0, 6),
                l: (0, 5),
            },
            resolution: 8,
            ..SweepSettings::default()
        };
        let rep = verify_block_sweep(&settings).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert!(!rep.rows.is_empty());
        for r in &rep.rows {
            assert!(r.lower <= r.upper * (1.0 + 1e-9));
            assert!(r.bound > 0.0);
        }
    }

    #[test]
    fn empty_sweep() {
        let settings = SweepSettings {
            ranges: ShellRanges {
                n: (1, 0),
                h: (0, 4),
                l: (0, 4),
            },
            ..SweepSettings::default()
        };
        let rep = verify_block_sweep(&settings).unwrap();
        let inverted_l = SweepSettings {
            ranges: ShellRanges {
                n: (0, 1),
                h: (0, 4),
                l: (3, 2),
            },
            ..settings
        };
        assert!(verify_block_sweep(&inverted_l).unwrap().rows.is_empty());
        assert!(rep.rows.is_empty() && rep.violations.is_empty());
        assert_eq!(rep.admissible_blocks + rep.inadmissible_blocks, 0);
        assert_eq!(rep.fitted_c, 0.0);
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 0.5 * k as f64 + 1.0)).collect();
        assert!((slope(&pts) - 0.5).abs() < 1e-14);
    }
}

//! Norm of the full weighted multiplier on nested boxes.

use serde::{Deserialize, Serialize};

use super::{multiplier_norm_estimate, weight_factor, EstimateSettings, MultiplierError, SeparableTrilinear};
use crate::symbols::EquationParams;

/// A centered box of `points × points` lattice nodes with spacings `Δτ`, `Δξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBox {
    pub points: usize,
    pub dtau: f64,
    pub dxi: f64,
}

/// The separable weight on a box; `params` supplies `α`, `ρ` and `δ`.
pub fn bilinear_form(params: &EquationParams, bx: &WeightBox) -> Result<SeparableTrilinear, MultiplierError> {
    params.validate_weight()?;
    if bx.points == 0 || !(bx.dtau > 0.0 && bx.dxi > 0.0) {
        return Err(MultiplierError::BadSettings(format!("bad box {bx:?}")));
    }
    let n = bx.points;
    let h = (n / 2) as f64;
    let node = |p: usize| ((((p / n) as f64) - h) * bx.dtau, (((p % n) as f64) - h) * bx.dxi);
    let side = |b: f64, output: bool| -> Vec<f64> {
        (0..n * n)
            .map(|p| weight_factor(node(p), params.rho, b, params.alpha, output))
            .collect()
    };
    let inner = side(0.5, false);
    let weights = [inner.clone(), inner, side(0.5 - params.delta, true)];
    SeparableTrilinear::new(n, n, weights, (bx.dtau * bx.dxi).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub points: usize,
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedReport {
    pub params: EquationParams,
    pub dtau: f64,
    pub dxi: f64,
    pub rows: Vec<WeightedRow>,
    /// Last lower estimate over the one before it.
    pub final_ratio: f64,
    /// Least-squares slope of `log lower` against `log points`.
    pub slope: f64,
}

/// Estimates on boxes of the given sizes at fixed spacing, so the boxes are nested.
pub fn verify_weighted(
    params: &EquationParams,
    sizes: &[usize],
    dtau: f64,
    dxi: f64,
    estimate: &EstimateSettings,
) -> Result<WeightedReport, MultiplierError> {
    params.validate_weight()?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &points in sizes {
        let form = bilinear_form(params, &WeightBox { points, dtau, dxi })?;
        let e = multiplier_norm_estimate(&form, estimate);
        rows.push(WeightedRow {
            points,
            lower: e.lower,
            upper: e.upper,
            converged: e.converged,
        });
    }
    let final_ratio = match rows.as_slice() {
        [.., a, b] if a.lower > 0.0 => b.lower / a.lower,
        _ => 1.0,
    };
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.lower > 0.0)
        .map(|r| ((r.points as f64).ln(), r.lower.ln()))
        .collect();
    let slope = if pts.len() < 2 {
        0.0
    } else {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    Ok(WeightedReport {
        params: *params,
        dtau,
        dxi,
        rows,
        final_ratio,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplier::{bilinear_weight, TrilinearForm};

    #[test]
    fn single_point_box_is_zero() {
        let p = EquationParams::default();
        let rep = verify_weighted(&p, &[1], 1.0, 1.0, &EstimateSettings::default()).unwrap();
        assert_eq!(rep.rows[0].lower, 0.0);
        assert_eq!(rep.rows[0].upper, 0.0);
    }

    #[test]
    fn rho_out_of_range_is_rejected() {
        let p = EquationParams {
            rho: 0.4,
            ..EquationParams::default()
        };
        assert!(verify_weighted(&p, &[4], 1.0, 1.0, &EstimateSettings::default()).is_err());
    }

    #[test]
    fn form_matches_pointwise_weight() {
        let p = EquationParams::default();
        let bx = WeightBox { points: 4, dtau: 0.5, dxi: 0.5 };
        let form = bilinear_form(&p, &bx).unwrap();
        // g₁, g₂ point masses at nodes p₁, p₂; contraction into slot 3 at -η₁-η₂
        let n = 4usize;
        let node = |k: usize| (((k / n) as f64 - 2.0) * 0.5, ((k % n) as f64 - 2.0) * 0.5);
        let (p1, p2) = (1 * n + 3, 2 * n + 3);
        let mut g = [vec![num_complex::Complex64::new(0.0, 0.0); n * n], vec![], vec![]];
        g[1] = g[0].clone();
        g[2] = g[0].clone();
        g[0][p1] = 1.0.into();
        g[1][p2] = 1.0.into();
        let v = form.contract(2, &g);
        let (e1, e2) = (node(p1), node(p2));
        let e3 = (-e1.0 - e2.0, -e1.1 - e2.1);
        let k3 = ((e3.0 / 0.5 + 2.0) as usize) * n + (e3.1 / 0.5 + 2.0) as usize;
        let w = bilinear_weight([e1, e2, e3], p.rho, p.delta, p.alpha).unwrap();
        assert!((v[k3].re - w * 0.5).abs() < 1e-14);
    }
}

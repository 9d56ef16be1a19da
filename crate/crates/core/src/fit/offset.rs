//! Scan of a constant offset added to every intrinsic 1/Q before the
//! B-versus-T/Q regression.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fit::line::{orthogonal_linear_fit, LineFit, XyPoint};
use crate::num::{bisect, brent_minimize};

/// One temperature point of the noise regression, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    #[serde(rename = "temperature_k")]
    pub temperature: f64,
    pub inv_q: f64,
    pub sigma_inv_q: f64,
    pub b: f64,
    pub sigma_b: f64,
}

/// Regression points with abscissa `T (1/Q + offset)`. The abscissa error
/// combines the 1/Q error and a relative temperature error `dt_rel`.
pub fn regression_points(points: &[NoisePoint], dt_rel: f64, inv_q0: f64) -> Vec<XyPoint> {
    points
        .iter()
        .map(|p| {
            let iq = p.inv_q + inv_q0;
            let x = p.temperature * iq;
            let sx = p.temperature * (p.sigma_inv_q.powi(2) + (dt_rel * iq).powi(2)).sqrt();
            XyPoint { x, y: p.b, sigma_x: sx, sigma_y: p.sigma_b }
        })
        .collect()
}

pub fn fit_with_offset(points: &[NoisePoint], dt_rel: f64, inv_q0: f64) -> Result<LineFit> {
    orthogonal_linear_fit(&regression_points(points, dt_rel, inv_q0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetEntry {
    pub inv_q0: f64,
    pub intercept: Option<f64>,
    pub chi2: Option<f64>,
    pub fit: Option<LineFit>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestOffset {
    pub inv_q0: f64,
    pub chi2: f64,
    /// Offsets where χ² rises by `ci_delta_chi2` above its minimum.
    pub ci: (f64, f64),
    pub ci_delta_chi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetScan {
    pub dt_rel: f64,
    pub entries: Vec<OffsetEntry>,
    pub best: Option<BestOffset>,
    /// Offset at which the fitted intercept vanishes.
    pub null_intercept_offset: Option<f64>,
    /// Mean 1/Q error bar of the input points.
    pub mean_sigma_inv_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetScanOptions {
    pub dt_rel: f64,
    pub ci_delta_chi2: f64,
}

impl Default for OffsetScanOptions {
    fn default() -> Self {
        Self { dt_rel: 0.005, ci_delta_chi2: 4.0 }
    }
}

fn chi2_at(points: &[NoisePoint], dt_rel: f64, q0: f64) -> f64 {
    fit_with_offset(points, dt_rel, q0).map(|f| f.chi2).unwrap_or(f64::INFINITY)
}

pub fn offset_scan(points: &[NoisePoint], grid: &[f64], opts: &OffsetScanOptions) -> Result<OffsetScan> {
    if grid.is_empty() {
        return invalid("offset grid is empty");
    }
    if points.iter().any(|p| !(p.temperature > 0.0)) {
        return invalid("noise points need positive temperatures");
    }
    let dt = opts.dt_rel;
    let entries: Vec<OffsetEntry> = grid
        .iter()
        .map(|&q0| match fit_with_offset(points, dt, q0) {
            Ok(f) => OffsetEntry { inv_q0: q0, intercept: Some(f.intercept), chi2: Some(f.chi2), fit: Some(f), failure: None },
            Err(e) => OffsetEntry { inv_q0: q0, intercept: None, chi2: None, fit: None, failure: Some(e.to_string()) },
        })
        .collect();
    let mean_sigma_inv_q = points.iter().map(|p| p.sigma_inv_q).sum::<f64>() / points.len() as f64;

    let ok: Vec<(usize, f64)> = entries.iter().enumerate().filter_map(|(i, e)| e.chi2.map(|c| (i, c))).collect();
    let best = if let Some(&(ib, _)) = ok.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()) {
        let lo = grid[ib.saturating_sub(1)];
        let hi = grid[(ib + 1).min(grid.len() - 1)];
        let (q, c) = if hi > lo {
            brent_minimize(|q| chi2_at(points, dt, q), lo, hi, 1e-10, 200)
        } else {
            (grid[ib], entries[ib].chi2.unwrap())
        };
        let (q, c) = if c <= entries[ib].chi2.unwrap() { (q, c) } else { (grid[ib], entries[ib].chi2.unwrap()) };
        let target = c + opts.ci_delta_chi2;
        let scale = mean_sigma_inv_q.max(1e-15);
        let edge = |dir: f64| {
            let mut step = scale;
            for _ in 0..80 {
                if chi2_at(points, dt, q + dir * step) > target {
                    return bisect(|x| chi2_at(points, dt, x) - target, q.min(q + dir * step), q.max(q + dir * step), scale * 1e-9);
                }
                step *= 2.0;
            }
            None
        };
        let l = edge(-1.0).unwrap_or(f64::NEG_INFINITY);
        let h = edge(1.0).unwrap_or(f64::INFINITY);
        Some(BestOffset { inv_q0: q, chi2: c, ci: (l, h), ci_delta_chi2: opts.ci_delta_chi2 })
    } else {
        None
    };

    let intercept = |q: f64| fit_with_offset(points, dt, q).map(|f| f.intercept).unwrap_or(f64::NAN);
    let null_intercept_offset = {
        let b0 = intercept(0.0);
        let dir = if b0 > 0.0 { 1.0 } else { -1.0 };
        let mut step = mean_sigma_inv_q.max(1e-15);
        let mut found = None;
        for _ in 0..80 {
            let v = intercept(dir * step);
            if v.is_finite() && v * b0 <= 0.0 {
                let (a, b) = if dir > 0.0 { (0.0, step) } else { (-step, 0.0) };
                found = bisect(intercept, a, b, mean_sigma_inv_q.max(1e-15) * 1e-9);
                break;
            }
            step *= 2.0;
        }
        found
    };
    Ok(OffsetScan { dt_rel: dt, entries, best, null_intercept_offset, mean_sigma_inv_q })
}

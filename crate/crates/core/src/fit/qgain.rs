//! Extrapolation of 1/Q_a measured at several loop gains to infinite gain.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fit::chi2::student_t_factor;
use crate::fit::line::{weighted_least_squares, LineFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub inv_gain: f64,
    pub inv_qa: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QGainFit {
    /// Intercept, the intrinsic 1/Q.
    pub inv_q: f64,
    /// Intercept error after Student-t enlargement.
    pub sigma_inv_q: f64,
    /// Plain least-squares intercept error.
    pub sigma_inv_q_plain: f64,
    pub t_factor: f64,
    /// Magnetic-spring coefficient c.
    pub slope: f64,
    pub sigma_slope: f64,
    pub line: LineFit,
}

/// `1/Q_a = 1/Q + c/|G|`, weighted least squares. The intercept error is
/// widened by the Student-t 1σ factor for `n - 2` degrees of freedom.
pub fn fit_q_vs_gain(points: &[GainPoint]) -> Result<QGainFit> {
    if points.len() < 3 {
        return invalid(format!("Q-vs-gain fit needs at least 3 points, got {}", points.len()));
    }
    if points.iter().any(|p| !(p.sigma > 0.0)) {
        return invalid("Q-vs-gain sigmas must be positive");
    }
    let x: Vec<f64> = points.iter().map(|p| p.inv_gain).collect();
    let y: Vec<f64> = points.iter().map(|p| p.inv_qa).collect();
    let s: Vec<f64> = points.iter().map(|p| p.sigma).collect();
    let line = weighted_least_squares(&x, &y, &s)?;
    let t_factor = student_t_factor(points.len() - 2)?;
    Ok(QGainFit {
        inv_q: line.intercept,
        sigma_inv_q: t_factor * line.sigma_intercept,
        sigma_inv_q_plain: line.sigma_intercept,
        t_factor,
        slope: line.slope,
        sigma_slope: line.sigma_slope,
        line,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_exact() {
        let pts: Vec<GainPoint> = [0.25e-3, 0.5e-3, 0.75e-3, 1e-3]
            .iter()
            .map(|&g| GainPoint { inv_gain: g, inv_qa: 2e-7 + 0.02 * g, sigma: 1e-8 })
            .collect();
        let f = fit_q_vs_gain(&pts).unwrap();
        assert!((f.inv_q - 2e-7).abs() < 1e-18);
        assert!((f.slope - 0.02).abs() < 1e-12);
        assert!(f.line.chi2 < 1e-16);
        assert!((f.sigma_inv_q / f.sigma_inv_q_plain - 1.3213).abs() < 1e-3);
    }

    #[test]
    fn too_few_points() {
        let p = GainPoint { inv_gain: 1e-3, inv_qa: 1e-6, sigma: 1e-8 };
        assert!(fit_q_vs_gain(&[p, p]).is_err());
    }
}

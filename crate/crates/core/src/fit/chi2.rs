//! χ² acceptance gate, homogeneity test and Student-t enlargement.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

/// Probability mass within one and two standard deviations of a normal law.
pub const ONE_SIGMA: f64 = 0.682_689_492_137_085_9;
pub const TWO_SIGMA: f64 = 0.954_499_736_103_641_6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Gate {
    pub chi2: f64,
    pub dof: usize,
    pub reduced: f64,
    /// Central 2σ interval of the χ² law, in χ² units.
    pub lower: f64,
    pub upper: f64,
    pub within_2sigma: bool,
    /// Upper-tail survival probability.
    pub p_value: f64,
}

pub fn chi2_gate(chi2: f64, dof: usize) -> Result<Chi2Gate> {
    if dof == 0 {
        return invalid("χ² gate needs at least one degree of freedom");
    }
    if !(chi2 >= 0.0) {
        return invalid(format!("χ² must be non-negative, got {chi2}"));
    }
    let d = ChiSquared::new(dof as f64).map_err(|e| crate::Error::Invalid(e.to_string()))?;
    let tail = 0.5 * (1.0 - TWO_SIGMA);
    let lower = d.inverse_cdf(tail);
    let upper = d.inverse_cdf(1.0 - tail);
    Ok(Chi2Gate {
        chi2,
        dof,
        reduced: chi2 / dof as f64,
        lower,
        upper,
        within_2sigma: chi2 >= lower && chi2 <= upper,
        p_value: d.sf(chi2),
    })
}

/// Weighted mean of independent measurements and the χ² of their scatter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homogeneity {
    pub mean: f64,
    pub sigma_mean: f64,
    /// Number of values that entered the test.
    pub n: usize,
    pub gate: Chi2Gate,
}

pub fn homogeneity(values: &[f64], sigmas: &[f64]) -> Result<Homogeneity> {
    if values.len() != sigmas.len() || values.len() < 2 {
        return invalid("homogeneity needs at least two values with matching sigmas");
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return invalid("homogeneity sigmas must be positive");
    }
    let w: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mean = values.iter().zip(&w).map(|(v, w)| v * w).sum::<f64>() / sw;
    let chi2 = values.iter().zip(sigmas).map(|(v, s)| ((v - mean) / s).powi(2)).sum();
    Ok(Homogeneity { mean, sigma_mean: sw.sqrt().recip(), n: values.len(), gate: chi2_gate(chi2, values.len() - 1)? })
}

/// Ratio of the Student-t 68.27% half-width at `dof` to the normal one (1σ).
pub fn student_t_factor(dof: usize) -> Result<f64> {
    if dof == 0 {
        return invalid("Student-t factor needs at least one degree of freedom");
    }
    let t = StudentsT::new(0.0, 1.0, dof as f64).map_err(|e| crate::Error::Invalid(e.to_string()))?;
    Ok(t.inverse_cdf(0.5 * (1.0 + ONE_SIGMA)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_equal_dof_is_inside() {
        for dof in [1, 2, 5, 8, 50, 500] {
            let g = chi2_gate(dof as f64, dof).unwrap();
            assert_eq!(g.reduced, 1.0);
            assert!(g.within_2sigma, "dof {dof}");
        }
    }

    #[test]
    fn student_factor_two_dof_closed_form() {
        // t quantile at 2 dof: q = sqrt(2 p^2/(1 - p^2)) for central mass p
        let p = ONE_SIGMA;
        let exact = (2.0 * p * p / (1.0 - p * p)).sqrt();
        assert!((student_t_factor(2).unwrap() - exact).abs() < 1e-8);
        assert!((exact - 1.32).abs() < 0.005);
    }

    #[test]
    fn student_factor_one_dof_closed_form() {
        // Cauchy: tan(pi p / 2)
        let exact = (std::f64::consts::PI * ONE_SIGMA / 2.0).tan();
        assert!((student_t_factor(1).unwrap() - exact).abs() < 1e-7);
    }

    #[test]
    fn homogeneity_of_equal_values() {
        let h = homogeneity(&[2.0, 2.0, 2.0], &[0.1, 0.2, 0.1]).unwrap();
        assert_eq!(h.mean, 2.0);
        assert_eq!(h.gate.chi2, 0.0);
        assert!(!h.gate.within_2sigma);
    }

    #[test]
    fn rejects_zero_dof() {
        assert!(chi2_gate(1.0, 0).is_err());
        assert!(student_t_factor(0).is_err());
    }
}

//! From the B-versus-T/Q line to physical quantities: coupling, residual
//! force noise, and the estimators used to rule out mundane sources.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fit::LineFit;
use crate::physics::{convert_units, ResonatorParams, SquidReadout, Unit, K_B, PHI0};

use std::f64::consts::PI;

/// Slope in Φ0²/(nK·Hz) to Wb²/(K·Hz).
pub fn slope_from_reporting_units(b1: f64) -> f64 {
    b1 * PHI0 * PHI0 * 1e9
}

/// Intercept in Φ0²/Hz to Wb²/Hz.
pub fn intercept_from_reporting_units(b0: f64) -> f64 {
    b0 * PHI0 * PHI0
}

/// `Phi_x^2/k = B1 w0 / (4 k_B)`, henry, for a slope in Wb²/(K·Hz).
pub fn coupling_from_slope(b1: f64, f0: f64) -> Result<f64> {
    if !(b1 >= 0.0 && f0 > 0.0) {
        return invalid("slope must be non-negative and f0 positive");
    }
    Ok(b1 * 2.0 * PI * f0 / (4.0 * K_B))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceNoise {
    #[serde(rename = "s_f0_n2_per_hz")]
    pub s_f0: f64,
    pub sigma_stat: f64,
    pub sigma_sys: f64,
    /// Set when the intercept is negative, i.e. the excess is consistent with zero.
    pub negative_intercept: bool,
}

/// `S_F0 = (4 k_B k / w0) B0/B1` with first-order error propagation through
/// the (B0, B1) covariance; the systematic part is `S_F0 * dk_rel`.
pub fn residual_force_noise(
    b0: f64,
    b1: f64,
    cov: [[f64; 2]; 2],
    k: f64,
    f0: f64,
    dk_rel: f64,
) -> Result<ForceNoise> {
    if !(b1 > 0.0 && k > 0.0 && f0 > 0.0) {
        return invalid("B1, k and f0 must be positive");
    }
    let pref = 4.0 * K_B * k / (2.0 * PI * f0);
    let s = pref * b0 / b1;
    // gradient of b0/b1
    let g0 = 1.0 / b1;
    let g1 = -b0 / (b1 * b1);
    let var = g0 * g0 * cov[0][0] + 2.0 * g0 * g1 * cov[0][1] + g1 * g1 * cov[1][1];
    Ok(ForceNoise {
        s_f0: s,
        sigma_stat: pref * var.max(0.0).sqrt(),
        sigma_sys: (s * dk_rel).abs(),
        negative_intercept: b0 < 0.0,
    })
}

/// Clarke–Tesche current noise referred to force: `gamma k_B T_SQ / R_SQ * (coupling * k)`.
pub fn backaction_psd(gamma: f64, t_sq: f64, r_sq: f64, coupling: f64, k: f64) -> Result<f64> {
    if !(gamma >= 0.0 && t_sq >= 0.0 && r_sq > 0.0 && coupling >= 0.0 && k > 0.0) {
        return invalid("backaction inputs out of range");
    }
    Ok(gamma * K_B * t_sq / r_sq * coupling * k)
}

/// Field noise, T/√Hz, whose torque on moment `mu` at arm `l` equals `sqrt(s_f0)`.
pub fn magnetic_field_noise_equiv(s_f0: f64, mu: f64, l: f64) -> Result<f64> {
    if !(s_f0 >= 0.0 && mu > 0.0 && l > 0.0) {
        return invalid("need s_f0 >= 0, mu > 0, l > 0");
    }
    Ok(s_f0.sqrt() * l / mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    #[serde(rename = "coupling_h")]
    pub coupling: f64,
    #[serde(rename = "sigma_coupling_h")]
    pub sigma_coupling: f64,
    pub force: ForceNoise,
    #[serde(rename = "backaction_n2_per_hz")]
    pub backaction: f64,
    #[serde(rename = "magnetic_equiv_field_t_per_rthz")]
    pub magnetic_equiv_field: Option<f64>,
}

/// Budget from a line fit in SI units (B in Wb²/Hz against T/Q in K).
pub fn noise_budget(line: &LineFit, res: &ResonatorParams, squid: &SquidReadout, mu: Option<f64>) -> Result<NoiseBudget> {
    let coupling = coupling_from_slope(line.slope.max(0.0), res.f0)?;
    let sigma_coupling = coupling_from_slope(line.sigma_slope, res.f0)?;
    let force = residual_force_noise(line.intercept, line.slope, line.cov, res.k, res.f0, res.dk_rel)?;
    let backaction = backaction_psd(squid.gamma, squid.t_sq, squid.r_sq, coupling, res.k)?;
    let magnetic_equiv_field = match (mu, res.effective_length) {
        (Some(mu), Some(l)) => Some(magnetic_field_noise_equiv(force.s_f0.max(0.0), mu, l)?),
        _ => None,
    };
    Ok(NoiseBudget { coupling, sigma_coupling, force, backaction, magnetic_equiv_field })
}

/// Table row in reporting units (fH, aN²/Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub label: String,
    pub coupling_fh: f64,
    pub sigma_coupling_fh: f64,
    pub s_f0_an2_per_hz: f64,
    pub sigma_stat_an2_per_hz: f64,
    pub sigma_sys_an2_per_hz: f64,
    pub backaction_an2_per_hz: f64,
}

impl BudgetRow {
    pub fn from_budget(label: &str, b: &NoiseBudget) -> Result<Self> {
        let fh = |v| convert_units(v, Unit::Henry, Unit::FemtoHenry);
        let an = |v| convert_units(v, Unit::Newton2PerHz, Unit::AttoNewton2PerHz);
        Ok(Self {
            label: label.to_string(),
            coupling_fh: fh(b.coupling)?,
            sigma_coupling_fh: fh(b.sigma_coupling)?,
            s_f0_an2_per_hz: an(b.force.s_f0)?,
            sigma_stat_an2_per_hz: an(b.force.sigma_stat)?,
            sigma_sys_an2_per_hz: an(b.force.sigma_sys)?,
            backaction_an2_per_hz: an(b.backaction)?,
        })
    }

    pub const CSV_HEADER: &'static str =
        "label,coupling_fh,sigma_coupling_fh,s_f0_an2_per_hz,sigma_stat_an2_per_hz,sigma_sys_an2_per_hz,backaction_an2_per_hz";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.label,
            self.coupling_fh,
            self.sigma_coupling_fh,
            self.s_f0_an2_per_hz,
            self.sigma_stat_an2_per_hz,
            self.sigma_sys_an2_per_hz,
            self.backaction_an2_per_hz
        )
    }
}

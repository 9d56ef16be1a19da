//! JSON run configuration. Every dimensional key carries its unit as a
//! suffix; values are converted to SI on the way in.

use serde::{Deserialize, Serialize};

use crate::csl::{CslOptions, MassModel};
use crate::dynamics::CampaignPlan;
use crate::error::{invalid, Result};
use crate::physics::{convert_units, QPoint, ResonatorParams, SquidReadout, Unit};
use crate::pipeline::AnalysisOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorConfig {
    pub f0_hz: f64,
    pub k_n_per_m: f64,
    pub dk_rel: f64,
    pub q_table: Vec<QPoint>,
    pub mass_model: MassModel,
    #[serde(default)]
    pub effective_length_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquidConfig {
    pub a_phi0sq_per_hz: f64,
    pub c_phi0sq_per_hz: f64,
    pub f1_hz: f64,
    pub coupling_fh: f64,
    pub spring_coeff: f64,
    pub gain_magnitudes: Vec<f64>,
    pub gamma: f64,
    pub t_sq_k: f64,
    pub r_sq_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CslConfig {
    pub rc_min_m: f64,
    pub rc_max_m: f64,
    pub rc_points: usize,
    pub axis: [f64; 3],
    pub options: CslOptions,
}

impl Default for CslConfig {
    fn default() -> Self {
        Self { rc_min_m: 1e-8, rc_max_m: 1e-4, rc_points: 60, axis: [1.0, 0.0, 0.0], options: CslOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub resonator: ResonatorConfig,
    pub squid: SquidConfig,
    pub campaign: CampaignPlan,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub csl: CslConfig,
    /// Magnetic moment of the sphere for the field-noise estimator, J/T.
    #[serde(default)]
    pub magnetic_moment_j_per_t: Option<f64>,
}

/// Intrinsic Q used for the synthetic reference campaign, `1/Q = T/2.2e5 + 1e-8`.
pub fn reference_q(t: f64) -> f64 {
    1.0 / (t / 2.2e5 + 1e-8)
}

impl Config {
    /// Reference operating point; noise and coupling values follow the
    /// first data set, the Q(T) law and c are synthetic.
    pub fn reference() -> Self {
        let campaign = CampaignPlan::reference(20_241_014);
        let q_table = campaign
            .temperatures
            .iter()
            .map(|&t| QPoint { temperature: t, q: reference_q(t), sigma_q: 0.0 })
            .collect();
        Self {
            resonator: ResonatorConfig {
                f0_hz: 8174.01,
                k_n_per_m: 0.40,
                dk_rel: 0.05,
                q_table,
                mass_model: MassModel::loaded_cantilever(crate::csl::CANTILEVER_MODE_WEIGHT),
                effective_length_m: Some(3.66e-4),
            },
            squid: SquidConfig {
                a_phi0sq_per_hz: 1.23e-13,
                c_phi0sq_per_hz: 3.78e-13,
                f1_hz: 8175.11,
                coupling_fh: 115.7,
                spring_coeff: 0.02,
                gain_magnitudes: campaign.gain_magnitudes.clone(),
                gamma: 11.0,
                t_sq_k: 0.4,
                r_sq_ohm: 8.0,
            },
            campaign,
            analysis: AnalysisOptions::default(),
            csl: CslConfig::default(),
            magnetic_moment_j_per_t: Some(5e-9),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(text)?;
        c.to_domain()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// SI domain objects, validated.
    pub fn to_domain(&self) -> Result<(ResonatorParams, SquidReadout)> {
        let r = &self.resonator;
        let res = ResonatorParams::new(
            r.f0_hz,
            r.k_n_per_m,
            r.dk_rel,
            r.q_table.clone(),
            r.mass_model.clone(),
            r.effective_length_m,
        )?;
        let s = &self.squid;
        let squid = SquidReadout {
            a: convert_units(s.a_phi0sq_per_hz, Unit::Phi0SqPerHz, Unit::Wb2PerHz)?,
            c: convert_units(s.c_phi0sq_per_hz, Unit::Phi0SqPerHz, Unit::Wb2PerHz)?,
            f1: s.f1_hz,
            coupling: convert_units(s.coupling_fh, Unit::FemtoHenry, Unit::Henry)?,
            spring_coeff: s.spring_coeff,
            gain_magnitudes: s.gain_magnitudes.clone(),
            gamma: s.gamma,
            t_sq: s.t_sq_k,
            r_sq: s.r_sq_ohm,
        };
        squid.validate()?;
        self.campaign.validate(&res, &squid)?;
        if let Some(mu) = self.magnetic_moment_j_per_t {
            if !(mu > 0.0) {
                return invalid("magnetic moment must be positive");
            }
        }
        if !(self.csl.rc_points >= 1 && self.csl.rc_min_m > 0.0 && self.csl.rc_max_m >= self.csl.rc_min_m) {
            return invalid("CSL r_C grid is malformed");
        }
        Ok((res, squid))
    }

    pub fn rc_grid(&self) -> Vec<f64> {
        crate::csl::log_grid(self.csl.rc_min_m, self.csl.rc_max_m, self.csl.rc_points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_round_trips() {
        let c = Config::reference();
        let text = c.to_json().unwrap();
        let back = Config::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&Config::reference().to_json().unwrap()).unwrap();
        v["squid"]["coupling"] = serde_json::json!(1.0);
        assert!(Config::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn reference_q_values() {
        assert!((reference_q(0.043) / 4.88e6 - 1.0).abs() < 0.01);
        assert!((reference_q(0.351) / 6.2e5 - 1.0).abs() < 0.02);
    }
}

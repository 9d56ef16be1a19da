//! Physical constants, unit conversions and the resonator/readout parameter sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::csl::MassModel;
use crate::error::{invalid, Error, Result};

/// Reduced Planck constant, J·s (exact since the 2019 SI redefinition).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;
/// CSL reference mass, taken as the proton mass (CODATA 2018), kg.
pub const M0: f64 = 1.672_621_923_69e-27;
/// Magnetic flux quantum h/2e, Wb (exact).
pub const PHI0: f64 = 2.067_833_848e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysConstants {
    pub hbar: f64,
    pub k_b: f64,
    pub m0: f64,
    pub phi0: f64,
}

pub const CONSTANTS: PhysConstants = PhysConstants { hbar: HBAR, k_b: K_B, m0: M0, phi0: PHI0 };

/// Unit tags accepted at I/O boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "phi0^2/Hz")]
    Phi0SqPerHz,
    #[serde(rename = "Wb^2/Hz")]
    Wb2PerHz,
    #[serde(rename = "aN^2/Hz")]
    AttoNewton2PerHz,
    #[serde(rename = "N^2/Hz")]
    Newton2PerHz,
    #[serde(rename = "m^2/Hz")]
    Metre2PerHz,
    #[serde(rename = "fH")]
    FemtoHenry,
    #[serde(rename = "H")]
    Henry,
    #[serde(rename = "nK")]
    NanoKelvin,
    #[serde(rename = "K")]
    Kelvin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    FluxPsd,
    ForcePsd,
    DisplacementPsd,
    Inductance,
    Temperature,
}

impl Unit {
    pub const ALL: [Unit; 9] = [
        Unit::Phi0SqPerHz,
        Unit::Wb2PerHz,
        Unit::AttoNewton2PerHz,
        Unit::Newton2PerHz,
        Unit::Metre2PerHz,
        Unit::FemtoHenry,
        Unit::Henry,
        Unit::NanoKelvin,
        Unit::Kelvin,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Unit::Phi0SqPerHz => "phi0^2/Hz",
            Unit::Wb2PerHz => "Wb^2/Hz",
            Unit::AttoNewton2PerHz => "aN^2/Hz",
            Unit::Newton2PerHz => "N^2/Hz",
            Unit::Metre2PerHz => "m^2/Hz",
            Unit::FemtoHenry => "fH",
            Unit::Henry => "H",
            Unit::NanoKelvin => "nK",
            Unit::Kelvin => "K",
        }
    }

    fn dimension(self) -> Dimension {
        match self {
            Unit::Phi0SqPerHz | Unit::Wb2PerHz => Dimension::FluxPsd,
            Unit::AttoNewton2PerHz | Unit::Newton2PerHz => Dimension::ForcePsd,
            Unit::Metre2PerHz => Dimension::DisplacementPsd,
            Unit::FemtoHenry | Unit::Henry => Dimension::Inductance,
            Unit::NanoKelvin | Unit::Kelvin => Dimension::Temperature,
        }
    }

    /// Multiplier taking a value in this unit to the SI unit of its dimension.
    fn to_si(self) -> f64 {
        match self {
            Unit::Phi0SqPerHz => PHI0 * PHI0,
            Unit::AttoNewton2PerHz => 1e-36,
            Unit::FemtoHenry => 1e-15,
            Unit::NanoKelvin => 1e-9,
            Unit::Wb2PerHz | Unit::Newton2PerHz | Unit::Metre2PerHz | Unit::Henry | Unit::Kelvin => 1.0,
        }
    }

    /// The SI unit of the same dimension.
    pub fn si(self) -> Unit {
        match self.dimension() {
            Dimension::FluxPsd => Unit::Wb2PerHz,
            Dimension::ForcePsd => Unit::Newton2PerHz,
            Dimension::DisplacementPsd => Unit::Metre2PerHz,
            Dimension::Inductance => Unit::Henry,
            Dimension::Temperature => Unit::Kelvin,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Unit::ALL
            .iter()
            .copied()
            .find(|u| u.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown unit tag '{s}'")))
    }
}

/// Converts `value` between two units of the same dimension.
pub fn convert_units(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::UnsupportedUnits { from: from.tag().into(), to: to.tag().into() });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * (from.to_si() / to.to_si()))
}

/// Intrinsic quality factor measured at one bath temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    #[serde(rename = "temperature_k")]
    pub temperature: f64,
    pub q: f64,
    pub sigma_q: f64,
}

/// Fundamental flexural mode of the cantilever.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonatorParams {
    /// Resonant frequency, Hz.
    pub f0: f64,
    /// Spring constant, N/m.
    pub k: f64,
    /// Relative 1σ uncertainty on `k`.
    pub dk_rel: f64,
    /// Intrinsic Q(T), temperatures strictly increasing.
    pub q_table: Vec<QPoint>,
    pub mass_model: MassModel,
    /// Torque-to-force arm, m. There is no default.
    pub effective_length: Option<f64>,
}

impl ResonatorParams {
    pub fn new(
        f0: f64,
        k: f64,
        dk_rel: f64,
        q_table: Vec<QPoint>,
        mass_model: MassModel,
        effective_length: Option<f64>,
    ) -> Result<Self> {
        let res = Self { f0, k, dk_rel, q_table, mass_model, effective_length };
        res.validate()?;
        Ok(res)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return invalid(format!("f0 must be positive, got {}", self.f0));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return invalid(format!("k must be positive, got {}", self.k));
        }
        if !(self.dk_rel >= 0.0) {
            return invalid("dk_rel must be non-negative");
        }
        for (i, p) in self.q_table.iter().enumerate() {
            if !(p.q > 0.0) || !(p.temperature > 0.0) || !(p.sigma_q >= 0.0) {
                return invalid(format!("q_table entry {i} must have T > 0, Q > 0, sigma_Q >= 0"));
            }
            if i > 0 && p.temperature <= self.q_table[i - 1].temperature {
                return invalid("q_table temperatures must be strictly increasing");
            }
        }
        if let Some(l) = self.effective_length {
            if !(l > 0.0) {
                return invalid("effective length must be positive");
            }
        }
        self.mass_model.validate()
    }

    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f0
    }

    /// Modal mass `k / omega0^2`, kg.
    pub fn modal_mass(&self) -> f64 {
        self.k / (self.omega0() * self.omega0())
    }

    /// Intrinsic Q at temperature `t`: exact table match, otherwise log-log
    /// interpolation between neighbours. Extrapolation is refused.
    pub fn q_at(&self, t: f64) -> Result<f64> {
        let table = &self.q_table;
        if table.is_empty() {
            return invalid("q_table is empty");
        }
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        if let Some(p) = table.iter().find(|p| rel(p.temperature, t)) {
            return Ok(p.q);
        }
        let idx = table.iter().position(|p| p.temperature > t);
        match idx {
            Some(i) if i > 0 => {
                let (lo, hi) = (table[i - 1], table[i]);
                let s = (t.ln() - lo.temperature.ln()) / (hi.temperature.ln() - lo.temperature.ln());
                Ok((lo.q.ln() + s * (hi.q.ln() - lo.q.ln())).exp())
            }
            _ => invalid(format!("temperature {t} K outside q_table range")),
        }
    }
}

/// SQUID readout parameters, all SI.
#[derive(Debug, Clone, PartialEq)]
pub struct SquidReadout {
    /// Additive wideband flux noise, Wb²/Hz.
    pub a: f64,
    /// Feedback-backaction term amplitude, Wb²/Hz.
    pub c: f64,
    /// Antiresonance frequency, Hz.
    pub f1: f64,
    /// Coupling Φ_x²/k, H.
    pub coupling: f64,
    /// Magnetic-spring coefficient in 1/Q_a = 1/Q + c/|G|.
    pub spring_coeff: f64,
    pub gain_magnitudes: Vec<f64>,
    /// Clarke–Tesche current-noise factor.
    pub gamma: f64,
    /// SQUID electron temperature, K.
    pub t_sq: f64,
    /// Shunt resistance, Ω.
    pub r_sq: f64,
}

impl SquidReadout {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.c >= 0.0) {
            return invalid("A and C must be non-negative");
        }
        if !(self.f1 > 0.0) {
            return invalid("f1 must be positive");
        }
        if !(self.coupling > 0.0) {
            return invalid("coupling must be positive");
        }
        if let Some(g) = self.gain_magnitudes.iter().find(|g| !(**g > 1.0)) {
            return invalid(format!("loop gain magnitudes must satisfy |G| >> 1, got {g}"));
        }
        if !(self.gamma >= 0.0 && self.t_sq >= 0.0 && self.r_sq > 0.0) {
            return invalid("backaction parameters must be non-negative with R_SQ > 0");
        }
        Ok(())
    }

    /// Displacement-to-flux coupling Φ_x in Wb/m for spring constant `k`.
    pub fn phi_x(&self, k: f64) -> f64 {
        (self.coupling * k).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atto_newton_to_si() {
        let v = convert_units(1.0, Unit::AttoNewton2PerHz, Unit::Newton2PerHz).unwrap();
        assert_eq!(v, 1e-36);
    }

    #[test]
    fn flux_quantum_squared() {
        let v = convert_units(1.0, Unit::Phi0SqPerHz, Unit::Wb2PerHz).unwrap();
        assert_eq!(v, 2.067833848e-15 * 2.067833848e-15);
    }

    #[test]
    fn femto_henry() {
        let v = convert_units(116.0, Unit::FemtoHenry, Unit::Henry).unwrap();
        assert!((v - 1.16e-13).abs() <= 1e-27);
    }

    #[test]
    fn nano_kelvin() {
        assert_eq!(convert_units(5e8, Unit::NanoKelvin, Unit::Kelvin).unwrap(), 0.5);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let err = convert_units(1.0, Unit::FemtoHenry, Unit::Kelvin).unwrap_err();
        assert!(matches!(err, Error::UnsupportedUnits { .. }));
        assert!(err.to_string().contains("fH -> K"));
    }

    #[test]
    fn unit_tags_parse() {
        for u in Unit::ALL {
            assert_eq!(u.tag().parse::<Unit>().unwrap(), u);
        }
        assert!("furlong".parse::<Unit>().is_err());
    }

    #[test]
    fn constants_positive() {
        let c = CONSTANTS;
        assert!(c.hbar > 0.0 && c.k_b > 0.0 && c.m0 > 0.0 && c.phi0 > 0.0);
    }

    fn table() -> Vec<QPoint> {
        vec![
            QPoint { temperature: 0.05, q: 4e6, sigma_q: 1e5 },
            QPoint { temperature: 0.1, q: 2e6, sigma_q: 1e5 },
        ]
    }

    #[test]
    fn q_interpolates_log_log() {
        let res = ResonatorParams::new(8174.01, 0.4, 0.05, table(), MassModel::default_sphere(), None).unwrap();
        assert_eq!(res.q_at(0.05).unwrap(), 4e6);
        let mid = res.q_at((0.05f64 * 0.1).sqrt()).unwrap();
        assert!((mid - (4e6f64 * 2e6).sqrt()).abs() < 1e-3);
        assert!(res.q_at(0.2).is_err());
    }

    #[test]
    fn resonator_rejects_unsorted_table() {
        let mut t = table();
        t.swap(0, 1);
        assert!(ResonatorParams::new(8174.01, 0.4, 0.05, t, MassModel::default_sphere(), None).is_err());
        assert!(ResonatorParams::new(-1.0, 0.4, 0.05, table(), MassModel::default_sphere(), None).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_is_identity(x in -1e30f64..1e30, i in 0usize..9, j in 0usize..9) {
                let (u, v) = (Unit::ALL[i], Unit::ALL[j]);
                if let Ok(y) = convert_units(x, u, v) {
                    let back = convert_units(y, v, u).unwrap();
                    prop_assert!((back - x).abs() <= 1e-12 * x.abs());
                }
            }
        }
    }
}

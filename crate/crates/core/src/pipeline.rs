//! In-memory analysis chain from a simulated campaign to the noise budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{noise_budget, NoiseBudget};
use crate::dynamics::campaign::{Campaign, TemperaturePoint};
use crate::error::{Error, Result};
use crate::fit::{
    chi2_gate, estimate_qa_ringdown, fit_lorentzian, fit_q_vs_gain, homogeneity, offset_scan, orthogonal_linear_fit,
    Chi2Gate, FixedParams, GainPoint, Homogeneity, LineFit, LorentzFit, LorentzOptions, NoisePoint, OffsetScan,
    OffsetScanOptions, QGainFit, RingdownEstimate,
};
use crate::fit::offset::regression_points;
use crate::physics::{convert_units, ResonatorParams, SquidReadout, Unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub lorentz: LorentzOptions,
    pub offset: OffsetScanOptions,
    /// Offsets scanned, in units of the mean 1/Q error bar.
    pub offset_grid_sigmas: Vec<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            lorentz: LorentzOptions::default(),
            offset: OffsetScanOptions::default(),
            offset_grid_sigmas: (-20..=20).map(|i| i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingdownRow {
    pub gain: f64,
    pub inv_gain: f64,
    pub estimate: RingdownEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    #[serde(rename = "temperature_k")]
    pub temperature: f64,
    pub ringdowns: Vec<RingdownRow>,
    pub qgain: QGainFit,
    /// Apparent Q at the noise-measurement gain implied by the Q-vs-gain line.
    pub qa_noise: f64,
    pub lorentz: LorentzFit,
}

/// Per-temperature inputs to the noise regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionInput {
    #[serde(rename = "temperature_k")]
    pub temperature: f64,
    pub qgain: QGainFit,
    pub lorentz: LorentzFit,
}

/// B against T/Q with its quality checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub noise_points: Vec<NoisePoint>,
    pub line: LineFit,
    pub line_gate: Chi2Gate,
    pub a_homogeneity: Homogeneity,
    pub c_homogeneity: Homogeneity,
    pub spring_homogeneity: Homogeneity,
    pub offset: OffsetScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub points: Vec<PointAnalysis>,
    pub regression: Regression,
    pub budget: NoiseBudget,
}

/// Ringdown sweep at one temperature to the 1/Q intercept.
pub fn analyze_ringdowns(point: &TemperaturePoint, f0: f64) -> Result<(Vec<RingdownRow>, QGainFit)> {
    let rows = point
        .ringdowns
        .iter()
        .map(|r| {
            estimate_qa_ringdown(&r.waveform, r.fs, f0).map(|e| RingdownRow { gain: r.gain, inv_gain: 1.0 / r.gain, estimate: e })
        })
        .collect::<Result<Vec<_>>>()?;
    let q = fit_q_vs_gain(&gain_points(&rows))?;
    Ok((rows, q))
}

pub fn gain_points(rows: &[RingdownRow]) -> Vec<GainPoint> {
    rows.iter()
        .map(|r| GainPoint { inv_gain: r.inv_gain, inv_qa: r.estimate.inv_qa, sigma: r.estimate.sigma_inv_qa })
        .collect()
}

/// Lorentzian fit at one temperature with Q_a taken from the Q-vs-gain line.
pub fn analyze_spectrum(
    point: &TemperaturePoint,
    q: &QGainFit,
    noise_gain: f64,
    res: &ResonatorParams,
    squid: &SquidReadout,
    opts: &LorentzOptions,
) -> Result<(f64, LorentzFit)> {
    let inv_qa = q.inv_q + q.slope / noise_gain;
    if !(inv_qa > 0.0) {
        return Err(Error::Degenerate(format!("extrapolated 1/Q_a = {inv_qa:e} at the noise gain")));
    }
    let fixed = FixedParams { f0: res.f0, f1: squid.f1, qa: 1.0 / inv_qa };
    let fit = fit_lorentzian(&point.spectrum, &fixed, opts)?;
    Ok((1.0 / inv_qa, fit))
}

/// B of a fit in Wb²/Hz regardless of the spectrum's unit.
pub fn b_si(fit: &LorentzFit) -> Result<(f64, f64)> {
    let f = convert_units(1.0, fit.unit, fit.unit.si())?;
    Ok((fit.b * f, fit.sigma_b * f))
}

/// Orthogonal B-vs-T/Q fit, homogeneity tests and offset scan.
pub fn regress(inputs: &[RegressionInput], opts: &AnalysisOptions) -> Result<Regression> {
    let noise_points = inputs
        .iter()
        .map(|p| {
            let (b, sb) = b_si(&p.lorentz)?;
            Ok(NoisePoint { temperature: p.temperature, inv_q: p.qgain.inv_q, sigma_inv_q: p.qgain.sigma_inv_q, b, sigma_b: sb })
        })
        .collect::<Result<Vec<_>>>()?;
    let line = orthogonal_linear_fit(&regression_points(&noise_points, opts.offset.dt_rel, 0.0))?;
    let line_gate = chi2_gate(line.chi2, line.dof)?;
    // A and C are strongly anti-correlated, so a clamp on either one leaves
    // the other with a conditional error bar. Such points sit out the test.
    let (mut a, mut sa, mut c, mut sc) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for l in inputs.iter().map(|p| &p.lorentz).filter(|l| l.clamped.is_empty()) {
        let si = |v: f64| convert_units(v, l.unit, Unit::Wb2PerHz);
        a.push(si(l.a)?);
        sa.push(si(l.sigma_a)?);
        c.push(si(l.c)?);
        sc.push(si(l.sigma_c)?);
    }
    let a_homogeneity = homogeneity(&a, &sa)?;
    let c_homogeneity = homogeneity(&c, &sc)?;
    let slopes: Vec<f64> = inputs.iter().map(|p| p.qgain.slope).collect();
    let sslopes: Vec<f64> = inputs.iter().map(|p| p.qgain.sigma_slope).collect();
    let spring_homogeneity = homogeneity(&slopes, &sslopes)?;
    let mean_sigma = noise_points.iter().map(|p| p.sigma_inv_q).sum::<f64>() / noise_points.len() as f64;
    let grid: Vec<f64> = opts.offset_grid_sigmas.iter().map(|s| s * mean_sigma).collect();
    let offset = offset_scan(&noise_points, &grid, &opts.offset)?;
    Ok(Regression { noise_points, line, line_gate, a_homogeneity, c_homogeneity, spring_homogeneity, offset })
}

pub fn summarize(
    points: Vec<PointAnalysis>,
    res: &ResonatorParams,
    squid: &SquidReadout,
    mu: Option<f64>,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let inputs: Vec<RegressionInput> = points
        .iter()
        .map(|p| RegressionInput { temperature: p.temperature, qgain: p.qgain, lorentz: p.lorentz.clone() })
        .collect();
    let regression = regress(&inputs, opts)?;
    let budget = noise_budget(&regression.line, res, squid, mu)?;
    Ok(Analysis { points, regression, budget })
}

/// Full chain over a campaign. Temperature points are processed in
/// parallel; results are ordered by temperature.
pub fn analyze_campaign(
    campaign: &Campaign,
    res: &ResonatorParams,
    squid: &SquidReadout,
    mu: Option<f64>,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let noise_gain = campaign.plan.noise_gain;
    let points = campaign
        .points
        .par_iter()
        .map(|pt| {
            let (ringdowns, qgain) = analyze_ringdowns(pt, res.f0)?;
            let (qa_noise, lorentz) = analyze_spectrum(pt, &qgain, noise_gain, res, squid, &opts.lorentz)?;
            Ok(PointAnalysis { temperature: pt.temperature_measured, ringdowns, qgain, qa_noise, lorentz })
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(points, res, squid, mu, opts)
}

//! Command bodies. Each returns its report objects plus the artifact files,
//! so `pipeline` can chain them in memory with byte-identical results.

use std::fmt::Write as _;

use cantilever_core::budget::{noise_budget, BudgetRow, NoiseBudget};
use cantilever_core::config::Config;
use cantilever_core::csl::{exclusion_curve, ExclusionCurve};
use cantilever_core::dynamics::simulate_campaign;
use cantilever_core::fit::lorentz::fit_bins;
use cantilever_core::fit::offset::regression_points;
use cantilever_core::fit::{
    estimate_qa_ringdown, fit_lorentzian, fit_q_vs_gain, FixedParams, GainPoint, LorentzFit, LorentzOptions,
    QGainFit,
};
use cantilever_core::io::{
    fmt_f64, sha256_hex, to_json, write_curve_csv, write_gain_csv, write_spectrum_csv, write_waveform_csv, CurveTable,
};
use cantilever_core::physics::{convert_units, Unit, PHI0};
use cantilever_core::pipeline::{regress, AnalysisOptions, Regression, RegressionInput};
use cantilever_core::spectrum::Spectrum;
use cantilever_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::Artifacts;

/// Units of the spectra written to disk.
pub const REPORT_UNIT: Unit = Unit::Phi0SqPerHz;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QReport {
    pub temperature_k: Option<f64>,
    pub input_sha256: String,
    pub points: Vec<GainPoint>,
    pub fit: QGainFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub temperature_k: Option<f64>,
    pub input_sha256: String,
    pub fit: LorentzFit,
    /// Bins inside the band left out of the fit, by frequency.
    pub excluded_f_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub fit_sha256: Vec<String>,
    pub q_sha256: Vec<String>,
    pub inputs: Vec<RegressionInput>,
    pub regression: Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetAppendix {
    pub intercept_phi0sq_per_hz: f64,
    pub sigma_intercept_phi0sq_per_hz: f64,
    pub slope_phi0sq_per_nk_hz: f64,
    pub sigma_slope_phi0sq_per_nk_hz: f64,
    pub line_chi2: f64,
    pub line_dof: usize,
    pub estimators: NoiseBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub regression_sha256: String,
    pub rows: Vec<BudgetRow>,
    pub appendix: BudgetAppendix,
}

/// One simulated temperature point as it appears on disk.
pub struct SimulatedPoint {
    pub label: String,
    pub temperature_k: f64,
    pub spectrum: Spectrum,
    pub spectrum_csv: String,
    pub gains: Vec<GainPoint>,
    pub gains_csv: String,
}

fn label(i: usize) -> String {
    format!("t{i:02}")
}

pub fn simulate(cfg: &Config, seed: u64, waveforms: bool) -> Result<(Vec<SimulatedPoint>, Artifacts)> {
    let (res, squid) = cfg.to_domain()?;
    let mut plan = cfg.campaign.clone();
    plan.seed = seed;
    let campaign = simulate_campaign(&res, &squid, &plan)?;
    let params_hash = sha256_hex(cfg.to_json()?.as_bytes());
    let mut out = Artifacts::default();
    let mut points = Vec::with_capacity(campaign.points.len());
    for (i, pt) in campaign.points.iter().enumerate() {
        let name = label(i);
        let spectrum = pt
            .spectrum
            .converted(REPORT_UNIT)?
            .with_meta("temperature_k", fmt_f64(pt.temperature_measured))
            .with_meta("noise_gain", fmt_f64(plan.noise_gain))
            .with_meta("seed", seed);
        let spectrum_csv = write_spectrum_csv(&spectrum)?;
        let gains = pt
            .ringdowns
            .iter()
            .map(|r| {
                let e = estimate_qa_ringdown(&r.waveform, r.fs, res.f0)?;
                Ok(GainPoint { inv_gain: 1.0 / r.gain, inv_qa: e.inv_qa, sigma: e.sigma_inv_qa })
            })
            .collect::<Result<Vec<_>>>()?;
        let gains_csv = format!("# temperature_k={}\n{}", fmt_f64(pt.temperature_measured), write_gain_csv(&gains));
        out.add(format!("spectra/{name}.csv"), spectrum_csv.clone());
        out.add(format!("ringdowns/{name}.csv"), gains_csv.clone());
        if waveforms {
            for (j, r) in pt.ringdowns.iter().enumerate() {
                out.add(format!("waveforms/{name}_g{j}.csv"), write_waveform_csv(r, seed, &params_hash));
            }
        }
        points.push(SimulatedPoint { label: name, temperature_k: pt.temperature_measured, spectrum, spectrum_csv, gains, gains_csv });
    }
    Ok((points, out))
}

pub fn estimate_q(gains: &[GainPoint], input_text: &str, temperature_k: Option<f64>) -> Result<QReport> {
    let fit = fit_q_vs_gain(gains)?;
    Ok(QReport { temperature_k, input_sha256: sha256_hex(input_text.as_bytes()), points: gains.to_vec(), fit })
}

/// Apparent Q during the noise measurement, from the Q-vs-gain line.
pub fn qa_at_gain(q: &QGainFit, noise_gain: f64) -> Result<f64> {
    if !(noise_gain > 0.0) {
        return Err(Error::Invalid("noise gain must be positive".into()));
    }
    let inv = q.inv_q + q.slope / noise_gain;
    if !(inv > 0.0) {
        return Err(Error::Degenerate(format!("extrapolated 1/Q_a = {inv:e} at gain {noise_gain}")));
    }
    Ok(1.0 / inv)
}

pub fn fit_spectrum(
    spec: &Spectrum,
    input_text: &str,
    fixed: &FixedParams,
    opts: &LorentzOptions,
    temperature_k: Option<f64>,
) -> Result<FitReport> {
    let fit = fit_lorentzian(spec, fixed, opts)?;
    let (used, _) = fit_bins(spec, fixed.f0, opts.band, opts.exclude_peak_bins)?;
    let excluded_f_hz = (0..spec.len())
        .filter(|&i| spec.f[i] >= opts.band.0 && spec.f[i] <= opts.band.1 && used.binary_search(&i).is_err())
        .map(|i| spec.f[i])
        .collect();
    let temperature_k = temperature_k.or_else(|| spec.meta_f64("temperature_k"));
    Ok(FitReport { temperature_k, input_sha256: sha256_hex(input_text.as_bytes()), fit, excluded_f_hz })
}

/// Pairs fit and Q reports in order; temperatures must agree where both carry one.
pub fn regression_inputs(fits: &[FitReport], qs: &[QReport]) -> Result<Vec<RegressionInput>> {
    if fits.len() != qs.len() {
        return Err(Error::Invalid(format!("{} fit reports but {} Q reports", fits.len(), qs.len())));
    }
    fits.iter()
        .zip(qs)
        .enumerate()
        .map(|(i, (f, q))| {
            let t = match (f.temperature_k, q.temperature_k) {
                (Some(a), Some(b)) if (a - b).abs() > 1e-12 * a.abs() => {
                    return Err(Error::Invalid(format!("input pair {i}: temperatures {a} K and {b} K differ")))
                }
                (Some(a), _) | (None, Some(a)) => a,
                (None, None) => return Err(Error::Invalid(format!("input pair {i} has no temperature"))),
            };
            Ok(RegressionInput { temperature: t, qgain: q.fit, lorentz: f.fit.clone() })
        })
        .collect()
}

pub fn regress_noise(fits: &[FitReport], qs: &[QReport], opts: &AnalysisOptions) -> Result<RegressionReport> {
    let inputs = regression_inputs(fits, qs)?;
    let regression = regress(&inputs, opts)?;
    // Reports round-trip exactly, so these match the digests of the files read.
    let digest = |text: Result<String>| text.map(|t| sha256_hex(t.as_bytes()));
    Ok(RegressionReport {
        fit_sha256: fits.iter().map(|f| digest(to_json(f))).collect::<Result<_>>()?,
        q_sha256: qs.iter().map(|q| digest(to_json(q))).collect::<Result<_>>()?,
        inputs,
        regression,
    })
}

pub fn budget(reg: &RegressionReport, reg_text: &str, cfg: &Config, label: &str) -> Result<BudgetReport> {
    let (res, squid) = cfg.to_domain()?;
    let line = &reg.regression.line;
    let est = noise_budget(line, &res, &squid, cfg.magnetic_moment_j_per_t)?;
    let p2 = PHI0 * PHI0;
    Ok(BudgetReport {
        regression_sha256: sha256_hex(reg_text.as_bytes()),
        rows: vec![BudgetRow::from_budget(label, &est)?],
        appendix: BudgetAppendix {
            intercept_phi0sq_per_hz: line.intercept / p2,
            sigma_intercept_phi0sq_per_hz: line.sigma_intercept / p2,
            slope_phi0sq_per_nk_hz: line.slope / p2 * 1e-9,
            sigma_slope_phi0sq_per_nk_hz: line.sigma_slope / p2 * 1e-9,
            line_chi2: line.chi2,
            line_dof: line.dof,
            estimators: est,
        },
    })
}

pub fn csl_exclude(s_f0: f64, cfg: &Config) -> Result<ExclusionCurve> {
    exclusion_curve(s_f0, &cfg.resonator.mass_model, &cfg.rc_grid(), cfg.csl.axis, &cfg.csl.options)
}

// Tidy tables for plotting.

pub fn spectrum_fit_table(rows: &[(String, &Spectrum, &FitReport)]) -> String {
    let mut out = String::from("label,temperature_k,f_hz,psd,model,in_fit\n");
    for (name, spec, rep) in rows {
        let tpl = rep.fit.template();
        let t = rep.temperature_k.map(fmt_f64).unwrap_or_default();
        let (lo, hi) = rep.fit.band;
        for i in 0..spec.len() {
            let f = spec.f[i];
            let in_fit = f >= lo && f <= hi && !spec.excluded[i] && !rep.excluded_f_hz.contains(&f);
            writeln!(out, "{name},{t},{},{},{},{}", fmt_f64(f), fmt_f64(spec.psd[i]), fmt_f64(tpl.eval(f)), in_fit as u8).unwrap();
        }
    }
    out
}

pub fn q_gain_table(reports: &[QReport]) -> String {
    let mut out = String::from("temperature_k,inv_gain,inv_qa,sigma_inv_qa,line\n");
    for q in reports {
        let t = q.temperature_k.map(fmt_f64).unwrap_or_default();
        for p in &q.points {
            let line = q.fit.inv_q + q.fit.slope * p.inv_gain;
            writeln!(out, "{t},{},{},{},{}", fmt_f64(p.inv_gain), fmt_f64(p.inv_qa), fmt_f64(p.sigma), fmt_f64(line)).unwrap();
        }
    }
    out
}

pub fn noise_table(reg: &Regression, dt_rel: f64) -> String {
    let mut out = String::from("temperature_k,t_over_q_k,sigma_t_over_q_k,b_wb2_per_hz,sigma_b_wb2_per_hz,line_wb2_per_hz\n");
    for (p, xy) in reg.noise_points.iter().zip(regression_points(&reg.noise_points, dt_rel, 0.0)) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(p.temperature),
            fmt_f64(xy.x),
            fmt_f64(xy.sigma_x),
            fmt_f64(p.b),
            fmt_f64(p.sigma_b),
            fmt_f64(reg.line.eval(xy.x))
        )
        .unwrap();
    }
    out
}

pub fn offset_table(reg: &Regression) -> String {
    let mut out = String::from("inv_q0,chi2,intercept_wb2_per_hz\n");
    for e in &reg.offset.entries {
        let c = e.chi2.map(fmt_f64).unwrap_or_default();
        let b = e.intercept.map(fmt_f64).unwrap_or_default();
        writeln!(out, "{},{c},{b}", fmt_f64(e.inv_q0)).unwrap();
    }
    out
}

pub fn budget_csv(rep: &BudgetReport) -> String {
    let mut out = format!("{}\n", BudgetRow::CSV_HEADER);
    for r in &rep.rows {
        writeln!(out, "{}", r.csv_line()).unwrap();
    }
    out
}

pub fn curve_artifacts(curve: &ExclusionCurve) -> Result<Artifacts> {
    let mut a = Artifacts::default();
    a.add("exclusion.csv", write_curve_csv(&CurveTable::from(curve)));
    a.add("exclusion.json", to_json(curve)?);
    Ok(a)
}

pub fn s_f0_from_budget(rep: &BudgetReport) -> Result<f64> {
    let row = rep.rows.first().ok_or_else(|| Error::Invalid("budget report has no rows".into()))?;
    convert_units(row.s_f0_an2_per_hz, Unit::AttoNewton2PerHz, Unit::Newton2PerHz)
}

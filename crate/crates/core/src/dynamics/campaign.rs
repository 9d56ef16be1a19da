//! A synthetic measurement campaign: at each bath temperature, one averaged
//! noise spectrum at the noise-measurement loop gain and one ringdown per
//! loop gain of the Q sweep.

use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{apparent_q, expected_flux_psd, rng, sample_averaged_spectrum, simulate_ringdown};
use crate::error::{invalid, Result};
use crate::physics::{ResonatorParams, SquidReadout};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingdownPlan {
    #[serde(rename = "fs_hz")]
    pub fs: f64,
    /// Record length in envelope decay times.
    pub duration_decays: f64,
    /// Initial amplitude over per-sample readout noise. The default puts the
    /// mean 1/Q error bar near 1e-8.
    pub snr: f64,
}

impl Default for RingdownPlan {
    fn default() -> Self {
        Self { fs: 20e3, duration_decays: 3.0, snr: 16.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignPlan {
    #[serde(rename = "temperatures_k")]
    pub temperatures: Vec<f64>,
    /// Loop gains of the ringdown sweep at each temperature.
    pub gain_magnitudes: Vec<f64>,
    /// Loop gain during the noise measurement.
    pub noise_gain: f64,
    pub n_av: usize,
    pub frame_len: usize,
    #[serde(rename = "fs_hz")]
    pub fs: f64,
    pub seed: u64,
    #[serde(rename = "injected_s_f0_n2_per_hz")]
    pub injected_s_f0: f64,
    /// Frequency window kept from each spectrum, Hz.
    #[serde(rename = "window_hz")]
    pub window: (f64, f64),
    pub ringdown: RingdownPlan,
    /// Relative 1σ scatter of the recorded bath temperature.
    #[serde(default)]
    pub temperature_scatter_rel: f64,
    /// Constant added to 1/Q as seen by the ringdowns only: a systematic
    /// error in the damping measurement.
    #[serde(default)]
    pub inv_q_bias: f64,
}

pub const REFERENCE_TEMPERATURES_MK: [f64; 10] = [43.0, 54.0, 68.0, 84.0, 102.0, 132.0, 171.0, 221.0, 281.0, 351.0];

impl CampaignPlan {
    /// Desk-scale defaults around the reference operating point.
    pub fn reference(seed: u64) -> Self {
        Self {
            temperatures: REFERENCE_TEMPERATURES_MK.iter().map(|t| t / 1e3).collect(),
            gain_magnitudes: vec![4000.0, 2000.0, 4000.0 / 3.0, 1000.0],
            noise_gain: 1.0 / 3e-4,
            n_av: 120,
            frame_len: 1 << 16,
            fs: 100e3,
            seed,
            injected_s_f0: 1.87e-36,
            window: (8000.0, 8350.0),
            ringdown: RingdownPlan::default(),
            temperature_scatter_rel: 0.005,
            inv_q_bias: 0.0,
        }
    }

    pub fn df(&self) -> f64 {
        self.fs / self.frame_len as f64
    }

    pub fn validate(&self, res: &ResonatorParams, squid: &SquidReadout) -> Result<()> {
        if self.temperatures.is_empty() || self.temperatures.iter().any(|t| !(*t > 0.0)) {
            return invalid("campaign temperatures must be positive");
        }
        if self.temperatures.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("campaign temperatures must be sorted and distinct");
        }
        if !self.frame_len.is_power_of_two() || self.frame_len < 2 {
            return invalid("frame_len must be a power of two");
        }
        if !(self.fs > 4.0 * res.f0) {
            return invalid(format!("fs = {} Hz must exceed 4 f0", self.fs));
        }
        if self.n_av == 0 {
            return invalid("n_av must be at least 1");
        }
        if !(self.injected_s_f0 >= 0.0) {
            return invalid("injected s_f0 must be non-negative");
        }
        if self.gain_magnitudes.iter().chain(std::iter::once(&self.noise_gain)).any(|g| !(*g > 1.0)) {
            return invalid("loop gains must exceed 1");
        }
        let (lo, hi) = self.window;
        if !(lo > 0.0 && hi > lo && hi < 0.5 * self.fs) {
            return invalid("spectrum window must lie inside (0, fs/2)");
        }
        if !(lo < res.f0 && hi > res.f0) {
            return invalid("spectrum window must contain f0");
        }
        if !(self.ringdown.fs > 2.0 * res.f0 && self.ringdown.duration_decays > 0.0 && self.ringdown.snr > 0.0) {
            return invalid("ringdown plan needs fs > 2 f0 and positive duration and SNR");
        }
        if !(self.temperature_scatter_rel >= 0.0 && self.temperature_scatter_rel < 0.5) {
            return invalid("temperature scatter must lie in [0, 0.5)");
        }
        squid.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RingdownRecord {
    pub gain: f64,
    pub qa_true: f64,
    pub fs: f64,
    pub waveform: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperaturePoint {
    pub temperature: f64,
    /// Thermometer reading, including its scatter.
    pub temperature_measured: f64,
    pub q_true: f64,
    /// Apparent Q at the noise-measurement gain.
    pub qa_noise_true: f64,
    pub spectrum: Spectrum,
    pub ringdowns: Vec<RingdownRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub plan: CampaignPlan,
    pub points: Vec<TemperaturePoint>,
}

/// Grid of bin centres `k df` inside the plan's window.
pub fn window_grid(plan: &CampaignPlan) -> Vec<f64> {
    let df = plan.df();
    let k0 = (plan.window.0 / df).ceil() as usize;
    let k1 = (plan.window.1 / df).floor() as usize;
    (k0..=k1).map(|k| k as f64 * df).collect()
}

fn simulate_point(
    res: &ResonatorParams,
    squid: &SquidReadout,
    plan: &CampaignPlan,
    i: usize,
    with_ringdowns: bool,
) -> Result<TemperaturePoint> {
    let t = plan.temperatures[i];
    let q = res.q_at(t)?;
    let qa_noise = apparent_q(q, squid.spring_coeff, plan.noise_gain)?;
    let model = expected_flux_psd(res, squid, t, q, qa_noise, plan.injected_s_f0, &window_grid(plan))?;
    let mut r = rng::stream(plan.seed, rng::TAG_SPECTRUM, i as u64, 0);
    let spectrum = sample_averaged_spectrum(&model, plan.n_av, &mut r)?
        .with_meta("df_hz", plan.df())
        .with_meta("fs_hz", plan.fs)
        .with_meta("frame_len", plan.frame_len);
    let mut ringdowns = Vec::new();
    if with_ringdowns {
        for (j, &g) in plan.gain_magnitudes.iter().enumerate() {
            let qa = 1.0 / (1.0 / apparent_q(q, squid.spring_coeff, g)? + plan.inv_q_bias);
            if !(qa > 0.0) {
                return invalid("1/Q bias makes the ringdown damping negative");
            }
            let tau = qa / (std::f64::consts::PI * res.f0);
            let seed = rng::stream_seed(plan.seed, rng::TAG_RINGDOWN, i as u64, j as u64);
            let rd = &plan.ringdown;
            let waveform = simulate_ringdown(res, qa, 1.0, rd.duration_decays * tau, rd.fs, 1.0 / rd.snr, seed)?;
            ringdowns.push(RingdownRecord { gain: g, qa_true: qa, fs: rd.fs, waveform });
        }
    }
    let mut r_t = rng::stream(plan.seed, rng::TAG_THERMOMETER, i as u64, 0);
    let z: f64 = rand_distr::StandardNormal.sample(&mut r_t);
    let temperature_measured = t * (1.0 + plan.temperature_scatter_rel * z);
    Ok(TemperaturePoint { temperature: t, temperature_measured, q_true: q, qa_noise_true: qa_noise, spectrum, ringdowns })
}

/// Simulates every temperature point. Points are generated in parallel from
/// independent streams, so the result does not depend on the thread count.
pub fn simulate_campaign(res: &ResonatorParams, squid: &SquidReadout, plan: &CampaignPlan) -> Result<Campaign> {
    plan.validate(res, squid)?;
    let points = (0..plan.temperatures.len())
        .into_par_iter()
        .map(|i| simulate_point(res, squid, plan, i, true))
        .collect::<Result<Vec<_>>>()?;
    Ok(Campaign { plan: plan.clone(), points })
}

/// Same campaign with the spectra only.
pub fn simulate_spectra(res: &ResonatorParams, squid: &SquidReadout, plan: &CampaignPlan) -> Result<Campaign> {
    plan.validate(res, squid)?;
    let points = (0..plan.temperatures.len())
        .into_par_iter()
        .map(|i| simulate_point(res, squid, plan, i, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(Campaign { plan: plan.clone(), points })
}

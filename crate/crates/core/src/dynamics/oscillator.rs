//! Time-domain generators.
//!
//! The mode is `x'' + Gamma x' + w0^2 x = F/m` with white `F`. It is
//! advanced with the exact one-step transition matrix and the exact
//! one-step noise covariance, so arbitrarily high Q costs nothing in
//! stability or artificial loss.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dynamics::{force_psd, rng};
use crate::error::{invalid, Error, Result};
use crate::physics::{ResonatorParams, SquidReadout};

use std::f64::consts::PI;

/// Exact discretisation of a white-noise-driven underdamped oscillator.
#[derive(Debug, Clone, Copy)]
pub struct Oscillator {
    phi: [[f64; 2]; 2],
    /// Lower Cholesky factor of the per-step covariance: (l11, l21, l22).
    chol: [f64; 3],
    /// Stationary variances of position and velocity.
    stationary: [f64; 2],
}

impl Oscillator {
    /// `accel_intensity` is the two-sided PSD of `F/m`, i.e. `S_F / (2 m^2)`
    /// for a one-sided force PSD `S_F`.
    pub fn new(f0: f64, qa: f64, accel_intensity: f64, h: f64) -> Result<Self> {
        if !(qa > 0.5) {
            return invalid("oscillator must be underdamped (Q_a > 1/2)");
        }
        if !(f0 > 0.0 && h > 0.0 && accel_intensity >= 0.0) {
            return invalid("f0 and step must be positive, noise intensity non-negative");
        }
        let w0 = 2.0 * PI * f0;
        let gamma = w0 / qa;
        let beta = 0.5 * gamma;
        let wd = (w0 * w0 - beta * beta).sqrt();
        let (s, c) = (wd * h).sin_cos();
        let e = (-beta * h).exp();
        let phi = [[e * (c + beta * s / wd), e * s / wd], [-e * w0 * w0 * s / wd, e * (c - beta * s / wd)]];

        let px = accel_intensity / (2.0 * gamma * w0 * w0);
        let pv = accel_intensity / (2.0 * gamma);
        // P_inf - Phi P_inf Phi^T, rearranged so that nothing cancels at high Q.
        let e2 = (-gamma * h).exp();
        let one_minus = -(-gamma * h).exp_m1();
        let qxx = px * (one_minus - e2 * 2.0 * beta * s * (c * wd + beta * s) / (wd * wd));
        let qvv = pv * (one_minus + e2 * 2.0 * beta * s * (c * wd - beta * s) / (wd * wd));
        let qxv = e2 * px * w0 * w0 * 2.0 * beta * s * s / (wd * wd);
        let l11 = qxx.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { qxv / l11 } else { 0.0 };
        let l22 = (qvv - l21 * l21).max(0.0).sqrt();
        Ok(Self { phi, chol: [l11, l21, l22], stationary: [px, pv] })
    }

    pub fn stationary_variance(&self) -> [f64; 2] {
        self.stationary
    }

    #[inline]
    pub fn step(&self, state: &mut [f64; 2], z1: f64, z2: f64) {
        let [x, v] = *state;
        let p = &self.phi;
        state[0] = p[0][0] * x + p[0][1] * v + self.chol[0] * z1;
        state[1] = p[1][0] * x + p[1][1] * v + self.chol[1] * z1 + self.chol[2] * z2;
    }

    /// Draws a state from the stationary law.
    pub fn stationary_state<R: Rng>(&self, rng: &mut R) -> [f64; 2] {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        [self.stationary[0].sqrt() * z1, self.stationary[1].sqrt() * z2]
    }
}

/// Matched-z biquad whose squared magnitude follows
/// `(f^2 - f1^2)^2 / [(f^2 - f0^2)^2 + (f f0/Q_a)^2]`: zeros on the unit
/// circle at `f1`, poles at the mode. Fed with white noise of variance
/// `C fs / 2`, the output has one-sided PSD `C` times that shape.
#[derive(Debug, Clone, Copy)]
pub struct BackactionFilter {
    b1: f64,
    a1: f64,
    a2: f64,
    gain: f64,
    input_sd: f64,
}

impl BackactionFilter {
    pub fn new(f0: f64, f1: f64, qa: f64, fs: f64, c: f64) -> Result<Self> {
        if !(f1 > 0.0 && f1 < 0.5 * fs) || !(f0 < 0.5 * fs) {
            return invalid("f0 and f1 must lie below Nyquist");
        }
        let h = 1.0 / fs;
        let w0 = 2.0 * PI * f0;
        let beta = 0.5 * w0 / qa;
        let wd = (w0 * w0 - beta * beta).sqrt();
        let r = (-beta * h).exp();
        let b1 = -2.0 * (2.0 * PI * f1 * h).cos();
        let a1 = -2.0 * r * (wd * h).cos();
        let a2 = r * r;
        let f_ref = 1.01 * f0;
        let target = {
            let d1 = f_ref * f_ref - f1 * f1;
            let d0 = f_ref * f_ref - f0 * f0;
            let w = f_ref * f0 / qa;
            d1 * d1 / (d0 * d0 + w * w)
        };
        let z = num_complex::Complex64::from_polar(1.0, -2.0 * PI * f_ref * h);
        let num = 1.0 + b1 * z + z * z;
        let den = 1.0 + a1 * z + a2 * z * z;
        let gain = (target / (num.norm_sqr() / den.norm_sqr())).sqrt();
        Ok(Self { b1, a1, a2, gain, input_sd: (c * fs / 2.0).sqrt() })
    }

    /// One-sided PSD of the filter output at `f`, exact for the discrete filter.
    pub fn psd(&self, f: f64, fs: f64) -> f64 {
        let z = num_complex::Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let h = self.gain * (1.0 + self.b1 * z + z * z) / (1.0 + self.a1 * z + self.a2 * z * z);
        2.0 * self.input_sd * self.input_sd / fs * h.norm_sqr()
    }

    /// Runs the filter over `n` fresh white-noise samples.
    pub fn generate<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let (mut w1, mut w2) = (0.0, 0.0);
        let mut out = Vec::with_capacity(n);
        // Burn in over many mode decay times so the filter starts stationary.
        let burn = ((-(self.a2.ln())).recip() * 20.0).min(5e7) as usize;
        for i in 0..burn + n {
            let x: f64 = StandardNormal.sample(rng);
            let x = self.input_sd * x;
            // direct form II
            let w = x - self.a1 * w1 - self.a2 * w2;
            let y = self.gain * (w + self.b1 * w1 + w2);
            w2 = w1;
            w1 = w;
            if i >= burn {
                out.push(y);
            }
        }
        out
    }
}

fn check_sampling(f0: f64, fs: f64) -> Result<()> {
    if !(fs >= 10.0 * f0) {
        return Err(Error::Undersampled(format!("fs = {fs} Hz is below 10 f0 = {} Hz", 10.0 * f0)));
    }
    Ok(())
}

/// Displacement of the mode, m, sampled at `fs`. The drive has one-sided
/// PSD `4 k_B T k/(w0 Q) + s_f0`; damping uses `Q_a`. Starts from `initial`
/// or, if `None`, from a stationary draw.
#[allow(clippy::too_many_arguments)]
pub fn simulate_displacement<R: Rng>(
    res: &ResonatorParams,
    t: f64,
    q: f64,
    qa: f64,
    s_f0: f64,
    n: usize,
    fs: f64,
    initial: Option<[f64; 2]>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    check_sampling(res.f0, fs)?;
    if !(t >= 0.0 && s_f0 >= 0.0 && q > 0.0) {
        return invalid("T, s_f0 must be non-negative and Q positive");
    }
    let m = res.modal_mass();
    let sf = force_psd(res, t, q, s_f0);
    let osc = Oscillator::new(res.f0, qa, sf / (2.0 * m * m), 1.0 / fs)?;
    let mut state = initial.unwrap_or_else(|| osc.stationary_state(rng));
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(state[0]);
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        osc.step(&mut state, z1, z2);
    }
    Ok(out)
}

/// SQUID flux output, Wb: `Phi_x x(t)` plus white readout noise of PSD `A`
/// plus the filtered backaction term of amplitude `C`. Each component
/// draws from its own stream of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_timeseries(
    res: &ResonatorParams,
    squid: &SquidReadout,
    t: f64,
    q: f64,
    qa: f64,
    s_f0: f64,
    duration: f64,
    fs: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    check_sampling(res.f0, fs)?;
    if !(duration * res.f0 / qa >= 10.0) {
        return invalid(format!(
            "duration {duration} s spans fewer than 10 relaxation times for Q_a = {qa}"
        ));
    }
    squid.validate()?;
    let n = (duration * fs).round() as usize;
    let phi_x = squid.phi_x(res.k);
    let mut r_osc = rng::stream(seed, rng::TAG_TIMESERIES, 0, 0);
    let mut flux = simulate_displacement(res, t, q, qa, s_f0, n, fs, None, &mut r_osc)?;
    for v in flux.iter_mut() {
        *v *= phi_x;
    }
    if squid.a > 0.0 {
        let mut r = rng::stream(seed, rng::TAG_READOUT, 0, 0);
        let g = Normal::new(0.0, (squid.a * fs / 2.0).sqrt()).map_err(|e| Error::Invalid(e.to_string()))?;
        for v in flux.iter_mut() {
            *v += g.sample(&mut r);
        }
    }
    if squid.c > 0.0 {
        let mut r = rng::stream(seed, rng::TAG_BACKACTION, 0, 0);
        let filt = BackactionFilter::new(res.f0, squid.f1, qa, fs, squid.c)?;
        for (v, c) in flux.iter_mut().zip(filt.generate(n, &mut r)) {
            *v += c;
        }
    }
    Ok(flux)
}

/// Free decay `x0 exp(-pi f0 t/Q_a) cos(2 pi f0 t + phase)` plus white
/// readout noise of standard deviation `noise_floor`. The phase is uniform.
pub fn simulate_ringdown(
    res: &ResonatorParams,
    qa: f64,
    x0: f64,
    duration: f64,
    fs: f64,
    noise_floor: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(x0 > 0.0 && duration > 0.0 && qa > 0.0 && noise_floor >= 0.0) {
        return invalid("ringdown needs x0, duration, Q_a > 0 and noise_floor >= 0");
    }
    if !(fs > 2.0 * res.f0) {
        return Err(Error::Undersampled(format!("fs = {fs} Hz is below 2 f0")));
    }
    let mut r_phase = rng::stream(seed, rng::TAG_PHASE, 0, 0);
    let phase = r_phase.random::<f64>() * 2.0 * PI;
    let w0 = 2.0 * PI * res.f0;
    let gamma = PI * res.f0 / qa;
    let n = (duration * fs).round() as usize;
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            x0 * (-gamma * t).exp() * (w0 * t + phase).cos()
        })
        .collect();
    if noise_floor > 0.0 {
        let mut r = rng::stream(seed, rng::TAG_READOUT, 0, 0);
        let g = Normal::new(0.0, noise_floor).map_err(|e| Error::Invalid(e.to_string()))?;
        for v in out.iter_mut() {
            *v += g.sample(&mut r);
        }
    }
    Ok(out)
}

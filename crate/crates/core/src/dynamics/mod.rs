//! Synthetic observables: model spectra, averaged-periodogram draws, flux
//! time series, ringdowns and complete measurement campaigns.

pub mod campaign;
pub mod oscillator;
pub mod rng;

use rand_distr::{Distribution, Gamma};

use crate::error::{invalid, Result};
use crate::model::FluxTemplate;
use crate::num::Real;
use crate::physics::{ResonatorParams, SquidReadout, Unit, K_B};
use crate::spectrum::Spectrum;

pub use campaign::{simulate_campaign, Campaign, CampaignPlan, RingdownPlan};
pub use oscillator::{simulate_displacement, simulate_ringdown, simulate_timeseries, BackactionFilter, Oscillator};

/// `Q_a = 1 / (1/Q + c/|G|)`.
pub fn apparent_q<T: Real>(q: T, c: T, gain_mag: T) -> Result<T> {
    if !(q > T::zero()) || !(gain_mag > T::zero()) {
        return invalid("Q and |G| must be positive");
    }
    let inv = T::one() / q + c / gain_mag;
    if !(inv > T::zero()) {
        return invalid(format!("net antidamping: 1/Q_a = {inv} <= 0"));
    }
    Ok(T::one() / inv)
}

/// One-sided force PSD driving the mode, N²/Hz: thermal plus excess.
pub fn force_psd(res: &ResonatorParams, t: f64, q: f64, s_f0: f64) -> f64 {
    4.0 * K_B * t * res.k / (res.omega0() * q) + s_f0
}

/// Lorentzian amplitude `B`, Wb²/Hz: `Phi_x^2 * S_F / k^2`.
pub fn lorentz_amplitude(res: &ResonatorParams, squid: &SquidReadout, t: f64, q: f64, s_f0: f64) -> f64 {
    let k = res.k;
    squid.coupling * k * force_psd(res, t, q, s_f0) / (k * k)
}

/// Flux-noise template in SI units (Wb²/Hz) for one operating point.
pub fn flux_template(
    res: &ResonatorParams,
    squid: &SquidReadout,
    t: f64,
    q: f64,
    qa: f64,
    s_f0: f64,
) -> Result<FluxTemplate<f64>> {
    if !(t >= 0.0) || !(s_f0 >= 0.0) {
        return invalid("temperature and s_f0 must be non-negative");
    }
    if !(q > 0.0) || !(qa > 0.0) {
        return invalid("Q and Q_a must be positive");
    }
    res.validate()?;
    squid.validate()?;
    Ok(FluxTemplate {
        a: squid.a,
        b: lorentz_amplitude(res, squid, t, q, s_f0),
        c: squid.c,
        f0: res.f0,
        f1: squid.f1,
        qa,
    })
}

/// Exact model spectrum on a uniform grid. The result carries `n_av = 0`
/// and zero bin errors.
pub fn expected_flux_psd(
    res: &ResonatorParams,
    squid: &SquidReadout,
    t: f64,
    q: f64,
    qa: f64,
    s_f0: f64,
    f_grid: &[f64],
) -> Result<Spectrum> {
    let tpl = flux_template(res, squid, t, q, qa, s_f0)?;
    if f_grid.iter().any(|f| !(*f > 0.0)) {
        return invalid("frequency grid must be strictly positive");
    }
    let psd = f_grid.iter().map(|&f| tpl.eval(f)).collect();
    Ok(Spectrum::new(f_grid.to_vec(), psd, vec![0.0; f_grid.len()], 0, Unit::Wb2PerHz)?
        .with_meta("temperature_k", t)
        .with_meta("q", q)
        .with_meta("q_a", qa))
}

/// Draws an `n_av`-frame averaged periodogram around `model`: each bin is
/// `model * Gamma(n_av, 1/n_av)`, the law of a mean of `n_av` exponentials.
pub fn sample_averaged_spectrum<R: rand::Rng>(model: &Spectrum, n_av: usize, rng: &mut R) -> Result<Spectrum> {
    if n_av == 0 {
        return invalid("n_av must be at least 1");
    }
    let g = Gamma::new(n_av as f64, 1.0 / n_av as f64).map_err(|e| crate::Error::Invalid(e.to_string()))?;
    let psd = model.psd.iter().map(|&m| m * g.sample(rng)).collect();
    let mut out = Spectrum::averaged(model.f.clone(), psd, n_av, model.unit)?;
    out.excluded = model.excluded.clone();
    out.meta = model.meta.clone();
    out.meta.insert("n_av".into(), n_av.to_string());
    Ok(out)
}

/// Seeded convenience wrapper around [`sample_averaged_spectrum`].
pub fn sample_averaged_spectrum_seeded(model: &Spectrum, n_av: usize, seed: u64) -> Result<Spectrum> {
    let mut r = rng::stream(seed, rng::TAG_SPECTRUM, 0, 0);
    sample_averaged_spectrum(model, n_av, &mut r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apparent_q_cases() {
        assert_eq!(apparent_q(1e7, 0.0, 1e4).unwrap(), 1e7);
        let qa: f64 = apparent_q(1e7, 1e-3, 1e4).unwrap();
        assert!((qa - 5e6).abs() < 1e-6);
        let far: f64 = apparent_q(1e7, 1e-3, 1e15).unwrap();
        assert!((far / 1e7 - 1.0).abs() < 1e-9);
        assert!(apparent_q(1e3, -1.0, 10.0).is_err());
        let q32 = apparent_q(1e7f32, 1e-3, 1e4).unwrap();
        assert!((q32 / 5e6 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn apparent_q_monotone_in_spring_ratio() {
        let mut last = f64::INFINITY;
        for i in 0..20 {
            let qa = apparent_q(1e7, 1e-3 * i as f64, 1e4).unwrap();
            assert!(qa < last);
            last = qa;
        }
    }
}

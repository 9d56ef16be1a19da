//! Averaged periodograms and their exact expectation.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::physics::Unit;
use crate::quad::{integrate, QuadOptions};
use crate::spectrum::Spectrum;

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    Mean,
}

/// Mean of `n_av` non-overlapping rectangular-window periodograms, one-sided,
/// normalised so that `sum(psd) * df` equals the mean square of the
/// (detrended) frames. DC and Nyquist are flagged as excluded.
pub fn averaged_periodogram(
    series: &[f64],
    fs: f64,
    frame_len: usize,
    n_av: usize,
    detrend: Detrend,
    unit: Unit,
) -> Result<Spectrum> {
    if !frame_len.is_power_of_two() || frame_len < 4 {
        return invalid("frame_len must be a power of two >= 4");
    }
    if n_av == 0 {
        return invalid("n_av must be at least 1");
    }
    if !(fs > 0.0) {
        return invalid("fs must be positive");
    }
    let required = frame_len * n_av;
    if series.len() < required {
        return Err(Error::InsufficientSamples { required, available: series.len() });
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_len);
    let half = frame_len / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); frame_len];
    for frame in series[..required].chunks_exact(frame_len) {
        let mean = match detrend {
            Detrend::None => 0.0,
            Detrend::Mean => frame.iter().sum::<f64>() / frame_len as f64,
        };
        for (b, &x) in buf.iter_mut().zip(frame) {
            *b = Complex::new(x - mean, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let norm = 1.0 / (fs * frame_len as f64 * n_av as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| if k == 0 || k == half { a * norm } else { 2.0 * a * norm })
        .collect();
    let df = fs / frame_len as f64;
    let f: Vec<f64> = (0..=half).map(|k| k as f64 * df).collect();
    let mut out = Spectrum::averaged(f, psd, n_av, unit)?
        .with_meta("df_hz", df)
        .with_meta("fs_hz", fs)
        .with_meta("frame_len", frame_len);
    out.excluded[0] = true;
    out.excluded[half] = true;
    Ok(out)
}

/// Bins of `spec` with `lo <= f <= hi`, flags preserved.
pub fn crop(spec: &Spectrum, lo: f64, hi: f64) -> Result<Spectrum> {
    let idx: Vec<usize> = (0..spec.len()).filter(|&i| spec.f[i] >= lo && spec.f[i] <= hi).collect();
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    let mut out = Spectrum::new(pick(&spec.f), pick(&spec.psd), pick(&spec.rel_err), spec.n_av, spec.unit)?;
    out.excluded = idx.iter().map(|&i| spec.excluded[i]).collect();
    out.meta = spec.meta.clone();
    Ok(out)
}

/// Expected one-sided rectangular-window periodogram at bin frequencies
/// `bins`, for a process with one-sided PSD `psd` on `[0, fs/2]`.
///
/// This is the PSD convolved over one period with the Fejér kernel
/// `sin^2(pi u N/fs) / (N fs sin^2(pi u/fs))`. Within `near` bins of the
/// target the convolution is integrated adaptively between kernel zeros
/// (break points in `peaks` are honoured); farther out each inter-zero
/// interval uses its midpoint PSD times the interval's kernel mass.
pub fn expected_periodogram<F>(psd: F, fs: f64, frame_len: usize, bins: &[f64], peaks: &[f64], near: usize) -> Vec<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let n = frame_len as f64;
    let df = fs / n;
    let wrap = |nu: f64| {
        let mut v = nu.rem_euclid(fs);
        if v > 0.5 * fs {
            v -= fs;
        }
        psd(v.abs())
    };
    let kernel = |u: f64| {
        let s = (PI * u / fs).sin();
        if s.abs() < 1e-300 {
            return n / fs;
        }
        let t = (PI * u * n / fs).sin();
        t * t / (n * fs * s * s)
    };
    let near = near.min(frame_len / 2) as i64;
    let total = frame_len as i64;
    // Kernel mass of every far inter-zero interval; independent of the target bin.
    let far_weights: Vec<f64> = (near..(total - near))
        .map(|m| crate::quad::gk15(&kernel, m as f64 * df, (m + 1) as f64 * df).0)
        .collect();
    bins.par_iter()
        .map(|&fk| {
            let mut breaks: Vec<f64> = (-near..=near).map(|m| m as f64 * df).collect();
            for &p in peaks {
                for image in [p - fk, -p - fk] {
                    let u = image - (image / fs).round() * fs;
                    if u > breaks[0] && u < *breaks.last().unwrap() {
                        breaks.push(u);
                    }
                }
            }
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup();
            let near_part = integrate(
                |u| wrap(fk + u) * kernel(u),
                &breaks,
                QuadOptions { rel_tol: 1e-10, abs_tol: 0.0, max_splits: 50_000 },
            )
            .value;
            let far: f64 = far_weights
                .iter()
                .enumerate()
                .map(|(i, w)| wrap(fk + ((near + i as i64) as f64 + 0.5) * df) * w)
                .sum();
            near_part + far
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn df_anchor() {
        let fs = 100e3;
        let n = 1usize << 20;
        let df = fs / n as f64;
        assert!((df * 1e3 - 95.367).abs() < 1e-3);
        assert!((n as f64 / fs - 10.49).abs() < 0.01);
    }

    #[test]
    fn tone_at_bin_centre_lands_in_one_bin() {
        let fs = 1024.0;
        let n = 1024;
        let a = 0.7;
        let x: Vec<f64> = (0..n).map(|i| a * (2.0 * PI * 100.0 * i as f64 / fs).cos()).collect();
        let s = averaged_periodogram(&x, fs, n, 1, Detrend::None, Unit::Metre2PerHz).unwrap();
        let p = s.psd[100] * s.df;
        assert!((p - a * a / 2.0).abs() < 1e-12);
        let rest: f64 = s.psd.iter().enumerate().filter(|(k, _)| *k != 100).map(|(_, v)| v).sum();
        assert!(rest * s.df < 1e-20);
    }

    #[test]
    fn insufficient_samples_reports_requirement() {
        let e = averaged_periodogram(&[0.0; 100], 1.0, 64, 2, Detrend::None, Unit::Metre2PerHz);
        match e {
            Err(Error::InsufficientSamples { required, available }) => {
                assert_eq!(required, 128);
                assert_eq!(available, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_psd_expectation_is_flat() {
        let fs = 1000.0;
        let bins: Vec<f64> = (10..20).map(|k| k as f64 * fs / 256.0).collect();
        let e = expected_periodogram(|_| 2.5, fs, 256, &bins, &[], 16);
        for v in e {
            assert!((v - 2.5).abs() < 1e-6);
        }
    }
}

//! Apparent quality factor from a free-decay record.
//!
//! A block-demodulated log-envelope gives the starting decay rate; the
//! final estimate fits `exp(-g t) (a cos w0 t + b sin w0 t)` to the raw
//! samples by damped Gauss–Newton, with f0 known.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::line::weighted_least_squares;

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingdownEstimate {
    pub qa: f64,
    pub sigma_qa: f64,
    pub inv_qa: f64,
    pub sigma_inv_qa: f64,
    /// Envelope decay rate, 1/s.
    pub gamma: f64,
    pub sigma_gamma: f64,
    pub amplitude: f64,
    /// Initial amplitude over the per-sample residual rms.
    pub snr: f64,
    pub iterations: usize,
}

/// Minimum initial amplitude-to-noise ratio accepted.
pub const MIN_SNR: f64 = 10.0;

const RESYNC: usize = 1024;

/// Calls `visit(i, t, cos w t, sin w t, exp(-g t))` for every sample, with
/// trigonometric and exponential recurrences re-anchored every `RESYNC`.
fn sweep<F: FnMut(usize, f64, f64, f64, f64)>(n: usize, fs: f64, w: f64, g: f64, mut visit: F) {
    let h = 1.0 / fs;
    let (ds, dc) = (w * h).sin_cos();
    let de = (-g * h).exp();
    let mut i = 0;
    while i < n {
        let t0 = i as f64 * h;
        let (mut s, mut c) = (w * t0).sin_cos();
        let mut e = (-g * t0).exp();
        let end = (i + RESYNC).min(n);
        for k in i..end {
            visit(k, k as f64 * h, c, s, e);
            let nc = c * dc - s * ds;
            s = s * dc + c * ds;
            c = nc;
            e *= de;
        }
        i = end;
    }
}

struct Normal3 {
    jtj: [[f64; 3]; 3],
    jtr: [f64; 3],
    rss: f64,
}

fn accumulate(x: &[f64], fs: f64, w: f64, p: [f64; 3]) -> Normal3 {
    let [g, a, b] = p;
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    let mut rss = 0.0;
    sweep(x.len(), fs, w, g, |i, t, c, s, e| {
        let m = e * (a * c + b * s);
        let r = x[i] - m;
        let j = [-t * m, e * c, e * s];
        for u in 0..3 {
            jtr[u] += j[u] * r;
            for v in u..3 {
                jtj[u][v] += j[u] * j[v];
            }
        }
        rss += r * r;
    });
    for u in 0..3 {
        for v in 0..u {
            jtj[u][v] = jtj[v][u];
        }
    }
    Normal3 { jtj, jtr, rss }
}

fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let a = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let b = nalgebra::Vector3::from_fn(|i, _| rhs[i]);
    a.lu().solve(&b).map(|v| [v[0], v[1], v[2]])
}

fn inverse3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let a = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    a.try_inverse().map(|inv| {
        let mut o = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                o[i][j] = inv[(i, j)];
            }
        }
        o
    })
}

/// Quadrature amplitudes at fixed decay rate, by linear least squares.
fn amplitudes(x: &[f64], fs: f64, w: f64, g: f64) -> (f64, f64) {
    let (mut cc, mut cs, mut ss, mut xc, mut xs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    sweep(x.len(), fs, w, g, |i, _, c, s, e| {
        let (ec, es) = (e * c, e * s);
        cc += ec * ec;
        cs += ec * es;
        ss += es * es;
        xc += x[i] * ec;
        xs += x[i] * es;
    });
    let det = cc * ss - cs * cs;
    ((ss * xc - cs * xs) / det, (cc * xs - cs * xc) / det)
}

pub fn estimate_qa_ringdown(series: &[f64], fs: f64, f0: f64) -> Result<RingdownEstimate> {
    if !(fs > 2.0 * f0 && f0 > 0.0) {
        return Err(Error::Undersampled(format!("fs = {fs} Hz must exceed 2 f0 = {} Hz", 2.0 * f0)));
    }
    let n = series.len();
    let per_period = fs / f0;
    if (n as f64) < 64.0 * 20.0 * per_period {
        return invalid(format!("ringdown of {n} samples is too short (need 1280 periods)"));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return invalid("ringdown contains non-finite samples");
    }
    let w = 2.0 * PI * f0;
    let duration = n as f64 / fs;

    // block demodulation for a first decay rate
    let blocks = 64;
    let len = n / blocks;
    let mut iq = vec![(0.0f64, 0.0f64); blocks];
    sweep(blocks * len, fs, w, 0.0, |i, _, c, s, _| {
        let b = i / len;
        iq[b].0 += series[i] * c;
        iq[b].1 += series[i] * s;
    });
    let amp: Vec<f64> = iq.iter().map(|(i, q)| 2.0 * (i * i + q * q).sqrt() / len as f64).collect();
    let a0 = amp[0];
    if !(a0 > 0.0) {
        return Err(Error::Ringdown("no signal at f0".into()));
    }
    let keep: Vec<usize> = (0..blocks).filter(|&b| amp[b] > 0.3 * a0).collect();
    let mut g = if keep.len() >= 3 {
        let t: Vec<f64> = keep.iter().map(|&b| (b as f64 + 0.5) * len as f64 / fs).collect();
        let y: Vec<f64> = keep.iter().map(|&b| amp[b].ln()).collect();
        weighted_least_squares(&t, &y, &vec![1.0; keep.len()]).map(|f| -f.slope).unwrap_or(0.0)
    } else {
        let tb = len as f64 / fs;
        (amp[0] / amp[1].max(1e-300)).ln() / tb
    };
    if !(g > 0.0) || !g.is_finite() {
        g = 1.0 / (10.0 * duration);
    }
    let (a, b) = amplitudes(series, fs, w, g);
    let mut p = [g, a, b];

    // damped Gauss–Newton on the raw samples
    let mut cur = accumulate(series, fs, w, p);
    let mut lambda = 1e-6;
    let mut iterations = 0;
    for _ in 0..60 {
        iterations += 1;
        let mut accepted = false;
        for _ in 0..20 {
            let mut m = cur.jtj;
            for k in 0..3 {
                m[k][k] *= 1.0 + lambda;
            }
            let Some(d) = solve3(m, cur.jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
            let next = accumulate(series, fs, w, trial);
            if next.rss <= cur.rss {
                let rel = (d[0] / trial[0]).abs();
                p = trial;
                let improved = cur.rss - next.rss;
                let old = cur.rss;
                cur = next;
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                if rel < 1e-12 || improved <= 1e-15 * old {
                    lambda = -1.0;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || lambda < 0.0 {
            break;
        }
    }
    let gamma = p[0];
    let amplitude = p[1].hypot(p[2]);
    let dof = (n - 3) as f64;
    let s2 = cur.rss / dof;
    let inv = inverse3(cur.jtj).ok_or_else(|| Error::Ringdown("singular normal matrix".into()))?;
    let sigma_gamma = (s2 * inv[0][0]).max(0.0).sqrt();
    let noise = s2.sqrt();
    let snr = if noise > 0.0 { amplitude / noise } else { f64::INFINITY };
    if snr < MIN_SNR {
        return Err(Error::Ringdown(format!("initial SNR {snr:.2} below {MIN_SNR}")));
    }
    if !(gamma > 3.0 * sigma_gamma) || gamma * duration < 1e-3 {
        return Err(Error::Ringdown(format!(
            "no significant decay: rate {gamma:e} ± {sigma_gamma:e} 1/s over {duration} s"
        )));
    }
    let qa = PI * f0 / gamma;
    Ok(RingdownEstimate {
        qa,
        sigma_qa: qa * sigma_gamma / gamma,
        inv_qa: gamma / (PI * f0),
        sigma_inv_qa: sigma_gamma / (PI * f0),
        gamma,
        sigma_gamma,
        amplitude,
        snr,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(f0: f64, qa: f64, fs: f64, dur: f64, phase: f64) -> Vec<f64> {
        let g = PI * f0 / qa;
        (0..(dur * fs) as usize)
            .map(|i| {
                let t = i as f64 / fs;
                (-g * t).exp() * (2.0 * PI * f0 * t + phase).cos()
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery() {
        let f0 = 8174.01;
        let x = decay(f0, 5e6, 20e3, 60.0, 0.7);
        let e = estimate_qa_ringdown(&x, 20e3, f0).unwrap();
        assert!((e.qa / 5e6 - 1.0).abs() < 1e-6, "{}", e.qa);
    }

    #[test]
    fn constant_amplitude_rejected() {
        let f0 = 1000.0;
        let fs = 10e3;
        let x: Vec<f64> = (0..200_000).map(|i| (2.0 * PI * f0 * i as f64 / fs).cos()).collect();
        assert!(matches!(estimate_qa_ringdown(&x, fs, f0), Err(Error::Ringdown(_))));
    }

    #[test]
    fn short_record_rejected() {
        assert!(estimate_qa_ringdown(&[0.0; 100], 20e3, 8000.0).is_err());
    }
}

//! Fit of the resonant flux-noise template with f0, f1 and Q_a held fixed,
//! leaving the three amplitudes free.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::lm::{levenberg_marquardt, LmOptions};
use crate::model::{template_basis, FluxTemplate};
use crate::physics::Unit;
use crate::spectrum::Spectrum;

/// Source of the per-bin standard error `w_i * rel_err_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// `w_i` is the observed bin value. Biased low by about `2/n_av` per
    /// parameter because low fluctuations receive larger weight.
    Observed,
    /// `w_i` is the model value, iterated to self-consistency.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    #[serde(rename = "f0_hz")]
    pub f0: f64,
    #[serde(rename = "f1_hz")]
    pub f1: f64,
    pub qa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzOptions {
    #[serde(rename = "band_hz")]
    pub band: (f64, f64),
    pub exclude_peak_bins: usize,
    pub weighting: Weighting,
    pub max_iter: usize,
    /// Starting amplitudes (A, B, C) in spectrum units; defaults are derived from the data.
    pub init: Option<[f64; 3]>,
}

impl Default for LorentzOptions {
    fn default() -> Self {
        Self { band: (8100.0, 8240.0), exclude_peak_bins: 5, weighting: Weighting::Model, max_iter: 100, init: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub sigma_c: f64,
    /// Covariance of (A, B, C).
    pub cov: [[f64; 3]; 3],
    pub fixed: FixedParams,
    pub chi2: f64,
    pub dof: usize,
    #[serde(rename = "band_hz")]
    pub band: (f64, f64),
    pub excluded_bins: usize,
    pub fitted_bins: usize,
    pub weighting: Weighting,
    pub unit: Unit,
    pub iterations: usize,
    /// Parameters that went negative and were pinned at zero.
    pub clamped: Vec<String>,
}

impl LorentzFit {
    pub fn template(&self) -> FluxTemplate<f64> {
        FluxTemplate { a: self.a, b: self.b, c: self.c, f0: self.fixed.f0, f1: self.fixed.f1, qa: self.fixed.qa }
    }
}

/// Indices of the bins entering the fit: unflagged bins inside `band`,
/// minus the `exclude` bins closest to f0.
pub fn fit_bins(spec: &Spectrum, f0: f64, band: (f64, f64), exclude: usize) -> Result<(Vec<usize>, usize)> {
    let (lo, hi) = band;
    if !(lo < hi) || lo < spec.f[0] - 0.5 * spec.df || hi > spec.f[spec.len() - 1] + 0.5 * spec.df {
        return invalid(format!("band {lo}-{hi} Hz not inside the spectrum grid"));
    }
    let mut idx = spec.band_indices(lo, hi);
    let mut by_dist = idx.clone();
    by_dist.sort_by(|&i, &j| (spec.f[i] - f0).abs().partial_cmp(&(spec.f[j] - f0).abs()).unwrap().then(i.cmp(&j)));
    let drop: Vec<usize> = by_dist.into_iter().take(exclude).collect();
    idx.retain(|i| !drop.contains(i));
    Ok((idx, drop.len()))
}

fn sigma_scale(w: Weighting, y: f64, m: f64) -> f64 {
    match w {
        Weighting::Observed => y,
        Weighting::Model => m,
    }
}

/// χ² of `tpl` against `spec` on the given bins.
pub fn chi2_on_bins(spec: &Spectrum, bins: &[usize], tpl: &FluxTemplate<f64>, weighting: Weighting) -> f64 {
    bins.iter()
        .map(|&i| {
            let y = spec.psd[i];
            let m = tpl.eval(spec.f[i]);
            let s = sigma_scale(weighting, y, m) * spec.rel_err[i];
            ((y - m) / s).powi(2)
        })
        .sum()
}

/// Recomputes the stored χ² from the fitted amplitudes and the spectrum.
pub fn recompute_chi2(fit: &LorentzFit, spec: &Spectrum) -> Result<f64> {
    let (bins, _) = fit_bins(spec, fit.fixed.f0, fit.band, fit.excluded_bins)?;
    Ok(chi2_on_bins(spec, &bins, &fit.template(), fit.weighting))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Data-driven start: tail median split between A and C, B from the
/// highest bin after removing that background.
pub fn default_init(spec: &Spectrum, fixed: &FixedParams, bins: &[usize]) -> [f64; 3] {
    let mut far: Vec<usize> = bins.to_vec();
    far.sort_by(|&i, &j| (spec.f[j] - fixed.f0).abs().partial_cmp(&(spec.f[i] - fixed.f0).abs()).unwrap());
    let n_far = (far.len() / 5).max(1);
    let tail = median(far[..n_far].iter().map(|&i| spec.psd[i]).collect());
    let (imax, ymax) = bins.iter().map(|&i| (i, spec.psd[i])).fold((bins[0], f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let g = template_basis(fixed.f0, fixed.f1, fixed.qa, spec.f[imax]);
    let b = ((ymax - tail) / g[1]).max(tail / g[1] * 1e-3);
    [0.5 * tail, b, 0.5 * tail]
}

/// Weighted LS of the linear template, free parameters `free`, others pinned.
fn solve_fixed_weights(
    g: &DMatrix<f64>,
    y: &[f64],
    sigma: &[f64],
    free: &[usize],
    p0: &[f64; 3],
    opts: LmOptions,
) -> ([f64; 3], usize, Option<DMatrix<f64>>) {
    let n = y.len();
    let colscale: Vec<f64> = (0..3).map(|k| (g.column(k).norm_squared() / n as f64).sqrt().max(1e-300)).collect();
    let free = free.to_vec();
    let base = *p0;
    let start = DVector::from_iterator(free.len(), free.iter().map(|&k| base[k] * colscale[k]));
    let rep = levenberg_marquardt(
        |q| {
            let mut p = base;
            for (m, &k) in free.iter().enumerate() {
                p[k] = q[m] / colscale[k];
            }
            let r = DVector::from_fn(n, |i, _| {
                (g[(i, 0)] * p[0] + g[(i, 1)] * p[1] + g[(i, 2)] * p[2] - y[i]) / sigma[i]
            });
            let jac = DMatrix::from_fn(n, free.len(), |i, m| g[(i, free[m])] / colscale[free[m]] / sigma[i]);
            (r, jac)
        },
        start,
        opts,
    );
    let mut p = base;
    for (m, &k) in free.iter().enumerate() {
        p[k] = rep.params[m] / colscale[k];
    }
    let cov = rep.jtj_inv.map(|inv| {
        DMatrix::from_fn(free.len(), free.len(), |a, b| inv[(a, b)] / (colscale[free[a]] * colscale[free[b]]))
    });
    (p, rep.iterations, cov)
}

pub fn fit_lorentzian(spec: &Spectrum, fixed: &FixedParams, opts: &LorentzOptions) -> Result<LorentzFit> {
    if !(fixed.qa > 0.0 && fixed.f0 > 0.0 && fixed.f1 > 0.0) {
        return invalid("f0, f1 and Q_a must be positive");
    }
    let (bins, excluded) = fit_bins(spec, fixed.f0, opts.band, opts.exclude_peak_bins)?;
    if bins.len() < 4 {
        return invalid(format!("only {} bins left in band after exclusion", bins.len()));
    }
    if bins.iter().any(|&i| !(spec.rel_err[i] > 0.0)) {
        return invalid("fit needs positive per-bin relative errors");
    }
    let init = match opts.init {
        Some(p) => {
            if p.iter().any(|v| !(*v > 0.0)) {
                return invalid("initial amplitudes must be positive");
            }
            p
        }
        None => default_init(spec, fixed, &bins),
    };
    let scale = median(bins.iter().map(|&i| spec.psd[i]).collect());
    if !(scale > 0.0) {
        return invalid("spectrum band is identically zero");
    }
    let y: Vec<f64> = bins.iter().map(|&i| spec.psd[i] / scale).collect();
    let rel: Vec<f64> = bins.iter().map(|&i| spec.rel_err[i]).collect();
    let n = bins.len();
    let g = DMatrix::from_fn(n, 3, |i, k| template_basis(fixed.f0, fixed.f1, fixed.qa, spec.f[bins[i]])[k]);
    let model_at = |p: &[f64; 3], i: usize| g[(i, 0)] * p[0] + g[(i, 1)] * p[1] + g[(i, 2)] * p[2];
    let lm = LmOptions { max_iter: 50, ..Default::default() };

    let mut free = vec![0usize, 1, 2];
    let mut clamped = Vec::new();
    let mut p = [init[0] / scale, init[1] / scale, init[2] / scale];
    let mut iterations = 0;
    let mut cov: Option<DMatrix<f64>>;
    let names = ["A", "B", "C"];
    loop {
        let sig_obs: Vec<f64> = (0..n).map(|i| y[i] * rel[i]).collect();
        if sig_obs.iter().any(|s| !(*s > 0.0)) && opts.weighting == Weighting::Observed {
            return Err(Error::Degenerate("zero-valued bin with observed-value weights".into()));
        }
        let sig0: Vec<f64> = match opts.weighting {
            Weighting::Observed => sig_obs,
            // start from the observed-weight solution unless a bin is zero
            Weighting::Model if sig_obs.iter().all(|s| *s > 0.0) => sig_obs,
            Weighting::Model => (0..n).map(|i| model_at(&p, i).max(1e-12) * rel[i]).collect(),
        };
        let (mut q, it, mut c) = solve_fixed_weights(&g, &y, &sig0, &free, &p, lm);
        iterations += it;
        if opts.weighting == Weighting::Model {
            let mut done = false;
            for _ in 0..opts.max_iter {
                let sig: Vec<f64> = (0..n).map(|i| model_at(&q, i).max(1e-12 * y[i].max(1e-300)) * rel[i]).collect();
                let (nq, it, nc) = solve_fixed_weights(&g, &y, &sig, &free, &q, lm);
                iterations += it;
                let change = (0..3).map(|k| (nq[k] - q[k]).abs() / (nq[k].abs() + 1e-300)).fold(0.0, f64::max);
                q = nq;
                c = nc;
                if change < 1e-11 {
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(Error::NonConvergence {
                    iterations,
                    reason: format!(
                        "model reweighting did not settle; last (A, B, C) = ({:e}, {:e}, {:e})",
                        q[0] * scale, q[1] * scale, q[2] * scale
                    ),
                });
            }
        }
        p = q;
        cov = c;
        let neg: Vec<usize> = free.iter().copied().filter(|&k| p[k] < 0.0).collect();
        if neg.is_empty() {
            break;
        }
        for k in neg {
            p[k] = 0.0;
            free.retain(|&f| f != k);
            clamped.push(names[k].to_string());
        }
        if free.is_empty() {
            break;
        }
    }
    if !(p[1] > 0.0) {
        return Err(Error::Degenerate(format!("fitted B = {:e} is not positive", p[1] * scale)));
    }
    let mut full = [[0.0; 3]; 3];
    if let Some(c) = cov {
        for (a, &ka) in free.iter().enumerate() {
            for (b, &kb) in free.iter().enumerate() {
                full[ka][kb] = c[(a, b)] * scale * scale;
            }
        }
    } else {
        return Err(Error::NonConvergence { iterations, reason: "normal matrix is singular".into() });
    }
    let mut fit = LorentzFit {
        a: p[0] * scale,
        b: p[1] * scale,
        c: p[2] * scale,
        sigma_a: full[0][0].sqrt(),
        sigma_b: full[1][1].sqrt(),
        sigma_c: full[2][2].sqrt(),
        cov: full,
        fixed: *fixed,
        chi2: 0.0,
        dof: n - 3,
        band: opts.band,
        excluded_bins: excluded,
        fitted_bins: n,
        weighting: opts.weighting,
        unit: spec.unit,
        iterations,
        clamped,
    };
    fit.chi2 = chi2_on_bins(spec, &bins, &fit.template(), fit.weighting);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_spec(tpl: &FluxTemplate<f64>) -> Spectrum {
        let df = 100e3 / 65536.0;
        let f: Vec<f64> = (5200..5480).map(|k| k as f64 * df).collect();
        let psd: Vec<f64> = f.iter().map(|&f| tpl.eval(f)).collect();
        Spectrum::averaged(f, psd, 120, Unit::Phi0SqPerHz).unwrap()
    }

    #[test]
    fn exact_model_recovered() {
        let tpl = FluxTemplate { a: 1.23e-13, b: 2.0e-20, c: 3.78e-13, f0: 8174.01, f1: 8175.11, qa: 1.6e5 };
        let spec = model_spec(&tpl);
        let fixed = FixedParams { f0: tpl.f0, f1: tpl.f1, qa: tpl.qa };
        for w in [Weighting::Observed, Weighting::Model] {
            let fit = fit_lorentzian(&spec, &fixed, &LorentzOptions { weighting: w, ..Default::default() }).unwrap();
            assert!((fit.a / tpl.a - 1.0).abs() < 1e-8, "{w:?} A");
            assert!((fit.b / tpl.b - 1.0).abs() < 1e-8, "{w:?} B");
            assert!((fit.c / tpl.c - 1.0).abs() < 1e-8, "{w:?} C");
            assert!(fit.chi2 < 1e-12);
            assert_eq!(fit.excluded_bins, 5);
            assert_eq!(fit.dof, fit.fitted_bins - 3);
            assert_eq!(recompute_chi2(&fit, &spec).unwrap(), fit.chi2);
        }
    }

    #[test]
    fn band_outside_grid_rejected() {
        let tpl = FluxTemplate { a: 1.0, b: 1e-7, c: 1.0, f0: 8174.01, f1: 8175.11, qa: 1e5 };
        let spec = model_spec(&tpl);
        let fixed = FixedParams { f0: tpl.f0, f1: tpl.f1, qa: tpl.qa };
        let o = LorentzOptions { band: (7000.0, 8240.0), ..Default::default() };
        assert!(fit_lorentzian(&spec, &fixed, &o).is_err());
    }

    #[test]
    fn negative_c_is_clamped() {
        // data with no C term plus a dip that pushes C negative
        let tpl = FluxTemplate { a: 1.0, b: 1e-6, c: 0.0, f0: 8174.01, f1: 8175.11, qa: 1e5 };
        let mut spec = model_spec(&tpl);
        for (i, f) in spec.f.clone().iter().enumerate() {
            if (f - 8174.0).abs() > 40.0 {
                spec.psd[i] *= 0.97;
            }
        }
        let fixed = FixedParams { f0: tpl.f0, f1: tpl.f1, qa: tpl.qa };
        let fit = fit_lorentzian(&spec, &fixed, &LorentzOptions::default()).unwrap();
        assert!(fit.a >= 0.0 && fit.b > 0.0 && fit.c >= 0.0);
    }
}

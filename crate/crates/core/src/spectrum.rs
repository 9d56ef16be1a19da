use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::physics::Unit;

/// One-sided power spectral density on a uniform frequency grid.
///
/// `n_av == 0` marks an exact model spectrum (all `rel_err` zero).
/// `excluded` flags bins that downstream fits skip (DC and Nyquist for
/// periodogram output); flagged bins are kept in the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub f: Vec<f64>,
    pub psd: Vec<f64>,
    pub rel_err: Vec<f64>,
    pub n_av: usize,
    pub df: f64,
    pub unit: Unit,
    pub excluded: Vec<bool>,
    /// Free-form provenance carried through the CSV header.
    pub meta: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn new(f: Vec<f64>, psd: Vec<f64>, rel_err: Vec<f64>, n_av: usize, unit: Unit) -> Result<Self> {
        let n = f.len();
        if n < 2 {
            return invalid("spectrum needs at least two bins");
        }
        if psd.len() != n || rel_err.len() != n {
            return invalid("spectrum columns differ in length");
        }
        let df = (f[n - 1] - f[0]) / (n - 1) as f64;
        if !(df > 0.0) {
            return invalid("frequency grid must be increasing");
        }
        for w in f.windows(2) {
            if ((w[1] - w[0]) - df).abs() > 1e-9 * df {
                return invalid(format!("frequency grid is not uniform near {} Hz", w[0]));
            }
        }
        if let Some(i) = psd.iter().position(|p| !(*p >= 0.0) || !p.is_finite()) {
            return invalid(format!("psd must be finite and non-negative (bin {i})"));
        }
        if rel_err.iter().any(|e| !(*e >= 0.0)) {
            return invalid("relative errors must be non-negative");
        }
        Ok(Self { excluded: vec![false; n], f, psd, rel_err, n_av, df, unit, meta: BTreeMap::new() })
    }

    /// Builds an averaged spectrum with the `1/sqrt(n_av)` bin error model.
    pub fn averaged(f: Vec<f64>, psd: Vec<f64>, n_av: usize, unit: Unit) -> Result<Self> {
        if n_av == 0 {
            return invalid("n_av must be at least 1");
        }
        let e = 1.0 / (n_av as f64).sqrt();
        let n = f.len();
        Self::new(f, psd, vec![e; n], n_av, unit)
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// Indices of unflagged bins with `lo <= f <= hi`.
    pub fn band_indices(&self, lo: f64, hi: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.excluded[i] && self.f[i] >= lo && self.f[i] <= hi).collect()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// Same spectrum with the PSD column expressed in `unit`.
    pub fn converted(&self, unit: Unit) -> Result<Spectrum> {
        if unit == self.unit {
            return Ok(self.clone());
        }
        let factor = crate::physics::convert_units(1.0, self.unit, unit)?;
        let mut out = self.clone();
        for v in out.psd.iter_mut() {
            *v *= factor;
        }
        out.unit = unit;
        Ok(out)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(|v| v.parse().ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averaged_sets_bartlett_errors() {
        let s = Spectrum::averaged(vec![1.0, 2.0, 3.0], vec![1.0; 3], 120, Unit::Wb2PerHz).unwrap();
        assert!((s.rel_err[0] - 0.091287092917527679).abs() < 1e-15);
        assert_eq!(s.df, 1.0);
    }

    #[test]
    fn rejects_non_uniform_grid() {
        assert!(Spectrum::averaged(vec![1.0, 2.0, 3.5], vec![1.0; 3], 1, Unit::Wb2PerHz).is_err());
    }

    #[test]
    fn rejects_negative_psd() {
        assert!(Spectrum::averaged(vec![1.0, 2.0], vec![1.0, -1.0], 1, Unit::Wb2PerHz).is_err());
    }

    #[test]
    fn band_skips_flagged_bins() {
        let mut s = Spectrum::averaged(vec![0.0, 1.0, 2.0, 3.0], vec![1.0; 4], 4, Unit::Wb2PerHz).unwrap();
        s.excluded[0] = true;
        assert_eq!(s.band_indices(0.0, 2.0), vec![1, 2]);
    }
}

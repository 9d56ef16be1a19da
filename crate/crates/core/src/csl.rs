//! CSL force-noise spectral density for homogeneous mass distributions,
//! and its inversion into an upper bound `lambda_max(r_C)`.
//!
//! The one-sided force PSD along the monitored direction `n` is
//!
//! ```text
//! S_F = 2 hbar^2 lambda r_C^3 / (pi^{3/2} m0^2) * I,
//! I   = ∫ d^3k (k·n)^2 exp(-k^2 r_C^2) |mu~(k)|^2
//! ```
//!
//! with `mu~(0)` equal to the total mass. Spheres reduce `I` to a radial
//! integral (the angular average of `(k·n)^2` is `k^2/3`), boxes factor
//! into three one-dimensional integrals. Composites either add their
//! parts incoherently (default) or go through the full 3D quadrature.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::num::Real;
use crate::physics::{HBAR, M0};
use crate::quad::{gauss_legendre, integrate, uniform_breaks, QuadOptions};

/// Homogeneous mass distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MassModel {
    Sphere {
        #[serde(rename = "radius_m")]
        radius: f64,
        #[serde(rename = "density_kg_per_m3")]
        density: f64,
    },
    /// Axis-aligned box centred on its own origin.
    Cuboid {
        #[serde(rename = "dims_m")]
        dims: [f64; 3],
        #[serde(rename = "density_kg_per_m3")]
        density: f64,
    },
    Composite { parts: Vec<Component> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub model: MassModel,
    #[serde(rename = "offset_m")]
    pub offset: [f64; 3],
    /// Scales the part's density; must lie in [0, 1].
    pub weight: f64,
}

/// Loaded-microsphere radius and density used as defaults, m and kg/m³.
pub const SPHERE_RADIUS: f64 = 15.5e-6;
pub const SPHERE_DENSITY: f64 = 7430.0;
/// Tipless silicon cantilever, thickness along the motion first.
pub const CANTILEVER_DIMS: [f64; 3] = [2.5e-6, 57e-6, 450e-6];
pub const SILICON_DENSITY: f64 = 2330.0;
/// First flexural mode effective-mass fraction used as cantilever weight.
pub const CANTILEVER_MODE_WEIGHT: f64 = 0.25;

impl MassModel {
    pub fn default_sphere() -> Self {
        MassModel::Sphere { radius: SPHERE_RADIUS, density: SPHERE_DENSITY }
    }

    /// Sphere glued to the free end of the cantilever. The motion is along x,
    /// normal to the cantilever plane.
    pub fn loaded_cantilever(mode_weight: f64) -> Self {
        let [t, _, l] = CANTILEVER_DIMS;
        MassModel::Composite {
            parts: vec![
                Component {
                    model: MassModel::default_sphere(),
                    offset: [0.5 * t + SPHERE_RADIUS, 0.0, 0.5 * l - SPHERE_RADIUS],
                    weight: 1.0,
                },
                Component {
                    model: MassModel::Cuboid { dims: CANTILEVER_DIMS, density: SILICON_DENSITY },
                    offset: [0.0; 3],
                    weight: mode_weight,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MassModel::Sphere { radius, density } => {
                if !(*radius > 0.0 && *density > 0.0) {
                    return invalid("sphere radius and density must be positive");
                }
            }
            MassModel::Cuboid { dims, density } => {
                if !(dims.iter().all(|d| *d > 0.0) && *density > 0.0) {
                    return invalid("cuboid dimensions and density must be positive");
                }
            }
            MassModel::Composite { parts } => {
                if parts.is_empty() {
                    return invalid("composite mass model has no parts");
                }
                for p in parts {
                    if !(0.0..=1.0).contains(&p.weight) {
                        return invalid(format!("composite weight {} outside [0, 1]", p.weight));
                    }
                    if !p.offset.iter().all(|o| o.is_finite()) {
                        return invalid("composite offsets must be finite");
                    }
                    p.model.validate()?;
                }
            }
        }
        let m = self.mass();
        if !(m > 0.0 && m.is_finite()) {
            return invalid("total mass must be finite and positive");
        }
        Ok(())
    }

    /// Total mass, kg (weights scale the density of each part).
    pub fn mass(&self) -> f64 {
        match self {
            MassModel::Sphere { radius, density } => density * 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
            MassModel::Cuboid { dims, density } => density * dims[0] * dims[1] * dims[2],
            MassModel::Composite { parts } => parts.iter().map(|p| p.weight * p.model.mass()).sum(),
        }
    }

    /// Smallest geometric length, used to size the k-space cutoff.
    fn min_length(&self) -> f64 {
        match self {
            MassModel::Sphere { radius, .. } => *radius,
            MassModel::Cuboid { dims, .. } => dims.iter().copied().fold(f64::INFINITY, f64::min),
            MassModel::Composite { parts } => {
                parts.iter().map(|p| p.model.min_length()).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Largest phase-relevant extent, sets the oscillation scale in k.
    fn extent(&self) -> f64 {
        match self {
            MassModel::Sphere { radius, .. } => 2.0 * radius,
            MassModel::Cuboid { dims, .. } => dims.iter().copied().fold(0.0, f64::max),
            MassModel::Composite { parts } => parts
                .iter()
                .map(|p| p.model.extent() + 2.0 * norm(p.offset))
                .fold(0.0, f64::max),
        }
    }

    /// Stable identifier: first 16 hex digits of the SHA-256 of the JSON form.
    pub fn id(&self) -> String {
        let json = serde_json::to_vec(self).expect("mass model serialises");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    /// Complex Fourier transform `∫ mu(r) exp(-i k·r) d^3r`.
    pub fn form_factor(&self, k: [f64; 3]) -> Complex64 {
        match self {
            MassModel::Sphere { radius, .. } => Complex64::new(sphere_form_factor(norm(k), *radius, self.mass()), 0.0),
            MassModel::Cuboid { dims, .. } => Complex64::new(cuboid_form_factor(k, *dims, self.mass()), 0.0),
            MassModel::Composite { parts } => parts
                .iter()
                .map(|p| {
                    let phase = -(k[0] * p.offset[0] + k[1] * p.offset[1] + k[2] * p.offset[2]);
                    p.model.form_factor(k) * Complex64::from_polar(p.weight, phase)
                })
                .sum(),
        }
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `sin(x)/x` with the removable singularity handled by its series.
pub fn sinc<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax < T::lit(0.1) {
        let x2 = x * x;
        T::one() - x2 / T::lit(6.0) * (T::one() - x2 / T::lit(20.0) * (T::one() - x2 / T::lit(42.0)))
    } else {
        x.sin() / x
    }
}

/// Normalised sphere profile `3(sin x - x cos x)/x^3`.
fn sphere_profile<T: Real>(x: T) -> T {
    let ax = x.abs();
    if ax < T::lit(0.5) {
        // 3 Σ (-1)^n x^{2n} (2n+2)/(2n+3)!
        let x2 = x * x;
        let mut term = T::one();
        let mut sum = T::one();
        for n in 1..8 {
            let nf = T::lit(n as f64);
            term = -term * x2 / (T::lit(2.0) * nf * (T::lit(2.0) * nf + T::lit(3.0)));
            sum = sum + term;
        }
        sum
    } else {
        T::lit(3.0) * (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// Form factor of a homogeneous ball of radius `radius` and mass `mass`.
pub fn sphere_form_factor<T: Real>(k_mag: T, radius: T, mass: T) -> T {
    mass * sphere_profile(k_mag * radius)
}

/// Form factor of a homogeneous axis-aligned box, even in each component of `k`.
pub fn cuboid_form_factor<T: Real>(k: [T; 3], dims: [T; 3], mass: T) -> T {
    let half = T::lit(0.5);
    mass * sinc(k[0] * dims[0] * half) * sinc(k[1] * dims[1] * half) * sinc(k[2] * dims[2] * half)
}

/// How composite parts combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossTerms {
    /// Sum of the parts' self terms; appropriate for bodies separated by many r_C.
    Neglect,
    /// Full coherent sum through the 3D k-space quadrature.
    Include,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CslOptions {
    pub rel_tol: f64,
    /// Estimated relative error above which a result is reported as a failure.
    pub max_rel_error: f64,
    pub cross_terms: CrossTerms,
    /// Cutoff `k_max = factor / min(r_C, smallest body length)`.
    pub k_max_factor: f64,
    /// Gauss–Legendre order in cos(theta) for the 3D path (phi uses twice this).
    pub angular_order: usize,
}

impl Default for CslOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, max_rel_error: 1e-4, cross_terms: CrossTerms::Neglect, k_max_factor: 20.0, angular_order: 48 }
    }
}

/// Value of the k-space integral `I` with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CslIntegral {
    pub value: f64,
    pub abs_error: f64,
}

impl CslIntegral {
    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 { 0.0 } else { self.abs_error / self.value.abs() }
    }
}

/// `2 hbar^2 r_C^3 / (pi^{3/2} m0^2)`, the factor multiplying `lambda * I`.
pub fn csl_prefactor(r_c: f64) -> f64 {
    2.0 * HBAR * HBAR * r_c.powi(3) / (std::f64::consts::PI.powf(1.5) * M0 * M0)
}

fn check_axis(axis: [f64; 3]) -> Result<()> {
    let n = norm(axis);
    if !((n - 1.0).abs() <= 1e-9) {
        return invalid(format!("axis must be a unit vector, |axis| = {n}"));
    }
    Ok(())
}

fn segments(extent: f64, k_max: f64) -> usize {
    ((k_max * extent / std::f64::consts::PI).ceil() as usize + 4).min(1 << 19)
}

fn gaussian_tail(k_max: f64, r_c: f64, power: i32) -> f64 {
    // crude bound on ∫_{k_max}^∞ k^p e^{-k^2 r_c^2} dk
    let a = r_c * r_c;
    k_max.powi(power - 1) * (-a * k_max * k_max).exp() / (2.0 * a) * 2.0
}

fn sphere_integral(radius: f64, mass: f64, r_c: f64, opts: &CslOptions) -> CslIntegral {
    let k_max = opts.k_max_factor / r_c.min(radius);
    let a = r_c * r_c;
    let f = |k: f64| {
        let ff = sphere_form_factor(k, radius, mass);
        k.powi(4) * (-a * k * k).exp() * ff * ff
    };
    let breaks = uniform_breaks(0.0, k_max, segments(radius, k_max));
    let r = integrate(f, &breaks, QuadOptions { rel_tol: opts.rel_tol, abs_tol: 0.0, max_splits: 200_000 });
    let scale = 4.0 * std::f64::consts::PI / 3.0;
    let tail = mass * mass * gaussian_tail(k_max, r_c, 4);
    CslIntegral { value: scale * r.value, abs_error: scale * (r.abs_error + tail) }
}

/// `∫_{-∞}^{∞} k^p sinc^2(kL/2) e^{-k^2 r_c^2} dk` for p = 0 or 2.
fn box_axis_integral(len: f64, r_c: f64, power: i32, k_max: f64, opts: &CslOptions) -> CslIntegral {
    let a = r_c * r_c;
    let f = |k: f64| {
        let s = sinc(0.5 * k * len);
        k.powi(power) * s * s * (-a * k * k).exp()
    };
    let breaks = uniform_breaks(0.0, k_max, segments(len, k_max));
    let r = integrate(f, &breaks, QuadOptions { rel_tol: opts.rel_tol, abs_tol: 0.0, max_splits: 200_000 });
    let tail = gaussian_tail(k_max, r_c, power);
    CslIntegral { value: 2.0 * r.value, abs_error: 2.0 * (r.abs_error + tail) }
}

fn cuboid_integral(dims: [f64; 3], mass: f64, r_c: f64, axis: [f64; 3], opts: &CslOptions) -> CslIntegral {
    let k_max = opts.k_max_factor / r_c.min(dims.iter().copied().fold(f64::INFINITY, f64::min));
    let j0: Vec<CslIntegral> = dims.iter().map(|&l| box_axis_integral(l, r_c, 0, k_max, opts)).collect();
    let mut value = 0.0;
    let mut rel2 = 0.0_f64;
    for i in 0..3 {
        if axis[i] == 0.0 {
            continue;
        }
        let j2 = box_axis_integral(dims[i], r_c, 2, k_max, opts);
        let mut term = axis[i] * axis[i] * j2.value;
        let mut rel = j2.rel_error();
        for j in 0..3 {
            if j != i {
                term *= j0[j].value;
                rel += j0[j].rel_error();
            }
        }
        value += term;
        rel2 = rel2.max(rel);
    }
    let value = mass * mass * value;
    CslIntegral { value, abs_error: value.abs() * rel2 }
}

/// The k-space integral `I` for `model` along unit vector `axis`.
pub fn csl_integral(model: &MassModel, r_c: f64, axis: [f64; 3], opts: &CslOptions) -> Result<CslIntegral> {
    if !(r_c > 0.0) {
        return invalid("r_C must be positive");
    }
    check_axis(axis)?;
    let out = match model {
        MassModel::Sphere { radius, .. } => sphere_integral(*radius, model.mass(), r_c, opts),
        MassModel::Cuboid { dims, .. } => cuboid_integral(*dims, model.mass(), r_c, axis, opts),
        MassModel::Composite { parts } => match opts.cross_terms {
            CrossTerms::Include => csl_integral_3d(model, r_c, axis, opts),
            CrossTerms::Neglect => {
                let mut value = 0.0;
                let mut abs_error = 0.0;
                for p in parts {
                    let inner = csl_integral(&p.model, r_c, axis, opts)?;
                    let w2 = p.weight * p.weight;
                    value += w2 * inner.value;
                    abs_error += w2 * inner.abs_error;
                }
                CslIntegral { value, abs_error }
            }
        },
    };
    if !(out.value.is_finite()) || out.rel_error() > opts.max_rel_error {
        return Err(Error::Quadrature { rel_error: out.rel_error() });
    }
    Ok(out)
}

/// Full 3D quadrature of `I` in spherical k coordinates: adaptive in |k|,
/// Gauss–Legendre in cos(theta), trapezoidal in phi. Works for any model
/// and keeps every cross term of a composite.
pub fn csl_integral_3d(model: &MassModel, r_c: f64, axis: [f64; 3], opts: &CslOptions) -> CslIntegral {
    let n_theta = opts.angular_order.max(4);
    let n_phi = 2 * n_theta;
    let (ct, wt) = gauss_legendre(n_theta);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let dirs: Vec<([f64; 3], f64)> = ct
        .iter()
        .zip(&wt)
        .flat_map(|(&c, &w)| {
            let s = (1.0 - c * c).max(0.0).sqrt();
            (0..n_phi).map(move |j| {
                let phi = (j as f64 + 0.5) * dphi;
                ([s * phi.cos(), s * phi.sin(), c], w * dphi)
            })
        })
        .collect();
    let a = r_c * r_c;
    let f = |k: f64| {
        let ang: f64 = dirs
            .iter()
            .map(|(d, w)| {
                let proj = d[0] * axis[0] + d[1] * axis[1] + d[2] * axis[2];
                let mu = model.form_factor([k * d[0], k * d[1], k * d[2]]);
                w * proj * proj * mu.norm_sqr()
            })
            .sum();
        k.powi(4) * (-a * k * k).exp() * ang
    };
    let k_max = opts.k_max_factor / r_c.min(model.min_length());
    let breaks = uniform_breaks(0.0, k_max, segments(model.extent(), k_max).min(4096));
    let r = integrate(f, &breaks, QuadOptions { rel_tol: opts.rel_tol.max(1e-10), abs_tol: 0.0, max_splits: 20_000 });
    CslIntegral { value: r.value, abs_error: r.abs_error }
}

/// One-sided CSL force PSD, N²/Hz, together with its relative error estimate.
pub fn csl_force_psd_detailed(
    model: &MassModel,
    lambda: f64,
    r_c: f64,
    axis: [f64; 3],
    opts: &CslOptions,
) -> Result<(f64, f64)> {
    if !(lambda >= 0.0) {
        return invalid("lambda must be non-negative");
    }
    let i = csl_integral(model, r_c, axis, opts)?;
    Ok((csl_prefactor(r_c) * lambda * i.value, i.rel_error()))
}

pub fn csl_force_psd(model: &MassModel, lambda: f64, r_c: f64, axis: [f64; 3], opts: &CslOptions) -> Result<f64> {
    csl_force_psd_detailed(model, lambda, r_c, axis, opts).map(|(v, _)| v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionPoint {
    pub r_c_m: f64,
    /// `None` when the quadrature failed at this point.
    pub lambda_max_per_s: Option<f64>,
    pub rel_error: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExclusionCurve {
    pub points: Vec<ExclusionPoint>,
    pub s_f0_n2_per_hz: f64,
    pub mass_model_id: String,
    pub mass_model: MassModel,
    pub axis: [f64; 3],
    pub options: CslOptions,
}

impl ExclusionCurve {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.lambda_max_per_s.is_none()).count()
    }

    /// Largest relative deviation of `S_F(lambda_max, r_C)` from `s_f0`.
    pub fn verify(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for p in &self.points {
            if let Some(l) = p.lambda_max_per_s {
                let s = csl_force_psd(&self.mass_model, l, p.r_c_m, self.axis, &self.options)?;
                worst = worst.max((s / self.s_f0_n2_per_hz - 1.0).abs());
            }
        }
        Ok(worst)
    }

    /// `lambda_max` interpolated log-log at `r_c`.
    pub fn lambda_at(&self, r_c: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> =
            self.points.iter().filter_map(|p| p.lambda_max_per_s.map(|l| (p.r_c_m, l))).collect();
        if let Some(&(_, l)) = pts.iter().find(|(r, _)| (r / r_c - 1.0).abs() < 1e-12) {
            return Some(l);
        }
        let i = pts.iter().position(|(r, _)| *r > r_c)?;
        if i == 0 {
            return None;
        }
        let (r0, l0) = pts[i - 1];
        let (r1, l1) = pts[i];
        let s = (r_c.ln() - r0.ln()) / (r1.ln() - r0.ln());
        Some((l0.ln() + s * (l1.ln() - l0.ln())).exp())
    }
}

/// `n` log-spaced points over `[lo, hi]`; `n == 1` yields `[lo]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| if i == n - 1 { hi } else { 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64) })
        .collect()
}

pub fn default_rc_grid() -> Vec<f64> {
    log_grid(1e-8, 1e-4, 60)
}

pub fn exclusion_curve(
    s_f0: f64,
    model: &MassModel,
    rc_grid: &[f64],
    axis: [f64; 3],
    opts: &CslOptions,
) -> Result<ExclusionCurve> {
    if !(s_f0 > 0.0 && s_f0.is_finite()) {
        return invalid(format!("s_f0 must be positive, got {s_f0}"));
    }
    model.validate()?;
    check_axis(axis)?;
    if rc_grid.is_empty() {
        return invalid("r_C grid is empty");
    }
    for w in rc_grid.windows(2) {
        if !(w[1] > w[0]) {
            return invalid("r_C grid must be strictly increasing");
        }
    }
    if let Some(r) = rc_grid.iter().find(|r| !(**r >= 1e-8 * (1.0 - 1e-12) && **r <= 1e-4 * (1.0 + 1e-12))) {
        return invalid(format!("r_C = {r} m outside [1e-8, 1e-4] m"));
    }
    let points = rc_grid
        .par_iter()
        .map(|&r_c| match csl_force_psd_detailed(model, 1.0, r_c, axis, opts) {
            Ok((unit, rel)) => ExclusionPoint { r_c_m: r_c, lambda_max_per_s: Some(s_f0 / unit), rel_error: rel, failure: None },
            Err(e) => ExclusionPoint {
                r_c_m: r_c,
                lambda_max_per_s: None,
                rel_error: match e {
                    Error::Quadrature { rel_error } => rel_error,
                    _ => f64::NAN,
                },
                failure: Some(e.to_string()),
            },
        })
        .collect();
    Ok(ExclusionCurve {
        points,
        s_f0_n2_per_hz: s_f0,
        mass_model_id: model.id(),
        mass_model: model.clone(),
        axis,
        options: *opts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: [f64; 3] = [1.0, 0.0, 0.0];

    #[test]
    fn sphere_form_factor_at_zero_is_mass() {
        assert_eq!(sphere_form_factor(0.0, 1e-5, 3.0), 3.0);
        assert_eq!(sphere_form_factor(0.0f32, 1.0, 2.0), 2.0);
    }

    #[test]
    fn sphere_profile_series_matches_closed_form() {
        for &x in &[0.3f64, 0.45, 0.4999, 0.5001] {
            let direct = 3.0 * (x.sin() - x * x.cos()) / x.powi(3);
            assert!((sphere_profile(x) - direct).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn sphere_form_factor_vanishes_at_tan_root() {
        // first positive root of tan x = x, by Newton on sin x - x cos x
        let mut x = 4.5f64;
        for _ in 0..50 {
            let g = x.sin() - x * x.cos();
            let dg = x * x.sin();
            x -= g / dg;
        }
        assert!((x - 4.493_409_457_909_064).abs() < 1e-12);
        let r = 2e-6;
        assert!(sphere_form_factor(x / r, r, 1.0).abs() < 1e-14);
    }

    #[test]
    fn cuboid_form_factor_zeros_and_parity() {
        let dims = [2.0, 3.0, 5.0];
        assert_eq!(cuboid_form_factor([0.0; 3], dims, 7.0), 7.0);
        let kx = 2.0 * std::f64::consts::PI / dims[0];
        assert!(cuboid_form_factor([kx, 0.0, 0.0], dims, 7.0).abs() < 1e-15);
        let a = cuboid_form_factor([0.3, -1.1, 0.7], dims, 1.0);
        let b = cuboid_form_factor([-0.3, 1.1, -0.7], dims, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_lambda_gives_zero() {
        let s = csl_force_psd(&MassModel::default_sphere(), 0.0, 1e-7, X, &CslOptions::default()).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn non_unit_axis_rejected() {
        let e = csl_force_psd(&MassModel::default_sphere(), 1.0, 1e-7, [1.0, 1.0, 0.0], &CslOptions::default());
        assert!(matches!(e, Err(Error::Invalid(_))));
    }

    #[test]
    fn starved_quadrature_is_reported() {
        let opts = CslOptions { max_rel_error: 1e-30, ..Default::default() };
        let e = csl_force_psd(&MassModel::default_sphere(), 1.0, 1e-7, X, &opts);
        assert!(matches!(e, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn composite_weights_bounded() {
        let m = MassModel::Composite {
            parts: vec![Component { model: MassModel::default_sphere(), offset: [0.0; 3], weight: 1.5 }],
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn loaded_cantilever_mass() {
        let m = MassModel::loaded_cantilever(0.25);
        let sphere = 7430.0 * 4.0 / 3.0 * std::f64::consts::PI * 15.5e-6f64.powi(3);
        assert!((sphere - 1.1589e-10).abs() < 1e-13);
        let beam = 2330.0 * 2.5e-6 * 57e-6 * 450e-6;
        assert!((m.mass() - (sphere + 0.25 * beam)).abs() < 1e-22);
    }

    #[test]
    fn exclusion_rejects_bad_inputs() {
        let m = MassModel::default_sphere();
        let o = CslOptions::default();
        assert!(exclusion_curve(0.0, &m, &[1e-7], X, &o).is_err());
        assert!(exclusion_curve(1e-36, &m, &[1e-7, 1e-7], X, &o).is_err());
        assert!(exclusion_curve(1e-36, &m, &[1e-3], X, &o).is_err());
    }

    #[test]
    fn single_point_curve() {
        let m = MassModel::default_sphere();
        let o = CslOptions::default();
        let c = exclusion_curve(1.87e-36, &m, &[1e-7], X, &o).unwrap();
        assert_eq!(c.points.len(), 1);
        assert!(c.verify().unwrap() < 1e-6);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = default_rc_grid();
        assert_eq!(g.len(), 60);
        assert_eq!(g[0], 1e-8);
        assert_eq!(g[59], 1e-4);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sphere_form_factor_bounded(k in 0.0f64..1e8, r in 1e-7f64..1e-4, m in 1e-12f64..1e-6) {
                prop_assert!(sphere_form_factor(k, r, m).abs() <= m * (1.0 + 1e-12));
            }

            #[test]
            fn cuboid_form_factor_bounded(kx in -1e7f64..1e7, ky in -1e7f64..1e7, kz in -1e7f64..1e7,
                                          l in 1e-7f64..1e-4) {
                let dims = [l, 2.0 * l, 0.5 * l];
                prop_assert!(cuboid_form_factor([kx, ky, kz], dims, 1.0).abs() <= 1.0 + 1e-12);
            }
        }
    }
}

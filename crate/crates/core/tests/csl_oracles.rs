//! CSL force noise against closed forms, Monte Carlo and the 3D quadrature.

use cantilever_core::csl::{
    csl_force_psd, csl_integral, csl_integral_3d, csl_prefactor, Component, CrossTerms, CslOptions, MassModel,
};
use cantilever_core::physics::{HBAR, M0};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erf;
use std::f64::consts::PI;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn random_axis(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// Homogeneous sphere: S = hbar^2 lambda / r_C^2 (m/m0)^2 * 6/x^4 [1 - 2/x^2 + (1 + 2/x^2) e^{-x^2}], x = R/r_C.
fn sphere_closed_form(radius: f64, density: f64, r_c: f64) -> f64 {
    let m = density * 4.0 / 3.0 * PI * radius.powi(3);
    let x = radius / r_c;
    let x2 = x * x;
    let alpha = if x < 1.0 {
        // the bracket cancels to O(x^4); sum its Taylor series instead
        let (mut s, mut fact) = (0.0, 2.0);
        for j in 2..30 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let next = fact * (j + 1) as f64;
            s += sign * (1.0 / fact - 2.0 / next) * x2.powi(j - 2);
            fact = next;
        }
        6.0 * s
    } else {
        6.0 / (x2 * x2) * (1.0 - 2.0 / x2 + (1.0 + 2.0 / x2) * (-x2).exp())
    };
    HBAR * HBAR / (r_c * r_c) * (m / M0).powi(2) * alpha
}

// ∫ sinc^2(kL/2) e^{-a k^2} dk and ∫ k^2 sinc^2(kL/2) e^{-a k^2} dk over the real line.
fn box_j0(l: f64, a: f64) -> f64 {
    let b = l / 2.0;
    (PI * b * erf(b / a.sqrt()) - (PI * a).sqrt() * (1.0 - (-b * b / a).exp())) / (b * b)
}

fn box_j2(l: f64, a: f64) -> f64 {
    2.0 / (l * l) * (PI / a).sqrt() * (1.0 - (-l * l / (4.0 * a)).exp())
}

fn cuboid_closed_form_integral(dims: [f64; 3], density: f64, r_c: f64, axis: [f64; 3]) -> f64 {
    let m = density * dims[0] * dims[1] * dims[2];
    let a = r_c * r_c;
    let j0: Vec<f64> = dims.iter().map(|&l| box_j0(l, a)).collect();
    let j2: Vec<f64> = dims.iter().map(|&l| box_j2(l, a)).collect();
    let mut s = 0.0;
    for i in 0..3 {
        let mut t = axis[i] * axis[i] * j2[i];
        for j in 0..3 {
            if j != i {
                t *= j0[j];
            }
        }
        s += t;
    }
    m * m * s
}

#[test]
fn sphere_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = CslOptions::default();
    for _ in 0..8 {
        let radius = log_uniform(&mut rng, 1e-7, 3e-5);
        let r_c = log_uniform(&mut rng, 1e-8, 1e-4);
        let density = 1000.0 + 20000.0 * rng.random::<f64>();
        let model = MassModel::Sphere { radius, density };
        let got = csl_force_psd(&model, 1.0, r_c, [0.0, 0.0, 1.0], &opts).unwrap();
        let want = sphere_closed_form(radius, density, r_c);
        assert!(rel(got, want) < 1e-7, "R={radius:e} rc={r_c:e}: {got:e} vs {want:e}");
    }
}

#[test]
fn cuboid_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let opts = CslOptions::default();
    for _ in 0..8 {
        let dims = [log_uniform(&mut rng, 1e-7, 1e-5), log_uniform(&mut rng, 1e-6, 1e-4), log_uniform(&mut rng, 1e-6, 5e-4)];
        let r_c = log_uniform(&mut rng, 1e-8, 1e-4);
        let axis = random_axis(&mut rng);
        let model = MassModel::Cuboid { dims, density: 2330.0 };
        let got = csl_integral(&model, r_c, axis, &opts).unwrap().value;
        let want = cuboid_closed_form_integral(dims, 2330.0, r_c, axis);
        assert!(rel(got, want) < 1e-7, "dims={dims:?} rc={r_c:e}: {got:e} vs {want:e}");
    }
}

// I = (pi / r_C^2)^{3/2} E[(k.n)^2 |mu(k)|^2] with k drawn from the Gaussian
// e^{-k^2 r_C^2}. Returns the estimate and its standard error.
fn monte_carlo_integral(model: &MassModel, r_c: f64, axis: [f64; 3], n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = 1.0 / (2.0f64.sqrt() * r_c);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n {
        let k = [
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
        ];
        let p = k[0] * axis[0] + k[1] * axis[1] + k[2] * axis[2];
        let v = p * p * model.form_factor(k).norm_sqr();
        sum += v;
        sum2 += v * v;
    }
    let mean = sum / n as f64;
    let var = (sum2 / n as f64 - mean * mean).max(0.0);
    let z = (PI / (r_c * r_c)).powf(1.5);
    (z * mean, z * (var / n as f64).sqrt())
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    // r_C comparable to the body size keeps the sampling variance small
    // enough for 1e-3 at 1e7 draws.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let opts = CslOptions::default();
    let n = 10_000_000;
    for case in 0..10 {
        let (model, r_c) = if case % 2 == 0 {
            let radius = log_uniform(&mut rng, 1e-6, 2e-5);
            (MassModel::Sphere { radius, density: 7430.0 }, radius * log_uniform(&mut rng, 0.7, 2.0))
        } else {
            let base = log_uniform(&mut rng, 1e-6, 1e-5);
            let dims = [base, base * log_uniform(&mut rng, 1.0, 2.0), base * log_uniform(&mut rng, 1.0, 2.0)];
            (MassModel::Cuboid { dims, density: 2330.0 }, base * log_uniform(&mut rng, 0.7, 1.5))
        };
        let axis = random_axis(&mut rng);
        let quad = csl_integral(&model, r_c, axis, &opts).unwrap().value;
        let (mc, err) = monte_carlo_integral(&model, r_c, axis, n, 100 + case);
        let d = rel(mc, quad);
        assert!(d < 1e-3, "case {case}: mc {mc:e} ± {err:e}, quadrature {quad:e}");
        assert!((mc - quad).abs() < 5.0 * err, "case {case}: {:.1} standard errors", (mc - quad).abs() / err);
    }
}

#[test]
fn three_dimensional_quadrature_agrees() {
    let opts = CslOptions::default();
    let axis = [0.6, 0.0, 0.8];
    let sphere = MassModel::Sphere { radius: 2e-6, density: 7430.0 };
    for r_c in [2e-7, 1e-6, 5e-6] {
        let a = csl_integral(&sphere, r_c, axis, &opts).unwrap().value;
        let b = csl_integral_3d(&sphere, r_c, axis, &opts).value;
        assert!(rel(b, a) < 1e-6, "sphere rc={r_c:e}: {b:e} vs {a:e}");
    }
    let cuboid = MassModel::Cuboid { dims: [1e-6, 2e-6, 3e-6], density: 2330.0 };
    for r_c in [5e-7, 1e-6, 4e-6] {
        let a = csl_integral(&cuboid, r_c, axis, &opts).unwrap().value;
        let b = csl_integral_3d(&cuboid, r_c, axis, &opts).value;
        assert!(rel(b, a) < 1e-5, "cuboid rc={r_c:e}: {b:e} vs {a:e}");
    }
}

#[test]
fn sphere_is_isotropic() {
    let opts = CslOptions::default();
    let sphere = MassModel::Sphere { radius: 3e-6, density: 5000.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let reference = csl_integral(&sphere, 1e-6, [1.0, 0.0, 0.0], &opts).unwrap().value;
    for _ in 0..4 {
        let v = csl_integral_3d(&sphere, 1e-6, random_axis(&mut rng), &opts).value;
        assert!(rel(v, reference) < 1e-6);
    }
}

fn two_spheres(separation: f64, w: [f64; 2]) -> MassModel {
    let s = MassModel::Sphere { radius: 1e-6, density: 7430.0 };
    MassModel::Composite {
        parts: vec![
            Component { model: s.clone(), offset: [0.0; 3], weight: w[0] },
            Component { model: s, offset: [separation, 0.0, 0.0], weight: w[1] },
        ],
    }
}

#[test]
fn cross_terms_vanish_for_distant_parts() {
    // The cross term is the density autocorrelation smeared by r_C, so it
    // dies once the gap exceeds a few r_C.
    let r_c = 2e-7;
    let model = two_spheres(2e-6 + 12.0 * r_c, [1.0, 0.5]);
    let neglect = CslOptions::default();
    let include = CslOptions { cross_terms: CrossTerms::Include, ..neglect };
    for axis in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] {
        let a = csl_integral(&model, r_c, axis, &neglect).unwrap().value;
        let b = csl_integral(&model, r_c, axis, &include).unwrap().value;
        assert!(rel(b, a) < 1e-5, "{b:e} vs {a:e}");
    }
}

#[test]
fn coincident_parts_add_coherently() {
    let r_c = 1e-6;
    let single = MassModel::Sphere { radius: 1e-6, density: 7430.0 };
    let model = two_spheres(0.0, [0.7, 0.3]);
    let opts = CslOptions::default();
    let i1 = csl_integral(&single, r_c, [0.0, 0.0, 1.0], &opts).unwrap().value;
    let neglect = csl_integral(&model, r_c, [0.0, 0.0, 1.0], &opts).unwrap().value;
    let include =
        csl_integral(&model, r_c, [0.0, 0.0, 1.0], &CslOptions { cross_terms: CrossTerms::Include, ..opts }).unwrap().value;
    assert!(rel(neglect, (0.49 + 0.09) * i1) < 1e-9);
    assert!(rel(include, i1) < 1e-6);
}

#[test]
fn force_noise_is_linear_in_rate() {
    let model = MassModel::loaded_cantilever(0.25);
    let opts = CslOptions::default();
    let one = csl_force_psd(&model, 1.0, 1e-7, [1.0, 0.0, 0.0], &opts).unwrap();
    for lambda in [1e-17, 1e-8, 3.0, 1e4] {
        let v = csl_force_psd(&model, lambda, 1e-7, [1.0, 0.0, 0.0], &opts).unwrap();
        assert!(rel(v, lambda * one) < 1e-14);
    }
    assert_eq!(csl_force_psd(&model, 0.0, 1e-7, [1.0, 0.0, 0.0], &opts).unwrap(), 0.0);
    assert!(csl_prefactor(1e-7) > 0.0);
}

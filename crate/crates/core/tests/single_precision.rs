//! The scalar-generic kernels run in f32 and track their f64 results.

use cantilever_core::csl::{cuboid_form_factor, sphere_form_factor};
use cantilever_core::dynamics::apparent_q;
use cantilever_core::fit::{orthogonal_linear_fit, weighted_least_squares};
use cantilever_core::model::template_basis;
use cantilever_core::{FluxTemplate32, FluxTemplate64, LineFit32, XyPoint32, XyPoint64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn template_in_single_precision() {
    // Amplitudes in Φ0²/Hz sit comfortably inside the f32 range.
    // Both sides see the same f32-representable inputs, so only the
    // arithmetic differs.
    let t32 = FluxTemplate32 { a: 3.1e-13, b: 2.4e-15, c: 1.6e-15, f0: 8174.01, f1: 8175.11, qa: 3.0e5 };
    let w = |v: f32| v as f64;
    let t64 = FluxTemplate64 { a: w(t32.a), b: w(t32.b), c: w(t32.c), f0: w(t32.f0), f1: w(t32.f1), qa: w(t32.qa) };
    for df in [-60.0f32, -1.0, -0.02, 0.0, 0.013, 0.5, 1.1, 40.0] {
        let f = t32.f0 + df;
        let a = t64.eval(f as f64);
        let b = t32.eval(f) as f64;
        assert!(rel(b, a) < 1e-5, "df {df}: {b:e} vs {a:e}");
        let g32 = template_basis(t32.f0, t32.f1, t32.qa, f);
        let g64 = template_basis(t64.f0, t64.f1, t64.qa, f as f64);
        assert!(rel(g32[2] as f64, g64[2]) < 1e-5);
    }
}

#[test]
fn line_fits_in_single_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let p64: Vec<XyPoint64> = (0..10)
        .map(|i| {
            let x = 1e-6 * (1.0 + i as f64);
            XyPoint64 { x, y: 1.27 + 2.9e6 * x + 0.05 * rng.random_range(-1.0..1.0), sigma_x: 2e-8, sigma_y: 0.05 }
        })
        .collect();
    let p32: Vec<XyPoint32> = p64
        .iter()
        .map(|p| XyPoint32 { x: p.x as f32, y: p.y as f32, sigma_x: p.sigma_x as f32, sigma_y: p.sigma_y as f32 })
        .collect();
    let a = orthogonal_linear_fit(&p64).unwrap();
    let b: LineFit32 = orthogonal_linear_fit(&p32).unwrap();
    assert!(rel(b.slope as f64, a.slope) < 1e-4);
    assert!(rel(b.intercept as f64, a.intercept) < 1e-4);
    assert!(rel(b.sigma_slope as f64, a.sigma_slope) < 1e-3);
    assert!((b.chi2 as f64 - a.chi2).abs() < 1e-3 * (1.0 + a.chi2));

    let x: Vec<f32> = p32.iter().map(|p| p.x).collect();
    let y: Vec<f32> = p32.iter().map(|p| p.y).collect();
    let s: Vec<f32> = p32.iter().map(|p| p.sigma_y).collect();
    let w = weighted_least_squares(&x, &y, &s).unwrap();
    let x64: Vec<f64> = p64.iter().map(|p| p.x).collect();
    let y64: Vec<f64> = p64.iter().map(|p| p.y).collect();
    let s64: Vec<f64> = p64.iter().map(|p| p.sigma_y).collect();
    let w64 = weighted_least_squares(&x64, &y64, &s64).unwrap();
    assert!(rel(w.slope as f64, w64.slope) < 1e-4);
    assert!(rel(w.sigma_intercept as f64, w64.sigma_intercept) < 1e-4);
}

#[test]
fn form_factors_and_apparent_q_in_single_precision() {
    for k in [1e3f64, 1e5, 3e5, 1e6] {
        let a = sphere_form_factor(k, 15.5e-6, 1.15e-10);
        let b = sphere_form_factor(k as f32, 15.5e-6, 1.15e-10) as f64;
        assert!((b - a).abs() < 1e-4 * 1.15e-10, "k {k}");
        let c = cuboid_form_factor([k, 0.3 * k, 0.1 * k], [450e-6, 57e-6, 2.5e-6], 1.5e-10);
        let d = cuboid_form_factor([k as f32, 0.3 * k as f32, 0.1 * k as f32], [450e-6, 57e-6, 2.5e-6], 1.5e-10) as f64;
        assert!((d - c).abs() < 1e-4 * 1.5e-10, "k {k}");
    }
    let q64 = apparent_q(3.2e5f64, 0.02, 3333.3).unwrap();
    let q32 = apparent_q(3.2e5f32, 0.02, 3333.3).unwrap();
    assert!(rel(q32 as f64, q64) < 1e-6);
}

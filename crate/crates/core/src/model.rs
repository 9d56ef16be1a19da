//! Flux-noise template around the mechanical resonance.
//!
//! ```text
//! S(f) = A + [B f0^4 + C (f^2 - f1^2)^2] / [(f^2 - f0^2)^2 + (f f0 / Q_a)^2]
//! ```
//!
//! The template is linear in (A, B, C) once f0, f1 and Q_a are fixed.
//! Units are whatever the caller uses for the PSD; frequencies in Hz.

use serde::{Deserialize, Serialize};

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxTemplate<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub f0: T,
    pub f1: T,
    pub qa: T,
}

/// Coefficients of (A, B, C) at frequency `f`.
///
/// Differences of squares are formed as products so that f32 keeps its
/// precision a fraction of a hertz from the resonance.
pub fn template_basis<T: Real>(f0: T, f1: T, qa: T, f: T) -> [T; 3] {
    let d0 = (f - f0) * (f + f0);
    let d1 = (f - f1) * (f + f1);
    let w = f * f0 / qa;
    let den = d0 * d0 + w * w;
    let f02 = f0 * f0;
    [T::one(), f02 * f02 / den, d1 * d1 / den]
}

impl<T: Real> FluxTemplate<T> {
    pub fn basis(&self, f: T) -> [T; 3] {
        template_basis(self.f0, self.f1, self.qa, f)
    }

    pub fn eval(&self, f: T) -> T {
        let [g0, g1, g2] = self.basis(f);
        self.a * g0 + self.b * g1 + self.c * g2
    }

    /// Lorentzian part alone, `B f0^4 / den`.
    pub fn resonant(&self, f: T) -> T {
        self.b * self.basis(f)[1]
    }

    /// Value approached far above the resonance.
    pub fn high_frequency_limit(&self) -> T {
        self.a + self.c
    }
}

//! Thermomechanical noise analysis for a SQUID-read cantilever, and the
//! collapse-model force-noise bound that follows from it.
//!
//! Numerical kernels are generic over [`num::Real`] (f32 or f64). Anything
//! that touches SI constants directly stays in f64, because products like
//! `hbar^2` sit far below the f32 range.

pub mod budget;
pub mod config;
pub mod csl;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod io;
pub mod model;
pub mod num;
pub mod physics;
pub mod pipeline;
pub mod quad;
pub mod spectral;
pub mod spectrum;

pub use error::{Error, Result};

pub type FluxTemplate64 = model::FluxTemplate<f64>;
pub type FluxTemplate32 = model::FluxTemplate<f32>;
pub type LineFit64 = fit::LineFit<f64>;
pub type LineFit32 = fit::LineFit<f32>;
pub type XyPoint64 = fit::XyPoint<f64>;
pub type XyPoint32 = fit::XyPoint<f32>;

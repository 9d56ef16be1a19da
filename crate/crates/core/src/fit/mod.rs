//! Statistical estimation: template fits, χ² gates, straight lines,
//! Q extrapolation, the offset scan and ringdown analysis.

pub mod chi2;
pub mod line;
pub mod lm;
pub mod lorentz;
pub mod offset;
pub mod qgain;
pub mod ringdown;

pub use chi2::{chi2_gate, homogeneity, student_t_factor, Chi2Gate, Homogeneity};
pub use line::{orthogonal_linear_fit, weighted_least_squares, LineFit, LineMethod, XyPoint};
pub use lorentz::{fit_lorentzian, recompute_chi2, FixedParams, LorentzFit, LorentzOptions, Weighting};
pub use offset::{offset_scan, NoisePoint, OffsetScan, OffsetScanOptions};
pub use qgain::{fit_q_vs_gain, GainPoint, QGainFit};
pub use ringdown::{estimate_qa_ringdown, RingdownEstimate};

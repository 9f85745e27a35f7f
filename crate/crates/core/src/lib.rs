//! Dephasing of a two-level system under trains of π pulses.
//!
//! The crate evaluates the Gaussian (second-cumulant) decay of the echo
//! intensity for a two-level system whose splitting is modulated by a
//! stationary reservoir, and for an arbitrary sequence of π pulses.
//!
//! * [`models`]: reservoir correlation functions and power spectra.
//! * [`cumulant`]: the second cumulant `S(t)` computed from a model.
//! * [`pulse`]: pulse trains and the log-intensity series built from `S`.
//! * [`analysis`]: decay fits, sweeps over pulse spacing and peak finding.

// Negated comparisons are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cumulant;
pub mod error;
pub mod models;
pub mod pulse;
pub mod quad;

pub use error::{Error, Result};
pub use models::{
    CaldeiraLeggettDensity, CorrelationModel, ExponentialCorrelation, GaussianCouplingDensity,
    LinearSpinBoson, QuadraticSpinBoson, ReservoirModel, SpectrumGrid, ThermalConfig, Units,
};
pub use quad::QuadratureConfig;

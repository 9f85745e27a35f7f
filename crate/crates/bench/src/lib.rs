//! Shared fixtures for the benchmarks.

use pulsedephase::{
    ExponentialCorrelation, GaussianCouplingDensity, QuadraticSpinBoson, QuadratureConfig,
    ThermalConfig,
};

/// `τc = 0.02` in T2 units.
pub fn exponential() -> ExponentialCorrelation {
    ExponentialCorrelation::t2_normalized(0.02).expect("valid parameters")
}

/// Three-peak quadratic reservoir at `β̃ = 1`.
pub fn quadratic() -> QuadraticSpinBoson {
    QuadraticSpinBoson {
        density: GaussianCouplingDensity::from_strength(0.025, 0.4).expect("valid parameters"),
        thermal: ThermalConfig::new(1.0).expect("valid parameters"),
        quad: QuadratureConfig::default(),
    }
}

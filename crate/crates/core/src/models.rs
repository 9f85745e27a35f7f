//! Reservoir models: correlation functions, coupling densities and power
//! spectra.
//!
//! Frequencies and times are dimensionless throughout. The exponential model
//! is usually expressed in units where `T2 = 1`; the boson models in units of
//! a reference frequency (`ωp` for the Gaussian density), so that
//! `beta = ħωp / kBT`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_refined, QuadratureConfig};

/// Half-width of the Gaussian coupling density's integration domain, in units
/// of `gamma_p`. `exp(-64)` is far below double precision.
pub const GAUSSIAN_SPAN: f64 = 8.0;

/// Upper frequency of Caldeira–Leggett integrals, in units of `omega_c`.
pub const CALDEIRA_LEGGETT_SPAN: f64 = 60.0;

/// Which normalization the dimensionless numbers refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Times in units of the free dephasing time `T2`.
    T2,
    /// Frequencies in units of `ωp`, times in units of `1/ωp`.
    OmegaP,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::T2 => "t2",
            Units::OmegaP => "omega_p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalConfig {
    /// Dimensionless inverse temperature `ħωp / kBT`.
    pub beta: f64,
}

impl ThermalConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::param("beta", "must be finite and positive"));
        }
        Ok(Self { beta })
    }
}

/// Bose–Einstein occupation `1/(exp(βω) − 1)`.
pub fn bose_occupation(omega: f64, thermal: &ThermalConfig) -> Result<f64> {
    if omega == 0.0 {
        return Err(Error::domain("bose_occupation", "pole at omega = 0"));
    }
    Ok(1.0 / (thermal.beta * omega).exp_m1())
}

/// `x·n(x) = x / (exp(βx) − 1)`, continuous through `x = 0` where it equals
/// `1/β`. Note `x·(n(x) + 1) = occupation_weight(−x)`.
#[inline]
pub fn occupation_weight(x: f64, beta: f64) -> f64 {
    let y = beta * x;
    if y.abs() < 1e-6 {
        (1.0 - 0.5 * y + y * y / 12.0) / beta
    } else {
        x / y.exp_m1()
    }
}

// ---------------------------------------------------------------------------
// Exponentially decaying correlation

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialCorrelation {
    /// Interaction strength Δ.
    pub delta: f64,
    /// Correlation time τc.
    pub tau_c: f64,
}

impl ExponentialCorrelation {
    pub fn new(delta: f64, tau_c: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::param("delta", "must be finite and non-negative"));
        }
        if !(tau_c.is_finite() && tau_c > 0.0) {
            return Err(Error::param("tau_c", "must be finite and positive"));
        }
        Ok(Self { delta, tau_c })
    }

    /// The model in units where `T2 = (Δ²τc)⁻¹ = 1`.
    pub fn t2_normalized(tau_c: f64) -> Result<Self> {
        if !(tau_c.is_finite() && tau_c > 0.0) {
            return Err(Error::param("tau_c", "must be finite and positive"));
        }
        Self::new((1.0 / tau_c).sqrt(), tau_c)
    }

    /// Free dephasing time `(Δ²τc)⁻¹`; infinite without coupling.
    pub fn t2(&self) -> f64 {
        1.0 / (self.delta * self.delta * self.tau_c)
    }

    pub fn correlation(&self, t: f64) -> f64 {
        exp_correlation(t, self)
    }

    pub fn spectrum(&self, omega: f64) -> f64 {
        exp_spectrum(omega, self)
    }
}

/// `Δ² exp(−|t|/τc)`.
pub fn exp_correlation(t: f64, model: &ExponentialCorrelation) -> f64 {
    model.delta * model.delta * (-t.abs() / model.tau_c).exp()
}

/// Lorentzian `2Δ²τc / (1 + ω²τc²)`.
pub fn exp_spectrum(omega: f64, model: &ExponentialCorrelation) -> f64 {
    let x = omega * model.tau_c;
    2.0 * model.delta * model.delta * model.tau_c / (1.0 + x * x)
}

// ---------------------------------------------------------------------------
// Quadratically coupled boson reservoir

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCouplingDensity {
    /// Overall coupling scale; `S_Q = s²`.
    pub s: f64,
    /// Mean frequency ωp.
    pub omega_p: f64,
    /// Width γp.
    pub gamma_p: f64,
}

impl GaussianCouplingDensity {
    pub fn new(s: f64, omega_p: f64, gamma_p: f64) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::param("s", "must be finite and non-negative"));
        }
        if !(omega_p.is_finite() && omega_p > 0.0) {
            return Err(Error::param("omega_p", "must be finite and positive"));
        }
        if !(gamma_p.is_finite() && gamma_p > 0.0) {
            return Err(Error::param("gamma_p", "must be finite and positive"));
        }
        Ok(Self {
            s,
            omega_p,
            gamma_p,
        })
    }

    /// Density in `ωp` units from `S_Q = s²` and the reduced width.
    pub fn from_strength(s_q: f64, gamma_p: f64) -> Result<Self> {
        if !(s_q.is_finite() && s_q >= 0.0) {
            return Err(Error::param("s_q", "must be finite and non-negative"));
        }
        Self::new(s_q.sqrt(), 1.0, gamma_p)
    }

    pub fn density(&self, e: f64) -> f64 {
        gaussian_density(e, self)
    }

    /// Interval holding all of the density's weight.
    pub fn support(&self) -> (f64, f64) {
        (
            self.omega_p - GAUSSIAN_SPAN * self.gamma_p,
            self.omega_p + GAUSSIAN_SPAN * self.gamma_p,
        )
    }
}

/// `h(e) = s/(√π γp) · exp(−(e − ωp)²/γp²)`, also at negative `e`.
pub fn gaussian_density(e: f64, g: &GaussianCouplingDensity) -> f64 {
    let x = (e - g.omega_p) / g.gamma_p;
    g.s / (PI.sqrt() * g.gamma_p) * (-x * x).exp()
}

/// Power spectrum of the quadratic coupling.
///
/// The three terms are two-boson emission, simultaneous absorption and
/// emission, and two-boson absorption. They are written with
/// `g(x) = x·n(x)`, which removes the removable poles of the occupation
/// numbers at `e = 0` and `e = ω`.
pub fn quadratic_spectrum(
    omega: f64,
    g: &GaussianCouplingDensity,
    thermal: &ThermalConfig,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if g.s == 0.0 {
        return Ok(0.0);
    }
    let beta = thermal.beta;
    let (lo, hi) = g.support();
    let integrand = |e: f64| {
        let he = gaussian_density(e, g);
        let emit_e = occupation_weight(-e, beta);
        let pair = occupation_weight(e - omega, beta);
        let emission = emit_e * pair * gaussian_density(omega - e, g);
        let exchange = 2.0 * emit_e * pair * gaussian_density(e - omega, g);
        let absorption = occupation_weight(e, beta)
            * occupation_weight(-omega - e, beta)
            * gaussian_density(-omega - e, g);
        he * (emission + exchange + absorption)
    };
    let v = integrate_refined("quadratic_spectrum", integrand, lo, hi, quad)?;
    Ok(2.0 * PI * v)
}

/// `⟨B(t)B(0)⟩` for the quadratic coupling.
///
/// The double integral over `(e, e′)` separates because the coupling weight
/// is `h(e)h(e′)`: with `A(t) = ∫h(e)·e(n(e)+1)·exp(−iet)` and
/// `B(t) = ∫h(e)·e·n(e)·exp(iet)` the three terms are `A², 2AB, B²`.
pub fn quadratic_correlation(
    t: f64,
    g: &GaussianCouplingDensity,
    thermal: &ThermalConfig,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    if g.s == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let beta = thermal.beta;
    let (lo, hi) = g.support();
    let panels = quad
        .panel_count
        .max(((hi - lo) * t.abs() / 2.0).ceil() as usize);
    let cfg = QuadratureConfig {
        panel_count: panels,
        ..*quad
    };
    let integrand = |e: f64| {
        let he = gaussian_density(e, g);
        let phase = Complex64::new(0.0, e * t).exp();
        phase.conj() * (he * occupation_weight(-e, beta))
            + phase * (he * occupation_weight(e, beta))
    };
    let amp = integrate_refined("quadratic_correlation", integrand, lo, hi, &cfg)?;
    Ok(amp * amp)
}

// ---------------------------------------------------------------------------
// Linearly coupled boson reservoir

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaldeiraLeggettDensity {
    pub alpha: f64,
    /// Ohmicity exponent: 1 is ohmic, 2 and above superohmic.
    pub n: u32,
    pub omega_c: f64,
}

impl CaldeiraLeggettDensity {
    pub fn new(alpha: f64, n: u32, omega_c: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::param("alpha", "must be finite and non-negative"));
        }
        if n < 1 {
            return Err(Error::param("n", "ohmicity exponent must be at least 1"));
        }
        if !(omega_c.is_finite() && omega_c > 0.0) {
            return Err(Error::param("omega_c", "must be finite and positive"));
        }
        Ok(Self { alpha, n, omega_c })
    }

    /// `I(ω) = α ωⁿ exp(−ω/ωc)` for `ω ≥ 0`, zero below.
    pub fn coupling(&self, omega: f64) -> f64 {
        if omega < 0.0 {
            return 0.0;
        }
        self.alpha * omega.powi(self.n as i32) * (-omega / self.omega_c).exp()
    }

    /// `I(ω)/ω`, finite at the origin.
    fn coupling_over_omega(&self, omega: f64) -> f64 {
        self.alpha * omega.powi(self.n as i32 - 1) * (-omega / self.omega_c).exp()
    }

    /// `I(ω)(2n(ω) + 1)` for `ω ≥ 0`; the ohmic limit at zero is `2α/β`.
    pub(crate) fn thermal_weight(&self, omega: f64, beta: f64) -> f64 {
        self.coupling_over_omega(omega) * (2.0 * occupation_weight(omega, beta) + omega)
    }

    pub fn cutoff(&self) -> f64 {
        CALDEIRA_LEGGETT_SPAN * self.omega_c
    }
}

/// `J(ω) = 2π{I(ω)(n(ω)+1)θ(ω) + I(−ω)n(−ω)θ(−ω)}`, with the one-sided limit
/// at `ω = 0` (`2πα/β` for ohmic, zero otherwise).
pub fn linear_spectrum(omega: f64, d: &CaldeiraLeggettDensity, thermal: &ThermalConfig) -> f64 {
    let beta = thermal.beta;
    if omega > 0.0 {
        2.0 * PI * d.coupling_over_omega(omega) * occupation_weight(-omega, beta)
    } else if omega < 0.0 {
        2.0 * PI * d.coupling_over_omega(-omega) * occupation_weight(-omega, beta)
    } else if d.n == 1 {
        2.0 * PI * d.alpha / beta
    } else {
        0.0
    }
}

/// `⟨B(t)B(0)⟩ = ∫I(ω){(n+1)e^{−iωt} + n e^{iωt}} dω` for the linear coupling.
pub fn linear_correlation(
    t: f64,
    d: &CaldeiraLeggettDensity,
    thermal: &ThermalConfig,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    if d.alpha == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let beta = thermal.beta;
    let hi = d.cutoff();
    let cfg = QuadratureConfig {
        panel_count: quad.panel_count.max((hi * t.abs() / 2.0).ceil() as usize),
        ..*quad
    };
    let integrand = |w: f64| {
        let (s, c) = (w * t).sin_cos();
        Complex64::new(d.thermal_weight(w, beta) * c, -d.coupling(w) * s)
    };
    integrate_refined("linear_correlation", integrand, 0.0, hi, &cfg)
}

// ---------------------------------------------------------------------------
// Sampled spectra

/// A power spectrum sampled on an increasing frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    omegas: Vec<f64>,
    values: Vec<f64>,
}

impl SpectrumGrid {
    /// Tolerated negative excursion from quadrature noise.
    pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

    pub fn new(omegas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if omegas.len() != values.len() {
            return Err(Error::param("values", "length differs from omegas"));
        }
        if omegas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("omegas", "must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "must be finite"));
        }
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if values
            .iter()
            .any(|&v| v < -Self::NEGATIVE_TOLERANCE * scale.max(1.0))
        {
            return Err(Error::param(
                "values",
                "spectrum is negative beyond quadrature noise",
            ));
        }
        Ok(Self { omegas, values })
    }

    /// Samples `spectrum` on `omegas` in parallel.
    pub fn sample(omegas: Vec<f64>, spectrum: impl Fn(f64) -> Result<f64> + Sync) -> Result<Self> {
        use rayon::prelude::*;
        let values = omegas
            .par_iter()
            .map(|&w| spectrum(w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(omegas, values)
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Model catalog

/// A stationary reservoir described by its correlation function and spectrum.
pub trait CorrelationModel: Send + Sync {
    /// `⟨B(t)B(0)⟩`.
    fn correlation(&self, t: f64) -> Result<Complex64>;

    /// `J(ω) = ∫dt e^{iωt}⟨B(t)B(0)⟩`.
    fn spectrum(&self, omega: f64) -> Result<f64>;

    /// Frequency bounding the structured part of `J`.
    fn frequency_cutoff(&self) -> f64;

    /// Whether `J` is negligible beyond [`frequency_cutoff`](Self::frequency_cutoff).
    fn compact_spectrum(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpinBoson {
    pub density: GaussianCouplingDensity,
    pub thermal: ThermalConfig,
    pub quad: QuadratureConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSpinBoson {
    pub density: CaldeiraLeggettDensity,
    pub thermal: ThermalConfig,
    pub quad: QuadratureConfig,
}

impl CorrelationModel for ExponentialCorrelation {
    fn correlation(&self, t: f64) -> Result<Complex64> {
        Ok(Complex64::new(exp_correlation(t, self), 0.0))
    }

    fn spectrum(&self, omega: f64) -> Result<f64> {
        Ok(exp_spectrum(omega, self))
    }

    fn frequency_cutoff(&self) -> f64 {
        200.0 / self.tau_c
    }

    fn compact_spectrum(&self) -> bool {
        false
    }
}

impl CorrelationModel for QuadraticSpinBoson {
    fn correlation(&self, t: f64) -> Result<Complex64> {
        quadratic_correlation(t, &self.density, &self.thermal, &self.quad)
    }

    fn spectrum(&self, omega: f64) -> Result<f64> {
        quadratic_spectrum(omega, &self.density, &self.thermal, &self.quad)
    }

    fn frequency_cutoff(&self) -> f64 {
        // Sum of two frequencies drawn from the density's support.
        2.0 * self.density.support().1
    }

    fn compact_spectrum(&self) -> bool {
        true
    }
}

impl CorrelationModel for LinearSpinBoson {
    fn correlation(&self, t: f64) -> Result<Complex64> {
        linear_correlation(t, &self.density, &self.thermal, &self.quad)
    }

    fn spectrum(&self, omega: f64) -> Result<f64> {
        Ok(linear_spectrum(omega, &self.density, &self.thermal))
    }

    fn frequency_cutoff(&self) -> f64 {
        self.density.cutoff()
    }

    fn compact_spectrum(&self) -> bool {
        true
    }
}

/// The reservoir models known to the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReservoirModel {
    Exponential(ExponentialCorrelation),
    Quadratic(QuadraticSpinBoson),
    Linear(LinearSpinBoson),
}

impl ReservoirModel {
    pub fn name(&self) -> &'static str {
        match self {
            ReservoirModel::Exponential(_) => "exponential",
            ReservoirModel::Quadratic(_) => "quadratic",
            ReservoirModel::Linear(_) => "linear",
        }
    }

    fn inner(&self) -> &dyn CorrelationModel {
        match self {
            ReservoirModel::Exponential(m) => m,
            ReservoirModel::Quadratic(m) => m,
            ReservoirModel::Linear(m) => m,
        }
    }
}

impl CorrelationModel for ReservoirModel {
    fn correlation(&self, t: f64) -> Result<Complex64> {
        self.inner().correlation(t)
    }

    fn spectrum(&self, omega: f64) -> Result<f64> {
        self.inner().spectrum(omega)
    }

    fn frequency_cutoff(&self) -> f64 {
        self.inner().frequency_cutoff()
    }

    fn compact_spectrum(&self) -> bool {
        self.inner().compact_spectrum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_quadratic() -> (GaussianCouplingDensity, ThermalConfig, QuadratureConfig) {
        (
            GaussianCouplingDensity::from_strength(1.0 / 40.0, 0.4).unwrap(),
            ThermalConfig::new(1.0).unwrap(),
            QuadratureConfig::default(),
        )
    }

    #[test]
    fn occupation_values() {
        let th = ThermalConfig::new(1.0).unwrap();
        let e = std::f64::consts::E;
        assert_relative_eq!(
            bose_occupation(1.0, &th).unwrap(),
            1.0 / (e - 1.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(bose_occupation(1.0, &th).unwrap(), 0.58198, epsilon = 1e-5);
        assert!(bose_occupation(800.0, &th).unwrap() < 1e-300);
        let n = bose_occupation(0.7, &th).unwrap();
        let m = bose_occupation(-0.7, &th).unwrap();
        assert!((n + m + 1.0).abs() < 1e-12);
        assert!(matches!(
            bose_occupation(0.0, &th),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn occupation_weight_is_continuous_at_zero() {
        for beta in [0.3, 1.0, 4.0] {
            let at0 = occupation_weight(0.0, beta);
            assert_relative_eq!(at0, 1.0 / beta, epsilon = 1e-15);
            for x in [1e-7, -1e-7, 2e-6, -2e-6] {
                let direct = x / (beta * x).exp_m1();
                assert_relative_eq!(occupation_weight(x, beta), direct, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn exponential_correlation_values() {
        let m = ExponentialCorrelation::new(2.0, 1.0).unwrap();
        assert_eq!(exp_correlation(0.0, &m), 4.0);
        let m = ExponentialCorrelation::new(1.0, 1.0).unwrap();
        assert_relative_eq!(exp_correlation(1.0, &m), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(exp_correlation(-1.0, &m), exp_correlation(1.0, &m));
        assert!(ExponentialCorrelation::new(-1.0, 1.0).is_err());
        assert!(ExponentialCorrelation::new(1.0, 0.0).is_err());
    }

    #[test]
    fn lorentzian_values() {
        let m = ExponentialCorrelation::new(1.0, 0.02).unwrap();
        assert_relative_eq!(exp_spectrum(0.0, &m), 0.04, epsilon = 1e-15);
        assert_relative_eq!(exp_spectrum(1.0 / 0.02, &m), 0.02, epsilon = 1e-15);
        let t2 = ExponentialCorrelation::t2_normalized(0.02).unwrap();
        assert_relative_eq!(t2.t2(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(exp_spectrum(0.0, &t2), 2.0 / t2.t2(), epsilon = 1e-12);
    }

    #[test]
    fn lorentzian_integrates_to_correlation_at_origin() {
        // ω = tan θ / τc maps the real line onto (−π/2, π/2).
        let m = ExponentialCorrelation::new(1.3, 0.7).unwrap();
        let cfg = QuadratureConfig::default();
        let half = std::f64::consts::FRAC_PI_2;
        let v = integrate_refined(
            "test",
            |th: f64| {
                let w = th.tan() / m.tau_c;
                exp_spectrum(w, &m) / (m.tau_c * th.cos().powi(2))
            },
            -half,
            half,
            &cfg,
        )
        .unwrap();
        assert_relative_eq!(v / (2.0 * PI), m.delta * m.delta, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_density_values() {
        let g = GaussianCouplingDensity::new(2.0, 1.5, 0.3).unwrap();
        let peak = 2.0 / (PI.sqrt() * 0.3);
        assert_relative_eq!(gaussian_density(1.5, &g), peak, epsilon = 1e-14);
        assert_relative_eq!(
            gaussian_density(1.8, &g),
            peak / std::f64::consts::E,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            gaussian_density(1.2, &g),
            peak / std::f64::consts::E,
            max_relative = 1e-14
        );
        let (g_ref, _, _) = reference_quadratic();
        assert_relative_eq!(gaussian_density(1.0, &g_ref), 0.22301, epsilon = 1e-5);
        assert!(gaussian_density(-1.0, &g_ref) > 0.0);
    }

    #[test]
    fn zero_coupling_spectra_vanish() {
        let g = GaussianCouplingDensity::new(0.0, 1.0, 0.4).unwrap();
        let th = ThermalConfig::new(1.0).unwrap();
        let q = QuadratureConfig::default();
        for w in [-2.0, 0.0, 0.3, 2.0] {
            assert_eq!(quadratic_spectrum(w, &g, &th, &q).unwrap(), 0.0);
        }
        let d = CaldeiraLeggettDensity::new(0.0, 1, 1.0).unwrap();
        for w in [-2.0, 0.0, 0.3, 2.0] {
            assert_eq!(linear_spectrum(w, &d, &th), 0.0);
        }
    }

    #[test]
    fn quadratic_spectrum_detailed_balance() {
        let (g, th, q) = reference_quadratic();
        for w in [0.5, 1.0, 2.0, 3.0] {
            let ratio = quadratic_spectrum(-w, &g, &th, &q).unwrap()
                / quadratic_spectrum(w, &g, &th, &q).unwrap();
            assert_relative_eq!(ratio, (-th.beta * w).exp(), max_relative = 1e-4);
        }
    }

    #[test]
    fn quadratic_spectrum_is_positive() {
        let (g, th, q) = reference_quadratic();
        for i in 0..=80 {
            let w = -4.0 + 0.1 * i as f64;
            assert!(
                quadratic_spectrum(w, &g, &th, &q).unwrap() > 0.0,
                "J({w}) not positive"
            );
        }
    }

    /// Brute-force three-term double integral of the quadratic correlation.
    fn double_integral_correlation(t: f64, g: &GaussianCouplingDensity, beta: f64) -> Complex64 {
        let (lo, hi) = g.support();
        let gl = crate::quad::rule();
        let panels = 96;
        let width = (hi - lo) / panels as f64;
        let mut nodes = Vec::new();
        for p in 0..panels {
            let a = lo + width * p as f64;
            gl.for_each_on(a, a + width, |x, w| nodes.push((x, w)));
        }
        let occ = |x: f64| 1.0 / (beta * x).exp_m1();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(e, we) in &nodes {
            for &(f, wf) in &nodes {
                if e.abs() < 1e-12 || f.abs() < 1e-12 {
                    continue;
                }
                let (ne, nf) = (occ(e), occ(f));
                let weight = gaussian_density(e, g) * gaussian_density(f, g) * e * f * we * wf;
                let emit = (ne + 1.0) * (nf + 1.0) * Complex64::new(0.0, -(e + f) * t).exp();
                let mixed = 2.0 * ne * (nf + 1.0) * Complex64::new(0.0, (e - f) * t).exp();
                let absorb = ne * nf * Complex64::new(0.0, (e + f) * t).exp();
                acc += (emit + mixed + absorb) * weight;
            }
        }
        acc
    }

    #[test]
    fn factorized_correlation_matches_double_integral() {
        let (g, th, q) = reference_quadratic();
        for t in [0.0, 0.4, 1.3, 3.0] {
            let fast = quadratic_correlation(t, &g, &th, &q).unwrap();
            let slow = double_integral_correlation(t, &g, th.beta);
            assert!(
                (fast - slow).norm() < 1e-9 * slow.norm().max(1e-3),
                "t={t}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn quadratic_correlation_symmetries() {
        let (g, th, q) = reference_quadratic();
        let c0 = quadratic_correlation(0.0, &g, &th, &q).unwrap();
        assert!(c0.re > 0.0 && c0.im.abs() < 1e-15 * c0.re);
        let plus = quadratic_correlation(1.3, &g, &th, &q).unwrap();
        let minus = quadratic_correlation(-1.3, &g, &th, &q).unwrap();
        assert!((minus - plus.conj()).norm() < 1e-10);
    }

    #[test]
    fn quadratic_fourier_consistency_at_zero_frequency() {
        let (g, th, q) = reference_quadratic();
        // C decays as a Gaussian of width ~1/γp; 30 is far beyond it.
        let int = integrate_refined(
            "test",
            |t: f64| quadratic_correlation(t, &g, &th, &q).unwrap().re,
            0.0,
            30.0,
            &QuadratureConfig {
                panel_count: 60,
                rel_tol: 1e-9,
                ..Default::default()
            },
        )
        .unwrap();
        let j0 = quadratic_spectrum(0.0, &g, &th, &q).unwrap();
        assert_relative_eq!(2.0 * int, j0, max_relative = 1e-3);
    }

    #[test]
    fn linear_spectrum_limits() {
        let th = ThermalConfig::new(1.0).unwrap();
        let sup = CaldeiraLeggettDensity::new(1.0, 2, 5.0).unwrap();
        assert_eq!(linear_spectrum(0.0, &sup, &th), 0.0);
        let ohm = CaldeiraLeggettDensity::new(1.0, 1, 5.0).unwrap();
        assert_relative_eq!(
            linear_spectrum(0.0, &ohm, &th) / (2.0 * PI),
            1.0,
            epsilon = 1e-15
        );
        // continuity from both sides
        for w in [1e-7, -1e-7] {
            assert_relative_eq!(linear_spectrum(w, &ohm, &th), 2.0 * PI, max_relative = 1e-6);
        }
        // direct evaluation of the printed form away from zero
        let w = 0.8;
        let n = bose_occupation(w, &th).unwrap();
        assert_relative_eq!(
            linear_spectrum(w, &ohm, &th),
            2.0 * PI * ohm.coupling(w) * (n + 1.0),
            max_relative = 1e-13
        );
        let nm = bose_occupation(w, &th).unwrap();
        assert_relative_eq!(
            linear_spectrum(-w, &ohm, &th),
            2.0 * PI * ohm.coupling(w) * nm,
            max_relative = 1e-13
        );
    }

    #[test]
    fn spectrum_grid_validation() {
        assert!(SpectrumGrid::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_ok());
        assert!(SpectrumGrid::new(vec![1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(SpectrumGrid::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SpectrumGrid::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
        assert!(SpectrumGrid::new(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
        assert!(SpectrumGrid::new(vec![0.0, 1.0], vec![1.0, -1e-15]).is_ok());
    }

    #[test]
    fn reservoir_model_serde_roundtrip() {
        let (g, th, q) = reference_quadratic();
        let m = ReservoirModel::Quadratic(QuadraticSpinBoson {
            density: g,
            thermal: th,
            quad: q,
        });
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"quadratic\""));
        let back: ReservoirModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn exp_correlation_is_even(t in -50.0f64..50.0, delta in 0.0f64..5.0, tau in 0.01f64..10.0) {
            let m = ExponentialCorrelation::new(delta, tau).unwrap();
            prop_assert_eq!(exp_correlation(t, &m), exp_correlation(-t, &m));
        }

        #[test]
        fn occupation_identity(w in 0.001f64..30.0, beta in 0.05f64..10.0) {
            let th = ThermalConfig::new(beta).unwrap();
            let s = bose_occupation(w, &th).unwrap() + bose_occupation(-w, &th).unwrap() + 1.0;
            prop_assert!(s.abs() < 1e-12 * (1.0 + bose_occupation(w, &th).unwrap()));
        }
    }
}

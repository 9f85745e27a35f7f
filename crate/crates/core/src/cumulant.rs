//! The second cumulant `S(t) = ∫₀ᵗdt₁∫₀^{t₁}dt₂ Re⟨B(t₁)B(t₂)⟩`.
//!
//! `S` is defined non-negative, so the free decay is `ln I = −2S(t)`. Three
//! routes are provided: the closed form for the exponential correlation, a
//! frequency integral over the power spectrum and a time integral over the
//! correlation function. [`CumulantEngine`] selects between them.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    CaldeiraLeggettDensity, CorrelationModel, ExponentialCorrelation, ReservoirModel, ThermalConfig,
};
use crate::quad::{integrate_panels, refine, rule, QuadratureConfig};

/// Oscillation periods (in units of `1/t`) resolved explicitly before the
/// spectral tail is replaced by its mean.
pub const TAIL_PERIODS: f64 = 400.0;

/// Below this value of `ωt` the spectral kernel uses its Taylor series.
const KERNEL_TAYLOR: f64 = 1e-4;

/// Largest panel width, in units of `1/t`, for oscillatory kernels.
const MAX_PHASE_PER_PANEL: f64 = 2.0;

/// Anything that can produce `S(t)` for `t ≥ 0`.
pub trait Cumulant: Send + Sync {
    fn s(&self, t: f64) -> Result<f64>;
}

/// Adapts a closure into a [`Cumulant`].
#[derive(Debug, Clone, Copy)]
pub struct FnCumulant<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> Cumulant for FnCumulant<F> {
    fn s(&self, t: f64) -> Result<f64> {
        check_time("cumulant", t)?;
        Ok((self.0)(t))
    }
}

impl<C: Cumulant + ?Sized> Cumulant for &C {
    fn s(&self, t: f64) -> Result<f64> {
        (**self).s(t)
    }
}

fn check_time(op: &'static str, t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(
            op,
            format!("time must be finite and non-negative, got {t}"),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Exponential correlation

/// `Δ²τc{t − τc(1 − e^{−t/τc})}`.
pub fn s_exponential(t: f64, model: &ExponentialCorrelation) -> f64 {
    let tau = model.tau_c;
    let x = t.abs() / tau;
    let bracket = if x < 1e-3 {
        // x − (1 − e^{−x}) to fifth order
        x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)))
    } else {
        x + (-x).exp_m1()
    };
    model.delta * model.delta * tau * tau * bracket
}

// ---------------------------------------------------------------------------
// Frequency-domain route

/// Where a spectrum lives: `J` is structured on `|ω| ≤ cutoff`; when
/// `compact` it vanishes beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBand {
    pub cutoff: f64,
    pub compact: bool,
}

impl SpectralBand {
    pub fn of(model: &dyn CorrelationModel, quad: &QuadratureConfig) -> Self {
        Self {
            cutoff: quad.freq_cutoff.unwrap_or_else(|| model.frequency_cutoff()),
            compact: model.compact_spectrum(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.cutoff.is_finite() && self.cutoff > 0.0) {
            return Err(Error::param("freq_cutoff", "must be finite and positive"));
        }
        Ok(())
    }
}

/// `(1 − cos ωt)/ω²`, written without cancellation.
#[inline]
fn kernel(omega: f64, t: f64) -> f64 {
    let x = omega * t;
    if x.abs() < KERNEL_TAYLOR {
        0.5 * t * t * (1.0 - x * x / 12.0)
    } else {
        let s = (0.5 * x).sin();
        2.0 * s * s / (omega * omega)
    }
}

/// Quadrature nodes over `[0, ∞)` for the one-sided integral
/// `(1/2π)∫₀^∞ J_sym(ω)(1 − cos ωt)/ω² dω`, `J_sym(ω) = J(ω) + J(−ω)`.
#[derive(Debug, Clone, Default)]
struct SpectralNodes {
    omega: Vec<f64>,
    weight: Vec<f64>,
    jsym: Vec<f64>,
}

impl SpectralNodes {
    fn push_panels(&mut self, a: f64, b: f64, panels: usize) {
        let gl = rule();
        let width = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + width * p as f64;
            let hi = if p + 1 == panels { b } else { lo + width };
            gl.for_each_on(lo, hi, |x, w| {
                self.omega.push(x);
                self.weight.push(w);
            });
        }
    }

    /// Uniform panels on `[0, W]`, no wider than `min(W/P, 2/t)`, times `m`.
    fn body(band: &SpectralBand, t: f64, base: usize, m: usize) -> Self {
        let mut width = band.cutoff / base as f64;
        if t > 0.0 {
            width = width.min(MAX_PHASE_PER_PANEL / t);
        }
        let panels = (band.cutoff / width).ceil() as usize * m;
        let mut nodes = Self::default();
        nodes.push_panels(0.0, band.cutoff, panels);
        nodes
    }

    /// Graded panels on `[W, max(W, K/t)]`: each at most doubles in size and
    /// spans at most `2/t`.
    fn tail(band: &SpectralBand, t: f64, m: usize) -> (Self, f64) {
        let end = band.cutoff.max(TAIL_PERIODS / t);
        let mut nodes = Self::default();
        let mut a = band.cutoff;
        while a < end {
            let b = (2.0 * a).min(a + MAX_PHASE_PER_PANEL / t).min(end);
            nodes.push_panels(a, b, m);
            a = b;
        }
        (nodes, end)
    }

    fn fill(&mut self, spectrum: &(dyn Fn(f64) -> Result<f64> + Sync)) -> Result<()> {
        self.jsym = self
            .omega
            .par_iter()
            .map(|&w| Ok(spectrum(w)? + spectrum(-w)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    /// `(Σ w·J·k, Σ w·|J·k|)` for an arbitrary kernel `k`.
    fn sum(&self, k: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut acc = 0.0;
        let mut mag = 0.0;
        for ((&w, &q), &j) in self.omega.iter().zip(&self.weight).zip(&self.jsym) {
            let v = q * j * k(w);
            acc += v;
            mag += v.abs();
        }
        (acc, mag)
    }
}

/// `(1/2π)∫_{ωK}^∞ J_sym/ω²`: beyond `ωK` the kernel is replaced by its mean.
/// Integrated in `x = ωK/ω` over `(0, 1]`.
fn mean_tail(
    spectrum: &(dyn Fn(f64) -> Result<f64> + Sync),
    omega_k: f64,
    panels: usize,
) -> Result<(f64, f64)> {
    let err = RefCell::new(None);
    let (v, mag) = integrate_panels(
        |x: f64| {
            let w = omega_k / x;
            match spectrum(w).and_then(|a| Ok(a + spectrum(-w)?)) {
                Ok(j) => j / omega_k,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        panels,
    );
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok((v, mag)),
    }
}

/// Runs `refine` with an estimator that may fail, surfacing the first error.
fn refine_fallible(
    op: &'static str,
    quad: &QuadratureConfig,
    mut estimate: impl FnMut(usize) -> Result<(f64, f64)>,
) -> Result<f64> {
    let mut failure = None;
    let out = refine(op, quad, 1, |m| match estimate(m) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            (f64::NAN, f64::NAN)
        }
    });
    match failure {
        Some(e) => Err(e),
        None => out,
    }
}

fn spectral_estimate(
    spectrum: &(dyn Fn(f64) -> Result<f64> + Sync),
    band: &SpectralBand,
    t: f64,
    base: usize,
    m: usize,
) -> Result<(f64, f64)> {
    let mut body = SpectralNodes::body(band, t, base, m);
    body.fill(spectrum)?;
    let (mut v, mut mag) = body.sum(|w| kernel(w, t));
    if !band.compact {
        let (tv, tm) = spectral_tail(spectrum, band, t, base, m)?;
        v += tv;
        mag += tm;
    }
    Ok((v / (2.0 * PI), mag / (2.0 * PI)))
}

fn spectral_tail(
    spectrum: &(dyn Fn(f64) -> Result<f64> + Sync),
    band: &SpectralBand,
    t: f64,
    base: usize,
    m: usize,
) -> Result<(f64, f64)> {
    let (mut tail, end) = SpectralNodes::tail(band, t, m);
    tail.fill(spectrum)?;
    let (v, mag) = tail.sum(|w| kernel(w, t));
    let (mv, mm) = mean_tail(spectrum, end, base * m)?;
    Ok((v + mv, mag + mm))
}

/// `S(t) = ∫dω/2π J(ω)(1 − cos ωt)/ω²`.
///
/// `spectrum` is evaluated at both signs of `ω`. The integrand's removable
/// singularity at `ω = 0` is handled by a Taylor window of the kernel.
pub fn s_from_spectrum(
    t: f64,
    spectrum: &(dyn Fn(f64) -> Result<f64> + Sync),
    band: SpectralBand,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_time("s_from_spectrum", t)?;
    band.validate()?;
    if t == 0.0 {
        return Ok(0.0);
    }
    refine_fallible("s_from_spectrum", quad, |m| {
        spectral_estimate(spectrum, &band, t, quad.panel_count, m)
    })
}

/// `S(t) = ∫₀^∞ I(ω)(2n(ω) + 1)(1 − cos ωt)/ω² dω` for the linear coupling.
pub fn s_linear_boson(
    t: f64,
    d: &CaldeiraLeggettDensity,
    thermal: &ThermalConfig,
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_time("s_linear_boson", t)?;
    if t == 0.0 || d.alpha == 0.0 {
        return Ok(0.0);
    }
    let band = SpectralBand {
        cutoff: quad.freq_cutoff.unwrap_or_else(|| d.cutoff()),
        compact: true,
    };
    band.validate()?;
    let beta = thermal.beta;
    refine("s_linear_boson", quad, 1, |m| {
        let body = SpectralNodes::body(&band, t, quad.panel_count, m);
        let mut acc = 0.0;
        let mut mag = 0.0;
        for (&w, &q) in body.omega.iter().zip(&body.weight) {
            let v = q * d.thermal_weight(w, beta) * kernel(w, t);
            acc += v;
            mag += v.abs();
        }
        (acc, mag)
    })
}

// ---------------------------------------------------------------------------
// Time-domain route

/// `S(t) = ∫₀ᵗ(t − u) Re C(u) du`, the double integral collapsed by
/// stationarity.
///
/// `quad.freq_cutoff`, when set, is taken as the highest frequency present in
/// `C` and sets the minimum panel count.
pub fn s_from_correlation(
    t: f64,
    correlation: &(dyn Fn(f64) -> Result<f64> + Sync),
    quad: &QuadratureConfig,
) -> Result<f64> {
    check_time("s_from_correlation", t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let base = match quad.freq_cutoff {
        Some(w) => quad
            .panel_count
            .max((t * w / MAX_PHASE_PER_PANEL).ceil() as usize),
        None => quad.panel_count,
    };
    refine_fallible("s_from_correlation", quad, |m| {
        let panels = base * m;
        let width = t / panels as f64;
        let gl = rule();
        let mut nodes = Vec::with_capacity(panels * gl.nodes().len());
        for p in 0..panels {
            let lo = width * p as f64;
            let hi = if p + 1 == panels { t } else { lo + width };
            gl.for_each_on(lo, hi, |x, w| nodes.push((x, w)));
        }
        let vals = nodes
            .par_iter()
            .map(|&(u, w)| Ok(w * (t - u) * correlation(u)?))
            .collect::<Result<Vec<_>>>()?;
        Ok((vals.iter().sum(), vals.iter().map(|v| v.abs()).sum()))
    })
}

// ---------------------------------------------------------------------------
// Asymptotics

/// Long-time dephasing: `S(t) ∼ rate·t` with `rate = J(0)/2`, `T2 = 2/J(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRate {
    pub j0: f64,
    pub rate: f64,
    /// Infinite when `J(0) = 0`.
    pub t2: f64,
}

pub fn asymptotic_rate(spectrum: &dyn Fn(f64) -> Result<f64>) -> Result<AsymptoticRate> {
    let j0 = spectrum(0.0)?;
    if !j0.is_finite() || j0 < 0.0 {
        return Err(Error::domain(
            "asymptotic_rate",
            format!("J(0) must be finite and non-negative, got {j0}"),
        ));
    }
    let t2 = if j0 == 0.0 { f64::INFINITY } else { 2.0 / j0 };
    Ok(AsymptoticRate {
        j0,
        rate: 0.5 * j0,
        t2,
    })
}

// ---------------------------------------------------------------------------
// Cached evaluators

type SpectrumFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Spectral `S(t)` with `J` precomputed on the body nodes needed up to
/// `t_max`. Later times fall back to direct evaluation.
#[derive(Clone)]
pub struct SpectralCumulant {
    spectrum: SpectrumFn,
    band: SpectralBand,
    quad: QuadratureConfig,
    t_max: f64,
    multiplier: usize,
    body: Arc<SpectralNodes>,
}

impl std::fmt::Debug for SpectralCumulant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralCumulant")
            .field("band", &self.band)
            .field("t_max", &self.t_max)
            .field("nodes", &self.body.omega.len())
            .finish()
    }
}

impl SpectralCumulant {
    pub fn new(
        spectrum: impl Fn(f64) -> Result<f64> + Send + Sync + 'static,
        band: SpectralBand,
        t_max: f64,
        quad: &QuadratureConfig,
    ) -> Result<Self> {
        check_time("SpectralCumulant", t_max)?;
        band.validate()?;
        quad.validate()?;
        let spectrum: SpectrumFn = Arc::new(spectrum);
        let t_ref = if t_max > 0.0 {
            t_max
        } else {
            1.0 / band.cutoff
        };
        // Refinement at t_max picks the resolution; smaller times oscillate less.
        let mut chosen = 1;
        refine_fallible("SpectralCumulant", quad, |m| {
            chosen = m;
            spectral_estimate(spectrum.as_ref(), &band, t_ref, quad.panel_count, m)
        })?;
        let mut body = SpectralNodes::body(&band, t_ref, quad.panel_count, chosen);
        body.fill(spectrum.as_ref())?;
        Ok(Self {
            spectrum,
            band,
            quad: *quad,
            t_max,
            multiplier: chosen,
            body: Arc::new(body),
        })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn node_count(&self) -> usize {
        self.body.omega.len()
    }

    /// `(S, S′, S″)` from the body nodes; only meaningful for compact bands.
    fn with_derivatives(&self, t: f64) -> (f64, f64, f64) {
        let mut s = 0.0;
        let mut ds = 0.0;
        let mut dds = 0.0;
        for ((&w, &q), &j) in self
            .body
            .omega
            .iter()
            .zip(&self.body.weight)
            .zip(&self.body.jsym)
        {
            let qj = q * j;
            let (sn, cs) = (w * t).sin_cos();
            s += qj * kernel(w, t);
            ds += qj
                * if w * t < KERNEL_TAYLOR {
                    t * (1.0 - (w * t).powi(2) / 6.0)
                } else {
                    sn / w
                };
            dds += qj * cs;
        }
        let n = 2.0 * PI;
        (s / n, ds / n, dds / n)
    }
}

impl Cumulant for SpectralCumulant {
    fn s(&self, t: f64) -> Result<f64> {
        check_time("SpectralCumulant::s", t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if t > self.t_max {
            return s_from_spectrum(t, self.spectrum.as_ref(), self.band, &self.quad);
        }
        let (mut v, _) = self.body.sum(|w| kernel(w, t));
        if !self.band.compact {
            v += spectral_tail(
                self.spectrum.as_ref(),
                &self.band,
                t,
                self.quad.panel_count,
                self.multiplier,
            )?
            .0;
        }
        Ok(v / (2.0 * PI))
    }
}

/// `S` on a uniform grid with first and second derivatives, interpolated by
/// quintic Hermite polynomials. Requires a compact spectrum.
#[derive(Debug, Clone)]
pub struct TabulatedCumulant {
    step: f64,
    values: Vec<[f64; 3]>,
    source: SpectralCumulant,
}

impl TabulatedCumulant {
    pub fn new(source: SpectralCumulant, step: f64) -> Result<Self> {
        if !source.band.compact {
            return Err(Error::Unsupported(
                "tabulation needs a spectrum that vanishes beyond its cutoff".into(),
            ));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::param("step", "must be finite and positive"));
        }
        let n = (source.t_max / step).ceil().max(1.0) as usize;
        let step = source.t_max / n as f64;
        let values = (0..=n)
            .into_par_iter()
            .map(|i| {
                let (s, ds, dds) = source.with_derivatives(i as f64 * step);
                [s, ds, dds]
            })
            .collect();
        Ok(Self {
            step,
            values,
            source,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Cumulant for TabulatedCumulant {
    fn s(&self, t: f64) -> Result<f64> {
        check_time("TabulatedCumulant::s", t)?;
        let last = self.values.len() - 1;
        let pos = t / self.step;
        if pos > last as f64 {
            return self.source.s(t);
        }
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        let u = pos - i as f64;
        let h = self.step;
        let [s0, d0, e0] = self.values[i];
        let [s1, d1, e1] = self.values[i + 1];
        let u2 = u * u;
        let u3 = u2 * u;
        let u4 = u3 * u;
        let u5 = u4 * u;
        let h0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5;
        let h1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5;
        let h2 = 0.5 * (u2 - 3.0 * u3 + 3.0 * u4 - u5);
        let h3 = 0.5 * (u3 - 2.0 * u4 + u5);
        let h4 = -4.0 * u3 + 7.0 * u4 - 3.0 * u5;
        let h5 = 10.0 * u3 - 15.0 * u4 + 6.0 * u5;
        Ok(s0 * h0 + h * d0 * h1 + h * h * e0 * h2 + h * h * e1 * h3 + h * d1 * h4 + s1 * h5)
    }
}

// ---------------------------------------------------------------------------
// Engine

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    AnalyticExponential,
    SpectralQuadrature,
    TimeDomain,
    LinearBoson,
}

impl EngineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineMode::AnalyticExponential => "analytic_exponential",
            EngineMode::SpectralQuadrature => "spectral_quadrature",
            EngineMode::TimeDomain => "time_domain",
            EngineMode::LinearBoson => "linear_boson",
        }
    }
}

/// Computes `S(t)` for a reservoir by one of the available routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantEngine {
    mode: EngineMode,
    model: ReservoirModel,
    quad: QuadratureConfig,
}

/// Upper bound on `table points × spectral nodes` before tabulation is
/// skipped in favour of the node cache alone.
const TABULATION_BUDGET: f64 = 2e9;

impl CumulantEngine {
    pub fn new(mode: EngineMode, model: ReservoirModel, quad: QuadratureConfig) -> Result<Self> {
        quad.validate()?;
        let ok = match mode {
            EngineMode::AnalyticExponential => matches!(model, ReservoirModel::Exponential(_)),
            EngineMode::LinearBoson => matches!(model, ReservoirModel::Linear(_)),
            EngineMode::SpectralQuadrature | EngineMode::TimeDomain => true,
        };
        if !ok {
            return Err(Error::Unsupported(format!(
                "engine {} cannot evaluate the {} model",
                mode.as_str(),
                model.name()
            )));
        }
        Ok(Self { mode, model, quad })
    }

    /// The cheapest exact route for `model`.
    pub fn preferred(model: ReservoirModel, quad: QuadratureConfig) -> Result<Self> {
        let mode = match model {
            ReservoirModel::Exponential(_) => EngineMode::AnalyticExponential,
            ReservoirModel::Quadratic(_) => EngineMode::SpectralQuadrature,
            ReservoirModel::Linear(_) => EngineMode::LinearBoson,
        };
        Self::new(mode, model, quad)
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn model(&self) -> &ReservoirModel {
        &self.model
    }

    pub fn quad(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub fn band(&self) -> SpectralBand {
        SpectralBand::of(&self.model, &self.quad)
    }

    pub fn spectrum(&self, omega: f64) -> Result<f64> {
        self.model.spectrum(omega)
    }

    pub fn asymptotic_rate(&self) -> Result<AsymptoticRate> {
        asymptotic_rate(&|w| self.model.spectrum(w))
    }

    /// Direct evaluation without caching.
    pub fn s(&self, t: f64) -> Result<f64> {
        check_time("CumulantEngine::s", t)?;
        let model = self.model;
        match (self.mode, &model) {
            (EngineMode::AnalyticExponential, ReservoirModel::Exponential(m)) => {
                Ok(s_exponential(t, m))
            }
            (EngineMode::LinearBoson, ReservoirModel::Linear(m)) => {
                s_linear_boson(t, &m.density, &m.thermal, &self.quad)
            }
            (EngineMode::SpectralQuadrature, _) => {
                s_from_spectrum(t, &|w| model.spectrum(w), self.band(), &self.quad)
            }
            (EngineMode::TimeDomain, _) => {
                let hint = match model {
                    ReservoirModel::Exponential(m) => 1.0 / m.tau_c,
                    _ => model.frequency_cutoff(),
                };
                let quad = QuadratureConfig {
                    freq_cutoff: Some(self.quad.freq_cutoff.unwrap_or(hint)),
                    ..self.quad
                };
                s_from_correlation(t, &|u| Ok(model.correlation(u)?.re), &quad)
            }
            _ => unreachable!("mode/model compatibility is checked at construction"),
        }
    }

    /// An evaluator for many calls with `t ≤ t_max`.
    pub fn prepare(&self, t_max: f64) -> Result<PreparedCumulant> {
        check_time("CumulantEngine::prepare", t_max)?;
        match self.mode {
            EngineMode::AnalyticExponential | EngineMode::TimeDomain => {
                Ok(PreparedCumulant::Direct(*self))
            }
            EngineMode::SpectralQuadrature | EngineMode::LinearBoson => {
                let band = match (self.mode, &self.model) {
                    (EngineMode::LinearBoson, ReservoirModel::Linear(m)) => SpectralBand {
                        cutoff: self.quad.freq_cutoff.unwrap_or_else(|| m.density.cutoff()),
                        compact: true,
                    },
                    _ => self.band(),
                };
                let model = self.model;
                let cached =
                    SpectralCumulant::new(move |w| model.spectrum(w), band, t_max, &self.quad)?;
                if !band.compact {
                    return Ok(PreparedCumulant::Spectral(cached));
                }
                let step = 0.16 / band.cutoff;
                let points = t_max / step + 1.0;
                if points * cached.node_count() as f64 > TABULATION_BUDGET {
                    return Ok(PreparedCumulant::Spectral(cached));
                }
                Ok(PreparedCumulant::Tabulated(TabulatedCumulant::new(
                    cached, step,
                )?))
            }
        }
    }
}

impl Cumulant for CumulantEngine {
    fn s(&self, t: f64) -> Result<f64> {
        CumulantEngine::s(self, t)
    }
}

/// Result of [`CumulantEngine::prepare`].
#[derive(Debug, Clone)]
pub enum PreparedCumulant {
    Direct(CumulantEngine),
    Spectral(SpectralCumulant),
    Tabulated(TabulatedCumulant),
}

impl Cumulant for PreparedCumulant {
    fn s(&self, t: f64) -> Result<f64> {
        match self {
            PreparedCumulant::Direct(e) => e.s(t),
            PreparedCumulant::Spectral(c) => c.s(t),
            PreparedCumulant::Tabulated(c) => c.s(t),
        }
    }
}

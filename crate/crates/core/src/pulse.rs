//! π-pulse trains and the log-intensity they produce.
//!
//! For `N` π pulses at `τs, 2τs, …, Nτs` after the initial π/2 pulse, the
//! echo intensity at `t ≥ Nτs` is `I = exp(−2E)` with
//!
//! ```text
//! E = (−1)^N Σₙ (−1)ⁿ(4n−2) S((N−n+1)τs)
//!   + (−1)^{N−1} Σₙ 2(−1)^{n+1} S(t−nτs)
//!   + (−1)^N S(t)
//! ```
//!
//! [`coefficients`] builds that series; [`segment_expansion`] derives it
//! independently by expanding the toggling-sign double integral segment by
//! segment, and [`filter_oracle`] evaluates the double integral itself.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::DecayCurve;
use crate::cumulant::Cumulant;
use crate::error::{Error, Result};
use crate::models::ExponentialCorrelation;
use crate::quad::{refine, rule, QuadratureConfig};

/// Relative slack when comparing an observation time with a pulse time.
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    n_pulses: usize,
    tau_s: f64,
}

impl PulseTrain {
    pub fn new(n_pulses: usize, tau_s: f64) -> Result<Self> {
        if !tau_s.is_finite() || tau_s < 0.0 || (n_pulses > 0 && tau_s == 0.0) {
            return Err(Error::param(
                "tau_s",
                "must be finite, and positive when pulses are applied",
            ));
        }
        Ok(Self { n_pulses, tau_s })
    }

    /// No π pulses: free decay.
    pub fn free() -> Self {
        Self {
            n_pulses: 0,
            tau_s: 0.0,
        }
    }

    pub fn n_pulses(&self) -> usize {
        self.n_pulses
    }

    pub fn tau_s(&self) -> f64 {
        self.tau_s
    }

    /// Time of the last pulse, `Nτs`.
    pub fn duration(&self) -> f64 {
        self.n_pulses as f64 * self.tau_s
    }

    pub fn pulse_times(&self) -> Vec<f64> {
        (1..=self.n_pulses).map(|k| k as f64 * self.tau_s).collect()
    }

    /// Pulses applied at or before `t`.
    pub fn pulses_applied(&self, t: f64) -> usize {
        if self.n_pulses == 0 {
            return 0;
        }
        let k = (t / self.tau_s * (1.0 + TIME_SLACK)).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.n_pulses)
        }
    }

    /// The first `k` pulses of this train.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            n_pulses: k.min(self.n_pulses),
            tau_s: self.tau_s,
        }
    }
}

/// π pulses at arbitrary times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularTrain {
    times: Vec<f64>,
}

impl IrregularTrain {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::param("pulse_times", "must be finite and positive"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("pulse_times", "must be strictly increasing"));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl From<&PulseTrain> for IrregularTrain {
    fn from(train: &PulseTrain) -> Self {
        Self {
            times: train.pulse_times(),
        }
    }
}

/// Argument of one `S(·)` term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeArg {
    /// `kτs`, independent of the observation time.
    Fixed(u32),
    /// `t − kτs`; `Relative(0)` is `t` itself.
    Relative(u32),
}

impl TimeArg {
    pub fn value(self, t: f64, tau_s: f64) -> f64 {
        match self {
            TimeArg::Fixed(k) => k as f64 * tau_s,
            TimeArg::Relative(k) => t - k as f64 * tau_s,
        }
    }
}

impl fmt::Display for TimeArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TimeArg::Fixed(1) => write!(f, "S(τs)"),
            TimeArg::Fixed(k) => write!(f, "S({k}τs)"),
            TimeArg::Relative(0) => write!(f, "S(t)"),
            TimeArg::Relative(1) => write!(f, "S(t−τs)"),
            TimeArg::Relative(k) => write!(f, "S(t−{k}τs)"),
        }
    }
}

/// The integer-weighted `S` terms of the exponent `E`, with `ln I = −2E`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientSeries {
    n_pulses: usize,
    terms: BTreeMap<TimeArg, i64>,
}

impl CoefficientSeries {
    pub fn n_pulses(&self) -> usize {
        self.n_pulses
    }

    pub fn terms(&self) -> &BTreeMap<TimeArg, i64> {
        &self.terms
    }

    pub fn get(&self, arg: TimeArg) -> i64 {
        self.terms.get(&arg).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Σ cᵢ·S(argᵢ)` at observation time `t`.
    pub fn exponent(&self, t: f64, tau_s: f64, s: &(impl Cumulant + ?Sized)) -> Result<f64> {
        let mut acc = 0.0;
        for (&arg, &c) in &self.terms {
            acc += c as f64 * s.s(clamp_arg(arg.value(t, tau_s), t)?)?;
        }
        Ok(acc)
    }
}

impl fmt::Display for CoefficientSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (arg, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c:+}{arg}")?;
        }
        Ok(())
    }
}

fn sign(k: usize) -> i64 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

/// The terms of the series for `n` pulses, in generation order. Every
/// descriptor occurs once.
pub fn series_terms(n: usize) -> impl Iterator<Item = (TimeArg, i64)> {
    let fixed = (1..=n).map(move |k| {
        let c = sign(n) * sign(k) * (4 * k as i64 - 2);
        (TimeArg::Fixed((n - k + 1) as u32), c)
    });
    let relative = (1..=n).map(move |k| (TimeArg::Relative(k as u32), -sign(n) * 2 * sign(k + 1)));
    fixed
        .chain(relative)
        .chain(std::iter::once((TimeArg::Relative(0), sign(n))))
}

/// The coefficient series for a regular train of `n_pulses` pulses.
pub fn coefficients(n_pulses: usize) -> CoefficientSeries {
    CoefficientSeries {
        n_pulses,
        terms: series_terms(n_pulses).collect(),
    }
}

/// Builds the series by expanding the double integral of the toggling sign
/// function over pairs of inter-pulse segments.
///
/// With boundaries `0 = t₀ < t₁ < … < t_N < t_{N+1} = t` and sign `(−1)ⁱ` on
/// segment `i`, the diagonal blocks give `S(t_{i+1} − t_i)` and each pair
/// `i < j` gives `sᵢsⱼ[S(t_{j+1}−tᵢ) − S(t_{j+1}−t_{i+1}) − S(tⱼ−tᵢ) + S(tⱼ−t_{i+1})]`.
pub fn segment_expansion(n_pulses: usize) -> CoefficientSeries {
    let n = n_pulses;
    // t_b − t_a for boundary indices a < b.
    let arg = |a: usize, b: usize| -> Option<TimeArg> {
        if a == b {
            None
        } else if b <= n {
            Some(TimeArg::Fixed((b - a) as u32))
        } else {
            Some(TimeArg::Relative(a as u32))
        }
    };
    let mut terms: BTreeMap<TimeArg, i64> = BTreeMap::new();
    let mut add = |a: usize, b: usize, c: i64| {
        if let Some(k) = arg(a, b) {
            *terms.entry(k).or_insert(0) += c;
        }
    };
    for i in 0..=n {
        add(i, i + 1, 1);
        for j in i + 1..=n {
            let s = sign(i) * sign(j);
            add(i, j + 1, s);
            add(i + 1, j + 1, -s);
            add(i, j, -s);
            add(i + 1, j, s);
        }
    }
    terms.retain(|_, c| *c != 0);
    CoefficientSeries { n_pulses, terms }
}

/// Arguments may dip below zero by rounding when `t` sits on a pulse.
fn clamp_arg(x: f64, t: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x)
    } else if x >= -TIME_SLACK * t.abs().max(1.0) * 8.0 {
        Ok(0.0)
    } else {
        Err(Error::domain(
            "log_intensity",
            format!("observation time {t} precedes a pulse (argument {x})"),
        ))
    }
}

/// `ln I(t)` after the whole train, `t ≥ Nτs`.
pub fn log_intensity(t: f64, train: &PulseTrain, s: &(impl Cumulant + ?Sized)) -> Result<f64> {
    let end = train.duration();
    if !t.is_finite() || t < end * (1.0 - TIME_SLACK) - TIME_SLACK {
        return Err(Error::domain(
            "log_intensity",
            format!("observation time {t} precedes the last pulse at {end}"),
        ));
    }
    let mut acc = 0.0;
    for (arg, c) in series_terms(train.n_pulses()) {
        acc += c as f64 * s.s(clamp_arg(arg.value(t, train.tau_s()), t)?)?;
    }
    Ok(-2.0 * acc)
}

/// `ln I(t)` at any `t ≥ 0`, counting only the pulses applied by `t`.
pub fn log_intensity_within(
    t: f64,
    train: &PulseTrain,
    s: &(impl Cumulant + ?Sized),
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(
            "log_intensity_within",
            format!("time must be non-negative, got {t}"),
        ));
    }
    log_intensity(t, &train.truncated(train.pulses_applied(t)), s)
}

/// Evaluates the series for one train at many observation times, reusing
/// `S(kτs)`.
#[derive(Debug, Clone)]
pub struct SeriesEvaluator {
    train: PulseTrain,
    fixed: Vec<f64>,
}

impl SeriesEvaluator {
    pub fn new(train: PulseTrain, s: &(impl Cumulant + ?Sized)) -> Result<Self> {
        let fixed = (0..=train.n_pulses())
            .map(|k| s.s(k as f64 * train.tau_s()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { train, fixed })
    }

    pub fn train(&self) -> &PulseTrain {
        &self.train
    }

    /// `ln I(t)` with the pulses applied by `t`.
    pub fn log_intensity(&self, t: f64, s: &(impl Cumulant + ?Sized)) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(
                "log_intensity",
                format!("time must be finite and non-negative, got {t}"),
            ));
        }
        let k = self.train.pulses_applied(t);
        let tau = self.train.tau_s();
        let mut acc = 0.0;
        for (arg, c) in series_terms(k) {
            let v = match arg {
                TimeArg::Fixed(j) => self.fixed[j as usize],
                TimeArg::Relative(j) => s.s(clamp_arg(t - j as f64 * tau, t)?)?,
            };
            acc += c as f64 * v;
        }
        Ok(-2.0 * acc)
    }
}

/// `ln I` on a sorted grid; samples inside the train count only the pulses
/// already applied.
pub fn intensity_curve(
    train: &PulseTrain,
    s: &(impl Cumulant + ?Sized),
    t_grid: &[f64],
) -> Result<DecayCurve> {
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::param("t_grid", "must be sorted"));
    }
    let eval = SeriesEvaluator::new(*train, s)?;
    let values = t_grid
        .par_iter()
        .map(|&t| eval.log_intensity(t, s))
        .collect::<Result<Vec<_>>>()?;
    DecayCurve::new(t_grid.to_vec(), values)
}

/// Closed form of `ln I(Nτs)` for the exponential correlation, even `N`.
pub fn log_intensity_closed_exp(train: &PulseTrain, model: &ExponentialCorrelation) -> Result<f64> {
    let n = train.n_pulses();
    if n % 2 == 1 {
        return Err(Error::Unsupported(format!(
            "closed form holds for even N only, got N = {n}"
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let tau_c = model.tau_c;
    let t_n = train.duration();
    let nf = n as f64;
    // x = e^{−τs/τc} keeps every exponential bounded.
    let x = (-train.tau_s() / tau_c).exp();
    let decay = (-t_n / tau_c).exp();
    let brace = t_n
        + (1.0 + decay - 2.0 * nf) * tau_c
        + (-2.0 * decay / (1.0 + x) + (2.0 * decay + 4.0 * nf) * x / (1.0 + x)) * tau_c
        - 4.0 * (x + decay * x * x) * tau_c / ((1.0 + x) * (1.0 + x));
    Ok(-2.0 / model.t2() * brace)
}

// ---------------------------------------------------------------------------
// Filter-function oracle

/// `ln I(t) = −2∫₀ᵗdt₁∫₀^{t₁}dt₂ f(t₁)f(t₂) Re C(t₁ − t₂)` with `f` flipping
/// sign at each pulse.
///
/// The square is cut into cells whose edges include every pulse time;
/// diagonal cells are triangles mapped onto the unit square, the rest are
/// tensor-product rectangles. Cells are halved until the result converges.
pub fn filter_oracle(
    t: f64,
    pulses: &IrregularTrain,
    correlation: &(dyn Fn(f64) -> Result<f64> + Sync),
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(
            "filter_oracle",
            format!("time must be finite and non-negative, got {t}"),
        ));
    }
    if let Some(&last) = pulses.times().last() {
        if last >= t {
            return Err(Error::domain(
                "filter_oracle",
                format!("pulse at {last} is not before t = {t}"),
            ));
        }
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let base = (quad.panel_count / 4).max(4);
    let mut failure = None;
    let out = refine("filter_oracle", quad, base, |cells| {
        match oracle_estimate(t, pulses.times(), correlation, cells) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                (f64::NAN, f64::NAN)
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(-2.0 * out?),
    }
}

fn oracle_estimate(
    t: f64,
    pulses: &[f64],
    correlation: &(dyn Fn(f64) -> Result<f64> + Sync),
    cells: usize,
) -> Result<(f64, f64)> {
    // Segment boundaries, each segment cut into cells of width ≤ t/cells.
    let mut edges = vec![0.0];
    let mut signs = Vec::new();
    let bounds: Vec<f64> = pulses.iter().copied().chain(std::iter::once(t)).collect();
    let mut lo = 0.0;
    for (seg, &hi) in bounds.iter().enumerate() {
        let pieces = (((hi - lo) / t) * cells as f64).ceil().max(1.0) as usize;
        for p in 1..=pieces {
            edges.push(if p == pieces {
                hi
            } else {
                lo + (hi - lo) * p as f64 / pieces as f64
            });
            signs.push(if seg % 2 == 0 { 1.0 } else { -1.0 });
        }
        lo = hi;
    }
    let gl = rule();
    let nodes: Vec<(f64, f64)> = gl
        .nodes()
        .iter()
        .zip(gl.weights())
        .map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let m = signs.len();
    let rows = (0..m)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let (a1, b1) = (edges[i], edges[i + 1]);
            let h1 = b1 - a1;
            let mut acc = 0.0;
            let mut mag = 0.0;
            // Triangle a1 ≤ t₂ ≤ t₁ ≤ b1: t₁ = a1 + h1·x, t₂ = a1 + (t₁ − a1)·y.
            for &(x, wx) in &nodes {
                let d1 = h1 * x;
                for &(y, wy) in &nodes {
                    let v = wx * wy * h1 * d1 * correlation(d1 * (1.0 - y))?;
                    acc += v;
                    mag += v.abs();
                }
            }
            for j in 0..i {
                let (a2, b2) = (edges[j], edges[j + 1]);
                let h2 = b2 - a2;
                let s = signs[i] * signs[j];
                let mut block = 0.0;
                for &(x, wx) in &nodes {
                    let t1 = a1 + h1 * x;
                    for &(y, wy) in &nodes {
                        let t2 = a2 + h2 * y;
                        block += wx * wy * correlation(t1 - t2)?;
                    }
                }
                acc += s * h1 * h2 * block;
                mag += (h1 * h2 * block).abs();
            }
            Ok((acc, mag))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows
        .iter()
        .fold((0.0, 0.0), |(a, m), &(x, y)| (a + x, m + y)))
}

//! Decay-time fits, pulse-interval sweeps, spectral peaks and long-time
//! checks.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cumulant::{Cumulant, CumulantEngine};
use crate::error::{Error, Result};
use crate::models::{ExponentialCorrelation, SpectrumGrid};
use crate::pulse::{PulseTrain, SeriesEvaluator};

/// Formats a float with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// `ln I` sampled on sorted times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    times: Vec<f64>,
    log_intensity: Vec<f64>,
}

impl DecayCurve {
    pub fn new(times: Vec<f64>, log_intensity: Vec<f64>) -> Result<Self> {
        if times.len() != log_intensity.len() {
            return Err(Error::param("log_intensity", "length differs from times"));
        }
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::param("times", "must be sorted"));
        }
        if log_intensity.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("log_intensity", "must be finite"));
        }
        if let Some(&first) = log_intensity.first() {
            if first > 1e-12 {
                return Err(Error::param(
                    "log_intensity",
                    "first sample must not exceed 0",
                ));
            }
        }
        Ok(Self {
            times,
            log_intensity,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn log_intensity(&self) -> &[f64] {
        &self.log_intensity
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.log_intensity.iter().map(|v| v.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `t,ln_I,I` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,ln_I,I\n");
        for (&t, &l) in self.times.iter().zip(&self.log_intensity) {
            let _ = writeln!(out, "{},{},{}", fmt_sig(t), fmt_sig(l), fmt_sig(l.exp()));
        }
        out
    }
}

/// Fit window `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && start >= 0.0 && end > start) {
            return Err(Error::param("window", "need 0 ≤ start < end"));
        }
        Ok(Self { start, end })
    }

    /// `[0.8·t_max, t_max]`.
    pub fn trailing(t_max: f64) -> Result<Self> {
        Self::new(0.8 * t_max, t_max)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t <= self.end
    }

    /// `samples` equally spaced points including both ends.
    pub fn grid(&self, samples: usize) -> Vec<f64> {
        let n = samples.max(2);
        let h = (self.end - self.start) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.end
                } else {
                    self.start + h * i as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Intensity decay time `τ_I = −1/slope`.
    pub decay_time: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of `ln I` about the line.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares line through `ln I` on `window`; `τ_I = −1/slope`.
pub fn fit_decay_time(curve: &DecayCurve, window: Window) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = curve
        .times()
        .iter()
        .zip(curve.log_intensity())
        .filter(|(t, _)| window.contains(**t))
        .map(|(&t, &l)| (t, l))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!(
            "window [{}, {}] holds {} samples, need at least 2",
            window.start,
            window.end,
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::Fit("window samples share one time".into()));
    }
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let slope = stl / stt;
    let intercept = ml - slope * mt;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(slope < 0.0) {
        return Err(Error::NoDecay {
            start: window.start,
            end: window.end,
            slope,
        });
    }
    Ok(DecayFit {
        decay_time: -1.0 / slope,
        slope,
        intercept,
        residual,
        samples: pts.len(),
    })
}

/// `T2e = T2/(1 + (1/N − 2)τc/τs)`.
pub fn effective_t2_formula(
    n_pulses: usize,
    tau_s: f64,
    model: &ExponentialCorrelation,
) -> Result<f64> {
    if n_pulses == 0 {
        return Err(Error::domain(
            "effective_t2_formula",
            "needs at least one pulse",
        ));
    }
    if !(tau_s.is_finite() && tau_s > 0.0) {
        return Err(Error::param("tau_s", "must be finite and positive"));
    }
    let denom = 1.0 + (1.0 / n_pulses as f64 - 2.0) * model.tau_c / tau_s;
    if !(denom > 0.0) {
        return Err(Error::domain(
            "effective_t2_formula",
            format!(
                "denominator {denom} is not positive (τc/τs = {})",
                model.tau_c / tau_s
            ),
        ));
    }
    Ok(model.t2() / denom)
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub window: Window,
    /// Samples of `ln I` across the window.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_s: f64,
    /// Fitted intensity decay time, absent when the fit failed.
    pub tau_i: Option<f64>,
    /// Closed-form `T2e` for the exponential model.
    pub t2e_formula: Option<f64>,
    pub residual: Option<f64>,
    pub n_pulses: usize,
    /// Why `tau_i` is missing.
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub window: Window,
    pub samples: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_s,tau_I,t2e_formula,residual,n_pulses\n");
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), fmt_sig);
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_sig(r.tau_s),
                opt(r.tau_i),
                opt(r.t2e_formula),
                opt(r.residual),
                r.n_pulses
            );
        }
        for r in self.rows.iter().filter(|r| r.diagnostic.is_some()) {
            let _ = writeln!(
                out,
                "# tau_s={}: {}",
                fmt_sig(r.tau_s),
                r.diagnostic.as_deref().unwrap_or("")
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep rows serialize")
    }

    pub fn row(&self, tau_s: f64) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| (r.tau_s - tau_s).abs() <= 1e-12 * tau_s.abs().max(1.0))
    }
}

/// Pulses needed to keep the train running through `window_end`.
pub fn pulses_to_cover(window_end: f64, tau_s: f64) -> usize {
    (window_end / tau_s * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Fits `τ_I` for each pulse interval, trains filling the whole window.
///
/// `cumulant` must be valid up to `spec.window.end`. Rows whose fit fails
/// keep the error as a diagnostic instead of aborting the sweep; numerical
/// failures abort.
pub fn sweep_tau_s(
    tau_grid: &[f64],
    cumulant: &(impl Cumulant + ?Sized),
    exponential: Option<&ExponentialCorrelation>,
    spec: SweepSpec,
) -> Result<SweepResult> {
    if tau_grid.is_empty() {
        return Err(Error::param("tau_s", "grid is empty"));
    }
    if tau_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::param("tau_s", "must be finite and positive"));
    }
    if tau_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("tau_s", "grid must be strictly increasing"));
    }
    let times = spec.window.grid(spec.samples);
    let rows = tau_grid
        .par_iter()
        .map(|&tau| -> Result<SweepRow> {
            let n = pulses_to_cover(spec.window.end, tau);
            let train = PulseTrain::new(n, tau)?;
            let eval = SeriesEvaluator::new(train, cumulant)?;
            let values = times
                .iter()
                .map(|&t| eval.log_intensity(t, cumulant))
                .collect::<Result<Vec<_>>>()?;
            let t2e = exponential.and_then(|m| effective_t2_formula(n, tau, m).ok());
            let mut row = SweepRow {
                tau_s: tau,
                tau_i: None,
                t2e_formula: t2e,
                residual: None,
                n_pulses: n,
                diagnostic: None,
            };
            match DecayCurve::new(times.clone(), values)
                .and_then(|c| fit_decay_time(&c, spec.window))
            {
                Ok(fit) => {
                    row.tau_i = Some(fit.decay_time);
                    row.residual = Some(fit.residual);
                }
                Err(e) if e.is_numerical() => return Err(e),
                Err(e) => row.diagnostic = Some(e.to_string()),
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        window: spec.window,
        samples: times.len(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Peaks

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub value: f64,
}

/// Interior local maxima by three-point comparison, refined by a parabola
/// through the neighbours.
pub fn find_peaks(grid: &SpectrumGrid) -> Vec<Peak> {
    let w = grid.omegas();
    let v = grid.values();
    let mut out = Vec::new();
    for i in 1..w.len().saturating_sub(1) {
        if !(v[i] > v[i - 1] && v[i] >= v[i + 1]) {
            continue;
        }
        // Plateaus report their first point only.
        let (x0, x1, x2) = (w[i - 1], w[i], w[i + 1]);
        let (y0, y1, y2) = (v[i - 1], v[i], v[i + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let a = (d12 - d01) / (x2 - x0);
        let (omega, value) = if a < 0.0 {
            let b = d01 - a * (x0 + x1);
            let xm = (-b / (2.0 * a)).clamp(x0, x2);
            (xm, y1 + (xm - x1) * (d01 + a * (xm - x0)))
        } else {
            (x1, y1)
        };
        out.push(Peak { omega, value });
    }
    out
}

// ---------------------------------------------------------------------------
// Asymptotics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteRow {
    pub t: f64,
    pub s: f64,
    pub s_over_t: f64,
    /// `|S/t − J(0)/2| / (J(0)/2)`; absolute `S/t` when `J(0) = 0`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    pub j0: f64,
    pub rate: f64,
    pub rows: Vec<AsymptoteRow>,
    /// Deviation shrinks from each checkpoint to the next.
    pub converging: bool,
}

impl AsymptoteReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,S,S_over_t,rate,deviation\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_sig(r.t),
                fmt_sig(r.s),
                fmt_sig(r.s_over_t),
                fmt_sig(self.rate),
                fmt_sig(r.deviation)
            );
        }
        out
    }
}

/// Tabulates `S(t)/t` against `J(0)/2` at increasing checkpoints.
pub fn verify_asymptote(engine: &CumulantEngine, checkpoints: &[f64]) -> Result<AsymptoteReport> {
    if checkpoints.is_empty() {
        return Err(Error::param("t_checkpoints", "empty"));
    }
    if checkpoints.iter().any(|t| !(t.is_finite() && *t > 0.0))
        || checkpoints.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(Error::param(
            "t_checkpoints",
            "must be positive and strictly increasing",
        ));
    }
    let rate = engine.asymptotic_rate()?;
    let rows = checkpoints
        .iter()
        .map(|&t| {
            let s = engine.s(t)?;
            let s_over_t = s / t;
            let deviation = if rate.rate > 0.0 {
                (s_over_t - rate.rate).abs() / rate.rate
            } else {
                s_over_t.abs()
            };
            Ok(AsymptoteRow {
                t,
                s,
                s_over_t,
                deviation,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let converging = rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
    Ok(AsymptoteReport {
        j0: rate.j0,
        rate: rate.rate,
        rows,
        converging,
    })
}

//! Run configuration: a flat set of keys read from `key = value` text or a
//! JSON object, with environment overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use pulsedephase::cumulant::EngineMode;
use pulsedephase::{
    CaldeiraLeggettDensity, ExponentialCorrelation, GaussianCouplingDensity, LinearSpinBoson,
    QuadraticSpinBoson, QuadratureConfig, ReservoirModel, ThermalConfig, Units,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Prefix of environment variables that override config keys.
pub const ENV_PREFIX: &str = "PULSEDEPHASE_";

pub const REQUIRED_KEYS: [&str; 3] = ["command", "units", "model"];

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "command",
    "units",
    "model",
    "engine",
    "tau_c",
    "delta",
    "s_q",
    "gamma_p",
    "beta",
    "alpha",
    "ohmic_n",
    "omega_c",
    "tau_s",
    "n_pulses",
    "pulse_times",
    "t_grid",
    "omega_grid",
    "window_start",
    "window_end",
    "fit_samples",
    "t_checkpoints",
    "oracle_pairs",
    "seed",
    "quad_panels",
    "quad_levels",
    "quad_rel_tol",
    "quad_freq_cutoff",
    "out",
    "format",
    "threads",
];

const EXPONENTIAL_KEYS: &[&str] = &["tau_c", "delta"];
const QUADRATIC_KEYS: &[&str] = &["s_q", "gamma_p", "beta"];
const LINEAR_KEYS: &[&str] = &["alpha", "ohmic_n", "omega_c", "beta"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Decay,
    Sweep,
    OracleCheck,
    Asymptote,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Decay => "decay",
            Command::Sweep => "sweep",
            Command::OracleCheck => "oracle-check",
            Command::Asymptote => "asymptote",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "spectrum" => Command::Spectrum,
            "decay" => Command::Decay,
            "sweep" => Command::Sweep,
            "oracle-check" => Command::OracleCheck,
            "asymptote" => Command::Asymptote,
            _ => {
                return Err(
                    "expected one of spectrum, decay, sweep, oracle-check, asymptote".into(),
                )
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Exponential,
    Quadratic,
    Linear,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Exponential => "exponential",
            ModelKind::Quadratic => "quadratic",
            ModelKind::Linear => "linear",
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            ModelKind::Exponential => EXPONENTIAL_KEYS,
            ModelKind::Quadratic => QUADRATIC_KEYS,
            ModelKind::Linear => LINEAR_KEYS,
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "exponential" => ModelKind::Exponential,
            "quadratic" => ModelKind::Quadratic,
            "linear" => ModelKind::Linear,
            _ => return Err("expected one of exponential, quadratic, linear".into()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err("expected csv or json".into()),
        }
    }
}

fn parse_units(s: &str) -> Result<Units, String> {
    match s {
        "t2" => Ok(Units::T2),
        "omega_p" => Ok(Units::OmegaP),
        _ => Err("expected t2 or omega_p".into()),
    }
}

fn parse_engine(s: &str) -> Result<EngineMode, String> {
    Ok(match s {
        "analytic_exponential" => EngineMode::AnalyticExponential,
        "spectral_quadrature" => EngineMode::SpectralQuadrature,
        "time_domain" => EngineMode::TimeDomain,
        "linear_boson" => EngineMode::LinearBoson,
        _ => {
            return Err(
                "expected analytic_exponential, spectral_quadrature, time_domain or linear_boson"
                    .into(),
            )
        }
    })
}

/// Inclusive range `start:stop:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step * (1.0 + 1e-12) + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + self.step * i as f64).collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}",
            fmt_num(self.start),
            fmt_num(self.stop),
            fmt_num(self.step)
        )
    }
}

/// Shortest text that parses back to the same `f64`.
fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err("expected start:stop:step".into());
        }
        let num = |p: &str| {
            p.parse::<f64>()
                .map_err(|_| format!("`{p}` is not a number"))
        };
        let g = Grid {
            start: num(parts[0])?,
            stop: num(parts[1])?,
            step: num(parts[2])?,
        };
        if ![g.start, g.stop, g.step].iter().all(|v| v.is_finite()) {
            return Err("values must be finite".into());
        }
        if !(g.step > 0.0) {
            return Err("step must be positive".into());
        }
        if g.stop < g.start {
            return Err("stop must not precede start".into());
        }
        Ok(g)
    }
}

/// A fully typed run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub units: Units,
    pub model: ModelKind,
    pub engine: Option<EngineMode>,
    pub tau_c: Option<f64>,
    pub delta: Option<f64>,
    pub s_q: Option<f64>,
    pub gamma_p: Option<f64>,
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub ohmic_n: Option<u32>,
    pub omega_c: Option<f64>,
    pub tau_s: Vec<f64>,
    pub n_pulses: Option<usize>,
    pub pulse_times: Vec<f64>,
    pub t_grid: Option<Grid>,
    pub omega_grid: Option<Grid>,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    pub fit_samples: usize,
    pub t_checkpoints: Vec<f64>,
    pub oracle_pairs: usize,
    pub seed: u64,
    pub quad: QuadratureConfig,
    pub out: Option<String>,
    pub format: Format,
    pub threads: Option<usize>,
}

fn invalid(key: &str, reason: impl fmt::Display) -> CliError {
    CliError::Config(format!("key `{key}`: {reason}"))
}

/// Raw string values by key.
pub type RawConfig = BTreeMap<String, String>;

/// Reads `key = value` lines (blank lines and `#` comments ignored) or, when
/// the text starts with `{`, a flat JSON object.
pub fn parse_raw(text: &str) -> Result<RawConfig, CliError> {
    let trimmed = text.trim_start();
    let mut raw = RawConfig::new();
    if trimmed.starts_with('{') {
        let obj: serde_json::Map<String, serde_json::Value> = serde_json::from_str(trimmed)
            .map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        for (k, v) in obj {
            let s = json_scalar(&k, &v)?;
            raw.insert(k, s);
        }
    } else {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if raw.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(invalid(&k, "given more than once"));
            }
        }
    }
    Ok(raw)
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String, CliError> {
    use serde_json::Value;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|x| match x {
                Value::Number(n) => Ok(n.to_string()),
                _ => Err(invalid(key, "arrays may hold numbers only")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        Value::Null | Value::Object(_) => Err(invalid(
            key,
            "expected a string, number or array of numbers",
        )),
    }
}

/// Applies `PULSEDEPHASE_<KEY>` variables from `vars` over `raw`.
pub fn apply_env(raw: &mut RawConfig, vars: impl IntoIterator<Item = (String, String)>) {
    for (name, value) in vars {
        if let Some(key) = name.strip_prefix(ENV_PREFIX) {
            let key = key.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                raw.insert(key, value);
            }
        }
    }
}

/// Strict parse of a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    RunConfig::from_raw(parse_raw(text)?)
}

struct Fields {
    raw: RawConfig,
}

impl Fields {
    fn take(&mut self, key: &'static str) -> Option<String> {
        self.raw.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| invalid(key, format!("`{v}`: {e}"))),
        }
    }

    fn number(&mut self, key: &'static str) -> Result<Option<f64>, CliError> {
        let v: Option<f64> = self.parse(key)?;
        match v {
            Some(x) if !x.is_finite() => Err(invalid(key, "must be finite")),
            other => Ok(other),
        }
    }

    /// Comma-separated numbers, or a `start:stop:step` range.
    fn list(&mut self, key: &'static str) -> Result<Vec<f64>, CliError> {
        let Some(v) = self.take(key) else {
            return Ok(Vec::new());
        };
        if v.contains(':') {
            let g: Grid = v.parse().map_err(|e| invalid(key, format!("`{v}`: {e}")))?;
            return Ok(g.points());
        }
        let items = v
            .trim_matches(|c| c == '[' || c == ']')
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| invalid(key, format!("`{s}` is not a finite number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if items.is_empty() {
            return Err(invalid(key, "empty list"));
        }
        Ok(items)
    }
}

impl RunConfig {
    pub fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        if let Some(k) = raw.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown key `{k}`")));
        }
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| !raw.contains_key(*k))
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "missing required keys: {}",
                missing.join(", ")
            )));
        }
        let mut f = Fields { raw };
        let command: Command = f.parse("command")?.expect("checked above");
        let units = {
            let v = f.take("units").expect("checked above");
            parse_units(&v).map_err(|e| invalid("units", format!("`{v}`: {e}")))?
        };
        let model: ModelKind = f.parse("model")?.expect("checked above");
        for key in [EXPONENTIAL_KEYS, QUADRATIC_KEYS, LINEAR_KEYS].concat() {
            if f.raw.contains_key(key) && !model.keys().contains(&key) {
                return Err(invalid(
                    key,
                    format!("does not apply to the {} model", model.as_str()),
                ));
            }
        }
        let engine = match f.take("engine") {
            None => None,
            Some(v) => {
                Some(parse_engine(&v).map_err(|e| invalid("engine", format!("`{v}`: {e}")))?)
            }
        };
        let defaults = QuadratureConfig::default();
        let cfg = RunConfig {
            command,
            units,
            model,
            engine,
            tau_c: f.number("tau_c")?,
            delta: f.number("delta")?,
            s_q: f.number("s_q")?,
            gamma_p: f.number("gamma_p")?,
            beta: f.number("beta")?,
            alpha: f.number("alpha")?,
            ohmic_n: f.parse("ohmic_n")?,
            omega_c: f.number("omega_c")?,
            tau_s: f.list("tau_s")?,
            n_pulses: f.parse("n_pulses")?,
            pulse_times: f.list("pulse_times")?,
            t_grid: f.parse("t_grid")?,
            omega_grid: f.parse("omega_grid")?,
            window_start: f.number("window_start")?,
            window_end: f.number("window_end")?,
            fit_samples: f.parse("fit_samples")?.unwrap_or(201),
            t_checkpoints: f.list("t_checkpoints")?,
            oracle_pairs: f.parse("oracle_pairs")?.unwrap_or(20),
            seed: f.parse("seed")?.unwrap_or(0),
            quad: QuadratureConfig {
                panel_count: f.parse("quad_panels")?.unwrap_or(defaults.panel_count),
                refinement_levels: f
                    .parse("quad_levels")?
                    .unwrap_or(defaults.refinement_levels),
                rel_tol: f.number("quad_rel_tol")?.unwrap_or(defaults.rel_tol),
                freq_cutoff: f.number("quad_freq_cutoff")?,
            },
            out: f.take("out"),
            format: f.parse("format")?.unwrap_or(Format::Csv),
            threads: f.parse("threads")?,
        };
        debug_assert!(f.raw.is_empty(), "unconsumed keys {:?}", f.raw.keys());
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> Result<(), CliError> {
        match self.quad.validate() {
            Ok(()) => {}
            Err(pulsedephase::Error::InvalidParameter { name, reason }) => {
                let key = match name {
                    "panel_count" => "quad_panels",
                    "rel_tol" => "quad_rel_tol",
                    "freq_cutoff" => "quad_freq_cutoff",
                    other => other,
                };
                return Err(invalid(key, reason));
            }
            Err(e) => return Err(CliError::Config(e.to_string())),
        }
        self.reservoir()?;
        if let Some(e) = self.engine {
            pulsedephase::cumulant::CumulantEngine::new(e, self.reservoir()?, self.quad)
                .map_err(|e| invalid("engine", e))?;
        }
        if let Some(&bad) = self.tau_s.iter().find(|t| !(**t > 0.0)) {
            return Err(invalid("tau_s", format!("{bad} is not positive")));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        if self.fit_samples < 2 {
            return Err(invalid("fit_samples", "must be at least 2"));
        }
        if !self.pulse_times.is_empty() {
            pulsedephase::pulse::IrregularTrain::new(self.pulse_times.clone())
                .map_err(|e| invalid("pulse_times", e))?;
            if !self.tau_s.is_empty() || self.n_pulses.is_some() {
                return Err(invalid(
                    "pulse_times",
                    "cannot be combined with tau_s or n_pulses",
                ));
            }
        }
        let need = |key: &'static str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "command {} needs key `{key}`",
                    self.command.as_str()
                )))
            }
        };
        match self.command {
            Command::Spectrum => need("omega_grid", self.omega_grid.is_some())?,
            Command::Decay => need("t_grid", self.t_grid.is_some())?,
            Command::Sweep => {
                need("tau_s", !self.tau_s.is_empty())?;
                if self.tau_s.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("tau_s", "sweep grid must be strictly increasing"));
                }
                if self.n_pulses.is_some() {
                    return Err(invalid(
                        "n_pulses",
                        "sweeps choose the pulse count to fill the fit window",
                    ));
                }
                if let (Some(a), Some(b)) = (self.window_start, self.window_end) {
                    if !(a >= 0.0 && b > a) {
                        return Err(invalid(
                            "window_start",
                            "need 0 ≤ window_start < window_end",
                        ));
                    }
                }
            }
            Command::OracleCheck => {
                need("n_pulses", self.n_pulses.is_some())?;
                if self.oracle_pairs == 0 {
                    return Err(invalid("oracle_pairs", "must be at least 1"));
                }
            }
            Command::Asymptote => {
                need("t_checkpoints", !self.t_checkpoints.is_empty())?;
                if self.t_checkpoints.iter().any(|t| !(*t > 0.0))
                    || self.t_checkpoints.windows(2).any(|w| !(w[1] > w[0]))
                {
                    return Err(invalid(
                        "t_checkpoints",
                        "must be positive and strictly increasing",
                    ));
                }
            }
        }
        Ok(())
    }

    /// The reservoir described by the model keys.
    pub fn reservoir(&self) -> Result<ReservoirModel, CliError> {
        let req = |key: &'static str, v: Option<f64>| {
            v.ok_or_else(|| {
                invalid(
                    key,
                    format!("required by the {} model", self.model.as_str()),
                )
            })
        };
        let wrap = |key: &'static str| move |e: pulsedephase::Error| invalid(key, e);
        match self.model {
            ModelKind::Exponential => {
                let tau_c = req("tau_c", self.tau_c)?;
                let m = match (self.units, self.delta) {
                    (Units::T2, None) => ExponentialCorrelation::t2_normalized(tau_c),
                    (Units::T2, Some(_)) => {
                        return Err(invalid("delta", "is fixed by T2 = 1 in t2 units; omit it"));
                    }
                    (Units::OmegaP, Some(d)) => ExponentialCorrelation::new(d, tau_c),
                    (Units::OmegaP, None) => {
                        return Err(invalid("delta", "required outside t2 units"))
                    }
                }
                .map_err(wrap("tau_c"))?;
                Ok(ReservoirModel::Exponential(m))
            }
            ModelKind::Quadratic => {
                self.require_units(Units::OmegaP)?;
                let density = GaussianCouplingDensity::from_strength(
                    req("s_q", self.s_q)?,
                    req("gamma_p", self.gamma_p)?,
                )
                .map_err(wrap("s_q"))?;
                let thermal = ThermalConfig::new(req("beta", self.beta)?).map_err(wrap("beta"))?;
                Ok(ReservoirModel::Quadratic(QuadraticSpinBoson {
                    density,
                    thermal,
                    quad: self.quad,
                }))
            }
            ModelKind::Linear => {
                self.require_units(Units::OmegaP)?;
                let n = self
                    .ohmic_n
                    .ok_or_else(|| invalid("ohmic_n", "required by the linear model"))?;
                let density = CaldeiraLeggettDensity::new(
                    req("alpha", self.alpha)?,
                    n,
                    req("omega_c", self.omega_c)?,
                )
                .map_err(wrap("alpha"))?;
                let thermal = ThermalConfig::new(req("beta", self.beta)?).map_err(wrap("beta"))?;
                Ok(ReservoirModel::Linear(LinearSpinBoson {
                    density,
                    thermal,
                    quad: self.quad,
                }))
            }
        }
    }

    fn require_units(&self, units: Units) -> Result<(), CliError> {
        if self.units != units {
            return Err(invalid(
                "units",
                format!(
                    "the {} model is expressed in {} units",
                    self.model.as_str(),
                    units.as_str()
                ),
            ));
        }
        Ok(())
    }

    /// Serializes to `key = value` lines, sorted by key, that parse back to
    /// an equal configuration.
    pub fn to_key_value(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("command", self.command.as_str().into());
        kv.insert("units", self.units.as_str().into());
        kv.insert("model", self.model.as_str().into());
        if let Some(e) = self.engine {
            kv.insert("engine", e.as_str().into());
        }
        let mut num = |k: &'static str, v: Option<f64>| {
            if let Some(x) = v {
                kv.insert(k, fmt_num(x));
            }
        };
        num("tau_c", self.tau_c);
        num("delta", self.delta);
        num("s_q", self.s_q);
        num("gamma_p", self.gamma_p);
        num("beta", self.beta);
        num("alpha", self.alpha);
        num("omega_c", self.omega_c);
        num("window_start", self.window_start);
        num("window_end", self.window_end);
        num("quad_freq_cutoff", self.quad.freq_cutoff);
        let join = |v: &[f64]| v.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(",");
        if !self.tau_s.is_empty() {
            kv.insert("tau_s", join(&self.tau_s));
        }
        if !self.pulse_times.is_empty() {
            kv.insert("pulse_times", join(&self.pulse_times));
        }
        if !self.t_checkpoints.is_empty() {
            kv.insert("t_checkpoints", join(&self.t_checkpoints));
        }
        if let Some(n) = self.ohmic_n {
            kv.insert("ohmic_n", n.to_string());
        }
        if let Some(n) = self.n_pulses {
            kv.insert("n_pulses", n.to_string());
        }
        if let Some(g) = self.t_grid {
            kv.insert("t_grid", g.to_string());
        }
        if let Some(g) = self.omega_grid {
            kv.insert("omega_grid", g.to_string());
        }
        kv.insert("fit_samples", self.fit_samples.to_string());
        kv.insert("oracle_pairs", self.oracle_pairs.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("quad_panels", self.quad.panel_count.to_string());
        kv.insert("quad_levels", self.quad.refinement_levels.to_string());
        kv.insert("quad_rel_tol", fmt_num(self.quad.rel_tol));
        if let Some(o) = &self.out {
            kv.insert("out", o.clone());
        }
        kv.insert("format", self.format.as_str().into());
        if let Some(t) = self.threads {
            kv.insert("threads", t.to_string());
        }
        kv.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

//! Command dispatch and output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use pulsedephase::analysis::{
    find_peaks, fmt_sig, pulses_to_cover, sweep_tau_s, verify_asymptote, SweepSpec, Window,
};
use pulsedephase::cumulant::CumulantEngine;
use pulsedephase::models::CorrelationModel;
use pulsedephase::pulse::{filter_oracle, intensity_curve, IrregularTrain, PulseTrain};
use pulsedephase::{ReservoirModel, SpectrumGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, Format, RunConfig};
use crate::error::CliError;

/// Fit window end used by sweeps when none is configured, in model units.
const DEFAULT_WINDOW_END_T2: f64 = 10.0;
const DEFAULT_WINDOW_END_OMEGA_P: f64 = 45.0;

/// Result of one command, before formatting.
#[derive(Debug, Clone)]
pub struct Report {
    /// CSV body: a header line, rows, then optional `#` notes.
    pub csv: String,
    pub json: Value,
    pub rows: usize,
    /// One line for stderr.
    pub summary: String,
}

impl Report {
    /// Full output document with the configuration echoed at the top.
    pub fn render(&self, cfg: &RunConfig) -> String {
        match cfg.format {
            Format::Csv => {
                let mut out = String::new();
                for line in cfg.to_key_value().lines() {
                    let _ = writeln!(out, "# {line}");
                }
                out.push_str(&self.csv);
                out
            }
            Format::Json => {
                let config: serde_json::Map<String, Value> = cfg
                    .to_key_value()
                    .lines()
                    .filter_map(|l| l.split_once(" = "))
                    .map(|(k, v)| (k.to_string(), Value::String(v.to_string())))
                    .collect();
                let doc = json!({ "config": config, "result": self.json });
                serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n"
            }
        }
    }
}

fn engine(cfg: &RunConfig) -> Result<CumulantEngine, CliError> {
    let model = cfg.reservoir()?;
    Ok(match cfg.engine {
        Some(mode) => CumulantEngine::new(mode, model, cfg.quad)?,
        None => CumulantEngine::preferred(model, cfg.quad)?,
    })
}

/// Runs the configured command.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    match cfg.command {
        Command::Spectrum => spectrum(cfg),
        Command::Decay => decay(cfg),
        Command::Sweep => sweep(cfg),
        Command::OracleCheck => oracle_check(cfg),
        Command::Asymptote => asymptote(cfg),
    }
}

fn spectrum(cfg: &RunConfig) -> Result<Report, CliError> {
    let model = cfg.reservoir()?;
    let omegas = cfg.omega_grid.expect("validated").points();
    let grid = SpectrumGrid::sample(omegas, |w| model.spectrum(w))?;
    let peaks = find_peaks(&grid);
    let mut csv = String::from("omega,J\n");
    for (w, j) in grid.omegas().iter().zip(grid.values()) {
        let _ = writeln!(csv, "{},{}", fmt_sig(*w), fmt_sig(*j));
    }
    for p in &peaks {
        let _ = writeln!(
            csv,
            "# peak omega={} J={}",
            fmt_sig(p.omega),
            fmt_sig(p.value)
        );
    }
    let peak_list = peaks
        .iter()
        .map(|p| format!("{:.4}", p.omega))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Report {
        summary: format!(
            "spectrum: {} points, {} peaks at [{peak_list}]",
            grid.len(),
            peaks.len()
        ),
        json: json!({ "omega": grid.omegas(), "J": grid.values(), "peaks": peaks }),
        rows: grid.len(),
        csv,
    })
}

fn decay(cfg: &RunConfig) -> Result<Report, CliError> {
    let times = cfg.t_grid.expect("validated").points();
    let t_max = *times.last().expect("grids are non-empty");
    let mut csv = String::from("tau_s,n_pulses,t,ln_I,I\n");
    let mut curves = Vec::new();
    let mut finals = Vec::new();

    if !cfg.pulse_times.is_empty() {
        // Irregular trains go through the filter integral directly.
        let model = cfg.reservoir()?;
        let train = IrregularTrain::new(cfg.pulse_times.clone())?;
        let corr = |u: f64| Ok(model.correlation(u)?.re);
        let values = times
            .par_iter()
            .map(|&t| filter_oracle(t, &train, &corr, &cfg.quad))
            .collect::<Result<Vec<_>, _>>()?;
        for (t, ln) in times.iter().zip(&values) {
            let _ = writeln!(
                csv,
                "nan,{},{},{},{}",
                train.len(),
                fmt_sig(*t),
                fmt_sig(*ln),
                fmt_sig(ln.exp())
            );
        }
        finals.push(format!(
            "irregular: ln I({t_max}) = {}",
            fmt_sig(*values.last().unwrap())
        ));
        curves.push(json!({ "pulse_times": train.times(), "t": times, "ln_I": values }));
    } else {
        let s = engine(cfg)?.prepare(t_max)?;
        let trains: Vec<PulseTrain> = if cfg.tau_s.is_empty() {
            vec![PulseTrain::free()]
        } else {
            cfg.tau_s
                .iter()
                .map(|&tau| {
                    PulseTrain::new(
                        cfg.n_pulses.unwrap_or_else(|| pulses_to_cover(t_max, tau)),
                        tau,
                    )
                })
                .collect::<Result<_, _>>()?
        };
        for train in &trains {
            let curve = intensity_curve(train, &s, &times)?;
            let tau = if train.n_pulses() == 0 {
                f64::NAN
            } else {
                train.tau_s()
            };
            for ((t, ln), i) in curve
                .times()
                .iter()
                .zip(curve.log_intensity())
                .zip(curve.intensity())
            {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    fmt_sig(tau),
                    train.n_pulses(),
                    fmt_sig(*t),
                    fmt_sig(*ln),
                    fmt_sig(i)
                );
            }
            let last = *curve.log_intensity().last().unwrap();
            finals.push(format!("tau_s={tau}: ln I({t_max}) = {last:.6}"));
            curves.push(json!({
                "tau_s": if tau.is_nan() { Value::Null } else { json!(tau) },
                "n_pulses": train.n_pulses(),
                "t": curve.times(),
                "ln_I": curve.log_intensity(),
            }));
        }
    }
    let rows = times.len() * curves.len();
    Ok(Report {
        summary: format!(
            "decay: {} curves, {rows} rows; {}",
            curves.len(),
            finals.join("; ")
        ),
        json: json!({ "curves": curves }),
        rows,
        csv,
    })
}

fn sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let engine = engine(cfg)?;
    let exponential = match engine.model() {
        ReservoirModel::Exponential(m) => Some(*m),
        _ => None,
    };
    let end = cfg.window_end.unwrap_or(match exponential {
        Some(m) => DEFAULT_WINDOW_END_T2 * m.t2(),
        None => DEFAULT_WINDOW_END_OMEGA_P,
    });
    let window = match cfg.window_start {
        Some(start) => Window::new(start, end),
        None => Window::trailing(end),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let s = engine.prepare(window.end)?;
    let result = sweep_tau_s(
        &cfg.tau_s,
        &s,
        exponential.as_ref(),
        SweepSpec {
            window,
            samples: cfg.fit_samples,
        },
    )?;
    let fitted: Vec<_> = result
        .rows
        .iter()
        .filter_map(|r| r.tau_i.map(|v| (r.tau_s, v)))
        .collect();
    let best = fitted
        .iter()
        .copied()
        .fold(None, |acc: Option<(f64, f64)>, (t, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((t, v)),
        });
    let best = best.map_or_else(String::new, |(t, v)| {
        format!(", max tau_I {v:.6e} at tau_s {t}")
    });
    Ok(Report {
        summary: format!(
            "sweep: {} rows, {} fitted on [{:.6}, {:.6}]{best}",
            result.rows.len(),
            fitted.len(),
            window.start,
            window.end
        ),
        json: serde_json::to_value(&result).expect("sweep serializes"),
        rows: result.rows.len(),
        csv: result.to_csv(),
    })
}

fn oracle_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let engine = engine(cfg)?;
    let model = *engine.model();
    let n = cfg.n_pulses.expect("validated");
    let scale = match model {
        ReservoirModel::Exponential(m) => m.tau_c,
        _ => 1.0,
    };
    let (lo, hi) = if cfg.tau_s.is_empty() {
        (0.05 * scale, scale)
    } else {
        let lo = cfg.tau_s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cfg.tau_s.iter().copied().fold(0.0, f64::max);
        (lo, hi)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs: Vec<(f64, f64)> = (0..cfg.oracle_pairs)
        .map(|_| {
            let tau = if hi > lo { rng.gen_range(lo..hi) } else { lo };
            let extra = rng.gen_range(0.0..2.0) * tau;
            (tau, n as f64 * tau + extra)
        })
        .collect();
    let t_max = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let s = engine.prepare(t_max)?;
    let corr = |u: f64| Ok(model.correlation(u)?.re);
    let rows = pairs
        .par_iter()
        .map(|&(tau, t)| -> Result<_, CliError> {
            let train = PulseTrain::new(n, tau)?;
            let series = pulsedephase::pulse::log_intensity(t, &train, &s)?;
            let oracle = filter_oracle(t, &IrregularTrain::from(&train), &corr, &cfg.quad)?;
            let rel = (series - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE);
            Ok((tau, t, series, oracle, rel))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("tau_s,t,series_ln_I,oracle_ln_I,rel_diff\n");
    for (tau, t, a, b, r) in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_sig(*tau),
            fmt_sig(*t),
            fmt_sig(*a),
            fmt_sig(*b),
            fmt_sig(*r)
        );
    }
    let worst = rows.iter().map(|r| r.4).fold(0.0, f64::max);
    Ok(Report {
        summary: format!(
            "oracle-check: {} pairs with N = {n}, max relative discrepancy {worst:.3e}",
            rows.len()
        ),
        json: json!({
            "n_pulses": n,
            "rows": rows.iter().map(|(tau, t, a, b, r)| json!({
                "tau_s": tau, "t": t, "series_ln_I": a, "oracle_ln_I": b, "rel_diff": r
            })).collect::<Vec<_>>(),
            "max_rel_diff": worst,
        }),
        rows: rows.len(),
        csv,
    })
}

fn asymptote(cfg: &RunConfig) -> Result<Report, CliError> {
    let engine = engine(cfg)?;
    let report = verify_asymptote(&engine, &cfg.t_checkpoints)?;
    let mut csv = report.to_csv();
    let _ = writeln!(
        csv,
        "# J(0)={} converging={}",
        fmt_sig(report.j0),
        report.converging
    );
    let last = report.rows.last().expect("checkpoints are non-empty");
    Ok(Report {
        summary: format!(
            "asymptote: J(0)/2 = {:.6e}, S/t at t={} is {:.6e} ({:.2e} off), {}",
            report.rate,
            last.t,
            last.s_over_t,
            last.deviation,
            if report.converging {
                "converging"
            } else {
                "NOT converging"
            }
        ),
        json: serde_json::to_value(&report).expect("report serializes"),
        rows: report.rows.len(),
        csv,
    })
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pulsedephase_cli::config::{apply_env, parse_raw, Format};
use pulsedephase_cli::{execute, write_atomic, CliError, RunConfig};

/// Decay of a spin under periodic π pulses.
#[derive(Debug, Parser)]
#[command(name = "pulsedephase", version)]
struct Args {
    /// Configuration file, `key = value` lines or a JSON object.
    #[arg(long)]
    config: PathBuf,

    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,

    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.display().to_string(),
        source,
    })?;
    let mut raw = parse_raw(&text)?;
    apply_env(&mut raw, std::env::vars());
    if let Some(out) = &args.out {
        raw.insert("out".into(), out.display().to_string());
    }
    if let Some(f) = &args.format {
        raw.insert("format".into(), f.clone());
    }
    if let Some(t) = args.threads {
        raw.insert("threads".into(), t.to_string());
    }
    RunConfig::from_raw(raw)
}

fn run(args: &Args) -> Result<String, CliError> {
    let cfg = load(args)?;
    if let Some(n) = cfg.threads {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let report = execute(&cfg)?;
    let doc = report.render(&cfg);
    match &cfg.out {
        Some(path) => write_atomic(path.as_ref(), &doc)?,
        None => print!("{doc}"),
    }
    let fmt = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    Ok(format!("{} [{} rows, {fmt}]", report.summary, report.rows))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

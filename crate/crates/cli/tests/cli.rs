use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, config: &str, extra: &[&str], env: &[(&str, &str)]) -> Output {
    let path = dir.join("run.conf");
    std::fs::write(&path, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pulsedephase"));
    cmd.arg("--config").arg(&path).args(extra);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DECAY: &str = "command = decay\nunits = t2\nmodel = exponential\ntau_c = 0.02\ntau_s = 0.1\nt_grid = 0:1:0.25\n";

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn decay_writes_csv_with_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("decay.csv");
    let o = run(dir.path(), DECAY, &["--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("# command = decay\n"), "{csv}");
    assert!(csv.contains("\ntau_s,n_pulses,t,ln_I,I\n"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 5);
    // 12 significant digits.
    assert_eq!(
        rows[4][3]
            .split('e')
            .next()
            .unwrap()
            .trim_start_matches('-')
            .len(),
        13
    );
    let ln_end: f64 = rows[4][3].parse().unwrap();
    assert!((ln_end + 1.24964).abs() < 1e-4, "{ln_end}");
    assert!(stderr(&o).starts_with("decay: 1 curves"), "{}", stderr(&o));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), DECAY, &[], &[]);
    let b = run(dir.path(), DECAY, &["--threads", "1"], &[]);
    assert!(a.status.success() && b.status.success());
    let strip = |o: &Output| {
        String::from_utf8(o.stdout.clone())
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with("# threads"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn invalid_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &DECAY.replace("tau_s = 0.1", "tau_s = -0.1"),
        &[],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau_s"), "{}", stderr(&o));

    let o = run(dir.path(), "", &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(
        e.contains("command") && e.contains("units") && e.contains("model"),
        "{e}"
    );

    let o = run(dir.path(), &format!("{DECAY}quad_panels = 2\n"), &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("quad_panels"), "{}", stderr(&o));

    let o = run(dir.path(), &format!("{DECAY}bogus = 1\n"), &[], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // Eight panels with no refinement cannot meet the tolerance.
    let cfg = "command = asymptote\nunits = omega_p\nmodel = linear\nalpha = 1\nohmic_n = 1\nomega_c = 1\nbeta = 1\n\
               t_checkpoints = 50\nengine = spectral_quadrature\nquad_panels = 8\nquad_levels = 0\nquad_rel_tol = 1e-14\n";
    let o = run(dir.path(), cfg, &[], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn env_override_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), DECAY, &[], &[("PULSEDEPHASE_TAU_S", "0.5")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.contains("# tau_s = 0.5\n"));
    let rows = data_rows(&csv);
    let ln_end: f64 = rows[4][3].parse().unwrap();
    assert!((ln_end + 1.88).abs() < 1e-3, "{ln_end}");
}

#[test]
fn json_format_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        "command = sweep\nunits = t2\nmodel = exponential\ntau_c = 0.02\ntau_s = 0.01, 0.1, 0.5\n";
    let o = run(dir.path(), cfg, &["--format", "json"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["command"], "sweep");
    let rows = doc["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let fits: Vec<f64> = rows.iter().map(|r| r["tau_i"].as_f64().unwrap()).collect();
    // Faster pulsing protects longer.
    assert!(fits[0] > fits[1] && fits[1] > fits[2], "{fits:?}");
    // The closed form needs τs > (2 − 1/N)τc.
    assert!(rows[0]["t2e_formula"].is_null());
    assert!(rows[1]["t2e_formula"].as_f64().unwrap() > 0.0);
}

#[test]
fn oracle_check_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = oracle-check\nunits = t2\nmodel = exponential\ntau_c = 0.02\nn_pulses = 3\noracle_pairs = 5\nseed = 1\n";
    let o = run(dir.path(), cfg, &[], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 5);
    for r in rows {
        let rel: f64 = r[4].parse().unwrap();
        assert!(rel < 1e-8, "{r:?}");
    }
}

#[test]
fn spectrum_reports_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"command": "spectrum", "units": "omega_p", "model": "quadratic",
                  "s_q": 0.025, "gamma_p": 0.4, "beta": 1, "omega_grid": "-3:3:0.05"}"#;
    let o = run(dir.path(), cfg, &[], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        csv.lines().filter(|l| l.starts_with("# peak")).count(),
        3,
        "{csv}"
    );
    assert_eq!(data_rows(&csv).len(), 121);
}

#[test]
fn irregular_train_decay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = decay\nunits = t2\nmodel = exponential\ntau_c = 0.02\npulse_times = 0.1, 0.15, 0.4\nt_grid = 0.5:0.6:0.05\n";
    let o = run(dir.path(), cfg, &[], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(data_rows(&String::from_utf8(o.stdout).unwrap()).len(), 3);

    let early = cfg.replace("0.5:0.6", "0.3:0.6");
    let o = run(dir.path(), &early, &[], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_out_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nope/out.csv");
    let o = run(dir.path(), DECAY, &["--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

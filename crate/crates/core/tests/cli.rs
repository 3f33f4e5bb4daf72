//! End-to-end runs of the `ringlens` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringlens"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// Small, fast thermal run: 2000 particles at a coarse step.
const QUICK: [&str; 4] = ["--override", "solver.ensemble_size=2000", "--override", "solver.time_step=1e-4"];

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn header(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().next().unwrap().split(',').map(str::to_string).collect()
}

const UNIT_SUFFIXES: [&str; 10] = ["_s", "_m", "_rad", "_rad_per_s", "_J", "_nK", "_per_m", "_flag", "_label", "_ok"];

fn assert_si_header(path: &Path) {
    for column in header(path) {
        assert!(UNIT_SUFFIXES.iter().any(|s| column.ends_with(s)), "{}: column `{column}` has no unit suffix", path.display());
    }
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
}

#[test]
fn validate_good_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig4_thermal.toml");
    let o = run(&["validate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig4_thermal.toml");
    let o = run(&["validate", cfg.to_str().unwrap(), "--override", "solver.grid_points=1000"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("solver.grid_points"));

    let o = run(&["simulate", cfg.to_str().unwrap(), "--override", "solver.time_step=-1e-6"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("solver.time_step"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\nnot_a_key = 2\n").unwrap();
    let o = run(&["validate", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["validate", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["validate", "x.toml", "--bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&[], dir.path()).status.code(), Some(1));
    let help = run(&["--help"], dir.path());
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in [
        "potential-map",
        "groundstate",
        "simulate",
        "ensemble",
        "evolve",
        "fit",
        "scan",
        "optimize",
        "validate",
        "repro-fig3",
        "repro-fig4",
    ] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn simulate_writes_trace_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig4_thermal.toml");
    let mut args = vec!["simulate", cfg.to_str().unwrap(), "--out", "run1"];
    args.extend(QUICK);
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("run1");
    let trace = out.join("trace.csv");
    assert_si_header(&trace);
    assert_eq!(header(&trace)[..5], ["t_s", "size_m", "com_rad", "com_rad_per_s", "stage_label"]);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.to_string().contains("energy_nk"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("simulate.manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(manifest["seed"], 7);
    let outputs: Vec<String> =
        manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert!(outputs.iter().any(|p| p.ends_with("trace.csv")));
    assert!(outputs.iter().any(|p| p.ends_with("summary.json")));

    // the trace feeds the fit command
    let o = run(
        &["fit", trace.to_str().unwrap(), "--out", "fitted", "--stage", "expand", "--from", "0.3"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fitted/fit.json")).unwrap()).unwrap();
    assert!(report.to_string().contains("delta_phi_rate"));
    assert!(dir.path().join("fitted/fit.manifest.json").exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig4_thermal.toml");
    for name in ["a", "b"] {
        let mut args = vec!["simulate", cfg.to_str().unwrap(), "--out", name, "--seed", "11"];
        args.extend(QUICK);
        assert_eq!(run(&args, dir.path()).status.code(), Some(0));
    }
    let a = std::fs::read(dir.path().join("a/trace.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert_eq!(a, b);

    let mut args = vec!["simulate", cfg.to_str().unwrap(), "--out", "c", "--seed", "12"];
    args.extend(QUICK);
    assert_eq!(run(&args, dir.path()).status.code(), Some(0));
    assert_ne!(a, std::fs::read(dir.path().join("c/trace.csv")).unwrap());
}

#[test]
fn field_and_matter_commands_write_si_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig4_thermal.toml");
    let cfg = cfg.to_str().unwrap();
    let bec = config("bec.toml");
    let bec = bec.to_str().unwrap();
    let small_grid = ["--override", "solver.grid_points=2048", "--override", "solver.time_step=5e-5"];
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (vec!["potential-map", cfg, "--samples", "64"], "potential_map.csv"),
        (vec!["potential-map", cfg, "--kind", "plane", "--samples", "16"], "potential_map.csv"),
        (vec!["ensemble", cfg, "--duration", "0.05", "--override", "solver.ensemble_size=1000"], "ensemble.csv"),
        ([vec!["groundstate", bec], small_grid.to_vec()].concat(), "groundstate.csv"),
        ([vec!["evolve", bec, "--duration", "0.02"], small_grid.to_vec()].concat(), "evolve.csv"),
    ];
    for (k, (mut args, file)) in cases.into_iter().enumerate() {
        let out = format!("out{k}");
        args.extend(["--out", out.as_str()]);
        let o = run(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
        let path = dir.path().join(&out).join(file);
        assert_si_header(&path);
        let command = args[0];
        assert!(dir.path().join(&out).join(format!("{command}.manifest.json")).exists());
    }
}

#[test]
fn scan_reports_every_tilt() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("fig4_thermal.toml");
    let mut args = vec!["scan", cfg.to_str().unwrap(), "--tilts", "0,0.04,0.08", "--threads", "2"];
    args.extend(QUICK);
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let path = dir.path().join("out/scan.csv");
    assert_eq!(header(&path), ["delta_rad", "E_J", "E_nK", "fit_ok"]);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/scan.json")).unwrap()).unwrap();
    assert!(report["best_tilt"].is_f64());
}

#[test]
fn runtime_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("short.csv");
    std::fs::write(&trace, "t_s,size_m\n0.0,1e-5\n0.1,2e-5\n").unwrap();
    let o = run(&["fit", trace.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let cfg = config("fig4_thermal.toml");
    let o = run(
        &["simulate", cfg.to_str().unwrap(), "--override", "sequence.stages.0.velocity=5.0", "--override", "solver.ensemble_size=1000"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

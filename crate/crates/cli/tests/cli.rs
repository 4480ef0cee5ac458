use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meanfield_lab::{parse_config, Command as Cmd};

const SIMPLE: &str = r#"{"T": 1.0, "n_steps": 400, "q": 1.0, "qbar": 1.0, "sigma": 1.0, "x0": 1.0}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_meanfield-lab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn compare_summary_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &format!(r#"{{"model": {SIMPLE}}}"#));
    let out = run(&["compare"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let line = stdout(&out);
    assert!(line.contains("mfg_mean_T=0.333333"), "{line}");
    assert!(line.contains("mkv_mean_T=0.200000"), "{line}");
    assert!(line.contains("sup_mean_gap=0.133333"), "{line}");
    assert_eq!(line.lines().count(), 1);
}

#[test]
fn malformed_json_is_a_parse_error_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", r#"{"model": {"T": 1.0,"#);
    let artifact = dir.path().join("out.json");
    let out = bin()
        .args(["compare", "--out"])
        .arg(&artifact)
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!artifact.exists());
    assert!(stdout(&out).is_empty());
}

#[test]
fn unknown_field_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"modle": {}}"#);
    assert_eq!(run(&["compare"], &cfg).status.code(), Some(2));
}

#[test]
fn degenerate_denominator_reports_nonexistence() {
    // q(q+q̄)T = −1
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": {"T": 1.0, "n_steps": 400, "q": 1.0, "qbar": -2.0, "sigma": 1.0, "x0": 1.0}, "output": {"path": "never.csv"}}"#,
    );
    let out = bin()
        .current_dir(dir.path())
        .args(["solve-mfg", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no MFG fixed point"));
    assert!(!dir.path().join("never.csv").exists());
}

#[test]
fn invalid_model_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": {"T": 1.0, "n_steps": 400, "q": 1.0, "qbar": 1.0, "sigma": -1.0, "x0": 1.0}}"#,
    );
    assert_eq!(run(&["solve-mkv"], &cfg).status.code(), Some(3));
    let cfg = write_config(dir.path(), "m.json", r#"{"command": "solve-mkv"}"#);
    assert_eq!(run(&["solve-mfg"], &cfg).status.code(), Some(3));
}

#[test]
fn hypotheses_gate_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"model": {"T": 0.1, "n_steps": 100, "q": 1.0, "qbar": -2.0, "sigma": 1.0, "x0": 1.0},
            "numerics": {"short_horizon": false}}"#,
    );
    assert_eq!(run(&["solve-mfg"], &cfg).status.code(), Some(3));
}

#[test]
fn picard_non_convergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"additive": {"T": 1.0, "x0": 1.0, "sigma": 1.0, "n_steps": 50},
            "numerics": {"n_x": 60, "max_iter": 1, "tol": 1e-12}}"#,
    );
    assert_eq!(run(&["oracle"], &cfg).status.code(), Some(5));
}

#[test]
fn artifacts_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"model": {SIMPLE}, "numerics": {{"N": 50, "n_repeats": 3, "seed": 11}}}}"#),
    );
    for (cmd, ext) in [("compare", "csv"), ("compare", "json"), ("simulate", "json"), ("solve-mfg", "csv")] {
        let paths: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("{cmd}{i}.{ext}"))).collect();
        let mut lines = Vec::new();
        for p in &paths {
            let out = bin()
                .args([cmd, "--out"])
                .arg(p)
                .arg("--config")
                .arg(&cfg)
                .output()
                .unwrap();
            assert_eq!(out.status.code(), Some(0));
            lines.push(stdout(&out));
        }
        assert_eq!(lines[0], lines[1]);
        assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap(), "{cmd} {ext}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &format!(r#"{{"model": {SIMPLE}, "numerics": {{"N": 40, "n_repeats": 4, "seed": 5}}}}"#),
    );
    let outs: Vec<String> = ["1", "3"]
        .iter()
        .map(|t| {
            let o = bin()
                .env("MEANFIELD_THREADS", t)
                .args(["simulate", "--config"])
                .arg(&cfg)
                .output()
                .unwrap();
            assert_eq!(o.status.code(), Some(0));
            stdout(&o)
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let bad = bin()
        .env("MEANFIELD_THREADS", "zero")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn emissions_flags_without_config() {
    let out = bin()
        .args(["emissions", "--lambda", "1", "--cap", "0", "--sigma", "1", "--T", "1", "--x0", "2"])
        .args(["--paths", "2000", "--seed", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let line = stdout(&out);
    assert!(line.contains("regime=Abatement"), "{line}");
    assert!(line.contains("delta=1.500000"), "{line}");
    let missing = bin().args(["emissions", "--lambda", "1"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn examples_prints_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"scalar": {"r": -1.0, "T": 1.0, "x0": 0.08333333333333333}}"#);
    let out = run(&["examples"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("command=examples"));
    assert_eq!(lines.next().unwrap(), "example,mode,existence,root_index,root,solvability_margin");
    let quad: Vec<&str> = text.lines().filter(|l| l.starts_with("quadratic_terminal,")).collect();
    assert_eq!(quad.len(), 3);
    assert!(quad.iter().any(|l| l.starts_with("quadratic_terminal,MKV,unique,0,0.1666666666666666")));
}

#[test]
fn shipped_experiments_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments");
    let mut count = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let cfg = parse_config(&std::fs::read(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let command: Cmd = cfg.command.unwrap_or_else(|| panic!("{} names no command", path.display()));
        cfg.validate(command).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 20, "found {count} configs");
}

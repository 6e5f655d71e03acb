use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rough_tails_cli::ExperimentConfig;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rough-tails"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn minimal() -> String {
    fs::read_to_string(fixture("minimal.toml")).unwrap()
}

#[test]
fn config_round_trip() {
    for name in ["minimal.toml"] {
        let cfg = ExperimentConfig::from_toml_str(&fs::read_to_string(fixture(name)).unwrap()).unwrap();
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(cfg, ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap());
    }
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{}\nbogus = 1\n", minimal()));
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");

    let bad = minimal().replace("depth = 2", "depth = 9");
    let cfg = write_config(dir.path(), &bad);
    assert_eq!(code(&run(&["simulate", "--config", cfg.to_str().unwrap()])), 2);

    let bad = minimal().replace("p = 2.5", "p = 2.5\nmetric = \"cc_heisenberg\"").replace("dim = 2", "dim = 3");
    assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    assert_eq!(code(&run(&["simulate"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn missing_config_file_is_io_error() {
    let o = run(&["simulate", "--config", "/nonexistent/config.toml"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn simulate_writes_one_path_with_all_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &minimal());
    let out = dir.path().join("run");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("paths/path_0000.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 64 + 1);
    assert!(csv.starts_with("t,A_1,A_2,A2_11,A2_12,A2_21,A2_22\n"));
    assert!(!out.join("paths/path_0001.csv").exists());
}

fn read_all(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_is_deterministic_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let text = minimal().replace("paths = 1", "paths = 3\nsigma = 200\ncount = 10000");
    let text = text.replace("n_steps = 64", "n_steps = 128");
    let cfg = write_config(dir.path(), &text);
    let c = cfg.to_str().unwrap();
    let mut runs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = dir.path().join(name);
        let o = run(&["simulate", "--config", c, "--out", out.to_str().unwrap(), "--workers", workers]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(read_all(&out));
    }
    assert_eq!(runs[0].len(), 3 + 4);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    let sidecar: serde_json::Value = serde_json::from_slice(
        &runs[0].iter().find(|(p, _)| p.ends_with("count.json")).unwrap().1,
    )
    .unwrap();
    assert_eq!(sidecar["observed"], 10000);
    assert_eq!(sidecar["meta"]["seed"], 11);

    let other = dir.path().join("d");
    run(&["simulate", "--config", c, "--out", other.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(read_all(&other), runs[0]);
}

fn functionals(path: &str, extra: &[&str]) -> (i32, serde_json::Value, String) {
    let mut args = vec!["functionals", path];
    args.extend_from_slice(extra);
    let o = run(&args);
    let json = serde_json::from_slice(&o.stdout).unwrap_or(serde_json::Value::Null);
    (code(&o), json, String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn functionals_of_a_constant_path_vanish() {
    let (c, v, err) = functionals(fixture("constant_path.csv").to_str().unwrap(), &[]);
    assert_eq!(c, 0, "{err}");
    for key in ["pvar", "holder", "M"] {
        assert_eq!(v[key], 0.0, "{key}");
    }
    assert_eq!(v["N0r"], 0);
    assert_eq!(v["Npvar"], 0);
    assert_eq!(v["sandwich"]["holds"], true);
    assert_eq!(v["key_lemma"]["holds"], true);
}

#[test]
fn functionals_match_the_golden_values() {
    let golden: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("golden_functionals.json")).unwrap()).unwrap();
    let (c, v, err) = functionals(
        fixture("fixture_path.csv").to_str().unwrap(),
        &["--p", "2.5", "--r", "1", "--metric", "hom_sym"],
    );
    assert_eq!(c, 0, "{err}");
    for key in ["pvar", "holder", "M", "holder_alpha"] {
        let (a, b) = (v[key].as_f64().unwrap(), golden[key].as_f64().unwrap());
        assert!((a - b).abs() < 1e-9, "{key}: {a} vs {b}");
    }
    assert_eq!(v["N0r"], golden["N0r"]);
    assert_eq!(v["Npvar"], golden["Npvar"]);
    assert_eq!(v["samples"], golden["samples"]);
    let rhs = v["key_lemma"]["rhs"].as_f64().unwrap();
    assert!((rhs - golden["key_lemma_rhs"].as_f64().unwrap()).abs() < 1e-9);
    assert_eq!(v["sandwich"]["holds"], true);
    assert_eq!(v["key_lemma"]["holds"], true);
}

#[test]
fn functionals_writes_bundle_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    let (c, v, _) = functionals(
        fixture("fixture_path.csv").to_str().unwrap(),
        &["--out", out.to_str().unwrap()],
    );
    assert_eq!(c, 0);
    let written: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("functionals.json")).unwrap()).unwrap();
    assert_eq!(written, v);
}

#[test]
fn functionals_fail_loudly_on_bad_input() {
    let (c, _, err) = functionals(fixture("coarse_path.csv").to_str().unwrap(), &["--p", "2"]);
    assert_eq!(c, 2);
    assert!(err.contains("inadmissible"), "{err}");
    let (c, _, _) = functionals(fixture("malformed_path.csv").to_str().unwrap(), &[]);
    assert_eq!(c, 2);
    let (c, _, _) = functionals("/nonexistent/path.csv", &[]);
    assert_eq!(c, 4);
    let (c, _, _) = functionals(fixture("fixture_path.csv").to_str().unwrap(), &["--p", "0.5"]);
    assert_eq!(c, 2);
}

#[test]
fn report_with_too_few_samples_is_an_acceptance_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = minimal().replace("paths = 1", "count = 50\nm = 20");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("r");
    let o = run(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "acceptance");
    assert!(err["failed"].as_array().unwrap().iter().any(|f| f == "count_alpha"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    for f in ["count_survival.csv", "m_survival.csv", "count_fit.svg", "m_fit.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn report_requires_p_above_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = minimal().replace("p = 2.5", "p = 2.0").replace("paths = 1", "count = 50\nm = 20");
    let cfg = write_config(dir.path(), &text);
    let o = run(&["report", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

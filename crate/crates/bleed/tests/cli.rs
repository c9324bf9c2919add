use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bleed::output::read_pnl_csv;
use bleed::RunConfig;
use serde_json::Value;

fn bleed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bleed")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_to(config: &Path, out: &Path, threads: &str) -> Value {
    let o = bleed(&[
        "run",
        config.to_str().unwrap(),
        "--threads",
        threads,
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap()
}

const SMALL_META: &str =
    "experiment = \"meta-cva\"\n[mc]\nn_paths = 400\nn_steps = 50\nseed = 7\n[params]\ncsv_paths = 3\ncsv_stride = 4\n";

/// Replaces every number by its JSON type so documents compare by shape.
fn shape(v: &Value) -> Value {
    match v {
        Value::Number(_) => Value::String("number".into()),
        Value::Array(a) => Value::Array(a.iter().map(shape).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
        other => other.clone(),
    }
}

#[test]
fn results_schema_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", SMALL_META);
    let doc = run_to(&cfg, &dir.path().join("out"), "2");
    let est = serde_json::json!({ "mean": "number", "std_error": "number", "n_paths": "number" });
    let expected = serde_json::json!({
        "schema_version": "number",
        "experiment": "meta-cva",
        "seed": "number",
        "mc": { "n_paths": "number", "n_steps": "number", "antithetic": false },
        "params": {
            "rho_lambda_s": "number", "sigma_lambda_hat": "number", "sigma_lambda": "number",
            "sigma_s": "number", "lambda0": "number", "s0": "number", "strike": "number",
            "maturity": "number", "csv_paths": "number", "csv_stride": "number",
        },
        "results": {
            "v0": "number", "u0": "number", "a0": est, "u0_plus_a0": "number",
            "u_hat_direct": est, "consistency_gap": "number", "consistency_bound": "number",
            "se_ratio": "number", "survival": est, "survival_ref": "number", "csv_terminal_pnl": est,
        },
        "warnings": [],
        "timing": { "elapsed_seconds": "number", "threads": "number" },
    });
    assert_eq!(shape(&doc), expected);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["seed"], 7);
    assert!((doc["results"]["v0"].as_f64().unwrap() - 13.7510).abs() < 1e-4);
    assert!((doc["results"]["u0"].as_f64().unwrap() + 1.9154).abs() < 1e-4);
    assert_eq!(doc["results"]["a0"]["n_paths"], 400);
    assert_eq!(doc["timing"]["threads"], 2);
}

#[test]
fn results_are_byte_identical_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", SMALL_META);
    let strip = |out: &Path| {
        let text = std::fs::read_to_string(out.join("results.json")).unwrap();
        text[..text.find("\"timing\"").unwrap()].to_string()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_to(&cfg, &a, "1");
    run_to(&cfg, &b, "3");
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(
        std::fs::read(a.join("pnl_paths.csv")).unwrap(),
        std::fs::read(b.join("pnl_paths.csv")).unwrap()
    );
}

#[test]
fn pnl_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", SMALL_META);
    let out = dir.path().join("out");
    let doc = run_to(&cfg, &out, "1");
    let text = std::fs::read_to_string(out.join("pnl_paths.csv")).unwrap();
    assert!(text.starts_with("path_id,t,cum_pnl\n") && !text.contains('\r'));
    let rows = read_pnl_csv(&out.join("pnl_paths.csv")).unwrap();
    // 50 steps at stride 4: points 0, 4, ..., 48 and the final point 50
    assert_eq!(rows.len(), 3 * 14);
    let mut terminal = Vec::new();
    for id in 0..3 {
        let path: Vec<_> = rows.iter().filter(|r| r.path_id == id).collect();
        assert_eq!(path[0].t, 0.0);
        assert_eq!(path[0].cum_pnl, 0.0);
        assert_eq!(path.last().unwrap().t, 3.0);
        assert!(path.windows(2).all(|w| w[0].t < w[1].t));
        terminal.push(path.last().unwrap().cum_pnl);
    }
    let mean = terminal.iter().sum::<f64>() / 3.0;
    let reported = doc["results"]["csv_terminal_pnl"]["mean"].as_f64().unwrap();
    assert!(
        (mean - reported).abs() <= 1e-12 * reported.abs().max(1.0),
        "{mean} vs {reported}"
    );
}

#[test]
fn no_hazard_volatility_gives_zero_meta_adjustment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "z.toml",
        "experiment = \"meta-cva\"\n[mc]\nn_paths = 200\nn_steps = 20\n[params]\nsigma_lambda_hat = 0.0\n",
    );
    let doc = run_to(&cfg, &dir.path().join("out"), "1");
    assert_eq!(doc["results"]["a0"]["mean"], 0.0);
    assert_eq!(doc["results"]["a0"]["std_error"], 0.0);
}

#[test]
fn list_names_every_experiment() {
    let o = bleed(&["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        names,
        [
            "gatheral-local-vol",
            "gatheral-stoch-vol",
            "piterbarg",
            "bk-cva",
            "meta-cva",
            "tau-invariance",
            "pnl-paths"
        ]
    );
}

#[test]
fn config_errors_exit_nonzero_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.toml",
        "experiment = \"piterbarg\"\n[params]\nsigma = 0.2\n",
    );
    let o = bleed(&[
        "run",
        cfg.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(
        err.contains("bad.toml") && err.contains("line 3") && err.contains("sigma"),
        "{err}"
    );
    assert!(!dir.path().join("results.json").exists());

    let o = bleed(&["run", "/nonexistent/config.toml"]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("cannot read"));

    let o = bleed(&["run", cfg.to_str().unwrap(), "--threads", "0"]);
    assert!(!o.status.success());
}

#[test]
fn engine_errors_name_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "e.toml",
        "experiment = \"meta-cva\"\n[params]\nsigma_lambda = 0.01\n",
    );
    let o = bleed(&[
        "run",
        cfg.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("meta-cva"), "{err}");
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = RunConfig::load(&path).unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(path.file_stem().unwrap().to_str().unwrap(), c.experiment.name());
            seen += 1;
        }
    }
    assert_eq!(seen, 7);
}

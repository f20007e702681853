use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn multiwell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multiwell"))
        .args(args)
        .env("RUST_BACKTRACE", "0")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_writes_a_complete_record() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("delta_asymmetric.json");
    let out = multiwell(&["run", "--scenario", scenario.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(rec["schema"], "multiwell.run/1");
    for key in ["scenario", "provenance", "hypotheses", "limiting", "clusters", "direct", "matches", "unmatched"] {
        assert!(!rec[key].is_null(), "missing {key}");
    }
    assert_eq!(rec["provenance"]["seed"], 7);
    assert!(rec["provenance"]["truncation"].as_str().unwrap().contains("Dirichlet"));
    assert_eq!(rec["matches"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let scenario = scenarios().join("delta_asymmetric.json");
    let out = multiwell(&["run", "--scenario", scenario.to_str().unwrap(), "--seed", "99"]);
    assert!(out.status.success());
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["provenance"]["seed"], 99);
}

#[test]
fn stages_run_on_their_own() {
    let scenario = scenarios().join("delta_pair.json");
    let s = scenario.to_str().unwrap();
    for stage in ["validate", "limiting", "predict", "direct"] {
        let out = multiwell(&[stage, "--scenario", s]);
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap();
    }
}

#[test]
fn sweep_tables_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenarios().join("delta_pair.json");
    let d = dir.path().to_str().unwrap();
    let out = multiwell(&["sweep", "--scenario", scenario.to_str().unwrap(), "--out", d, "--workers", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "l_X,cluster,index,lambda_direct,lambda_pred,deviation,recon_l2_err,coupling_norm"
    );
    assert_eq!(lines.count(), 10);
    let plot = std::fs::read_to_string(dir.path().join("sweep_plot.csv")).unwrap();
    assert!(plot.starts_with("l_X,cluster,index,log_deviation"));

    let record = dir.path().join("sweep.json");
    let out = multiwell(&["fit-rate", "--sweep", record.to_str().unwrap(), "--column", "deviation"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let beta = fit["beta"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&beta), "{fit}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // a divergence-form term that overwhelms the Laplacian
    let control = write(
        dir.path(),
        "control.json",
        r#"{"schema": "multiwell.scenario/1", "dimension": 1, "grid": {"h": 0.02, "margin": 4.0},
            "wells": [{"kind": "divergence_form", "matrix": ["-1.5"], "drift": ["0"], "support_radius": 1.5, "position": [0.0]}]}"#,
    );
    assert_eq!(multiwell(&["validate", "--scenario", &control]).status.code(), Some(2));

    let close = write(
        dir.path(),
        "close.json",
        r#"{"schema": "multiwell.scenario/1", "dimension": 1, "grid": {"h": 0.01, "margin": 10.0},
            "wells": [{"kind": "delta", "strength": -2.0, "support_radius": 0.5, "position": [-4.0]},
                      {"kind": "delta", "strength": -2.000002, "support_radius": 0.5, "position": [4.0]}]}"#,
    );
    let out = multiwell(&["limiting", "--scenario", &close]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let broken = write(dir.path(), "broken.json", r#"{"schema": "multiwell.scenario/1"}"#);
    assert_eq!(multiwell(&["run", "--scenario", &broken]).status.code(), Some(1));
    assert_eq!(multiwell(&["run"]).status.code(), Some(1));

    let single = write(
        dir.path(),
        "single.json",
        r#"{"schema": "multiwell.scenario/1", "dimension": 1, "grid": {"h": 0.01, "margin": 10.0},
            "wells": [{"kind": "delta", "strength": -2.0, "support_radius": 0.5, "position": [1.0]}],
            "sweep": {"scales": [1, 2, 3, 4]}}"#,
    );
    let out = multiwell(&["fit-rate", "--scenario", &single]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate fit refused"));
}

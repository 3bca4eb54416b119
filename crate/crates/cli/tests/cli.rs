use std::path::Path;
use std::process::{Command, Output};

fn snum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snum"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn controlled_verification_passes_and_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = snum(
        dir.path(),
        &["verify", "--theorem", "controlled", "--alpha", "geometric:0.5", "--blocks", "3", "--report", "r.json", "--csv", "r.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 187);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["overall_pass"], true);
    assert_eq!(report["plan"]["indices"], serde_json::json!([6, 36, 186]));
    let prov = &report["provenance"];
    assert!(prov["tool_version"].as_str().unwrap().starts_with("snum "));
    assert_eq!(prov["sequence"], "geometric:0.5");
    assert_eq!(prov["config"]["kg_constant"], 1.78222);
}

#[test]
fn minorant_csv_has_one_row_per_index() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("seq.json"), "[1, 0.9, 0.9, 0.3, 0.1]").unwrap();
    let o = snum(dir.path(), &["minorant", "--alpha", "file:seq.json", "--horizon", "64", "--out", "beta.csv"]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.path().join("beta.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,alpha_k,beta_k,floor_k"));
    assert_eq!(lines.count(), 64);
}

#[test]
fn usage_and_input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: &[&[&str]] = &[
        &["build", "--theorem", "type", "--alpha", "geometric:0.5", "--t", "2", "--r", "1"],
        &["build", "--theorem", "twosum", "--alpha", "geometric:0.5", "--bogus"],
        &["frobnicate"],
        &["minorant", "--alpha", "cubic:2"],
        &["minorant", "--alpha", "file:missing.json"],
        &["verify", "--theorem", "twosum", "--alpha", "geometric:0.5", "--p", "4"],
    ];
    for args in cases {
        assert_eq!(code(&snum(d, args)), 2, "{args:?}");
    }
    std::fs::write(d.join("bad.json"), r#"{"tolerance": 0}"#).unwrap();
    assert_eq!(code(&snum(d, &["--config", "bad.json", "minorant", "--alpha", "geometric:0.5"])), 2);
    std::fs::write(d.join("unknown.json"), r#"{"kgConstant": 1.8}"#).unwrap();
    assert_eq!(code(&snum(d, &["--config", "unknown.json", "minorant", "--alpha", "geometric:0.5"])), 2);
    std::fs::write(d.join("m.json"), r#"{"rows": 1, "cols": 1, "p_dom": 2, "p_cod": 2, "entries": "x"}"#).unwrap();
    let o = snum(d, &["oracle", "gelfand", "--matrix", "m.json", "--m", "1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("entries"));
}

#[test]
fn failing_verification_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = snum(
        dir.path(),
        &["verify", "--theorem", "prop-optimal", "--alpha", "geometric:0.5", "--epsilon", "0", "--csv", "env.csv"],
    );
    assert_eq!(code(&o), 1);
    assert!(dir.path().join("env.csv").exists());
}

#[test]
fn config_values_reach_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"kg_constant": 1.8, "output_dir": "out"}"#).unwrap();
    let o = snum(
        dir.path(),
        &["--config", "c.json", "verify", "--theorem", "nocotype", "--alpha", "geometric:0.5", "--blocks", "2", "--report", "r.json"],
    );
    assert_eq!(code(&o), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/r.json")).unwrap()).unwrap();
    assert_eq!(report["constants_used"]["kg"], 1.8);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("m.json"),
        r#"{"rows": 3, "cols": 3, "p_dom": "inf", "p_cod": 1, "entries": [[1, 0.2, 0], [0, 0.5, 0.1], [0.3, 0, 0.25]]}"#,
    )
    .unwrap();
    let runs: &[&[&str]] = &[
        &["verify", "--theorem", "twosum", "--alpha", "power:1", "--blocks", "2", "--report", "A.json", "--csv", "A.csv"],
        &["verify", "--theorem", "prop-second", "--trials", "6", "--n", "4", "--seed", "9", "--restarts", "6", "--report", "A.json", "--csv", "A.csv"],
        &["oracle", "approx", "--matrix", "m.json", "--m", "2", "--restarts", "6", "--seed", "4", "--json", "A.json"],
        &["build", "--theorem", "type", "--alpha", "power:1", "--t", "4", "--r", "2", "--blocks", "2", "--out", "A.json"],
    ];
    for args in runs {
        let first = snum(d, args);
        assert!(code(&first) <= 1, "{args:?}: {}", String::from_utf8_lossy(&first.stderr));
        let a = std::fs::read(d.join("A.json")).unwrap();
        let a_csv = std::fs::read(d.join("A.csv")).ok();
        let again = snum(d, args);
        assert_eq!(code(&first), code(&again));
        assert_eq!(a, std::fs::read(d.join("A.json")).unwrap(), "{args:?}");
        assert_eq!(a_csv, std::fs::read(d.join("A.csv")).ok(), "{args:?}");
        let _ = std::fs::remove_file(d.join("A.csv"));
    }
}

#[test]
fn plan_snumbers_and_oracle_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = snum(d, &["plan", "--theorem", "controlled", "--alpha", "geometric:0.5"]);
    assert_eq!(code(&o), 0);
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["plan"]["indices"], serde_json::json!([6, 36, 186]));

    std::fs::write(
        d.join("d.json"),
        r#"{"rows": 3, "cols": 3, "p_dom": "inf", "p_cod": 1, "entries": [[3, 0, 0], [0, 2, 0], [0, 0, 1]]}"#,
    )
    .unwrap();
    let o = snum(d, &["snumbers", "--matrix", "d.json", "--scale", "c"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        String::from_utf8_lossy(&o.stdout),
        "m,scale,lower,upper,exact\n1,c,6,6,true\n2,c,3,3,true\n3,c,1,1,true\n"
    );
    let o = snum(d, &["oracle", "gelfand", "--matrix", "d.json", "--m", "2", "--restarts", "4"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["upper"].as_f64().unwrap() - 3.0).abs() < 1e-9);
    let o = snum(d, &["oracle", "pi2", "--matrix", "d.json", "--restarts", "2"]);
    assert_eq!(code(&o), 0);
}

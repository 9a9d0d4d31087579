use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn switchctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_switchctl")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn model_file(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

const TWO_MODES: &str = r#"{"state_dim": 2, "control_dim": 1, "modes": ["a", "b"],
 "rates": {"a": 1, "b": "1/2"}, "transition": [[0, 1], [1, 0]],
 "A": {"a": [[0, 0], [1, 0]], "b": [[0, 0], [0, 0]]}, "B": [[1], [0]],
 "max_jumps": 2, "horizon": 1}"#;

#[test]
fn validate_accepts_a_good_file() {
    let f = model_file(TWO_MODES);
    let out = switchctl(&["validate", "--model", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_json_exits_2() {
    let f = model_file("{\"state_dim\": 2,");
    let out = switchctl(&["validate", "--model", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_transition_row_exits_1() {
    let f = model_file(&TWO_MODES.replace("[[0, 1], [1, 0]]", "[[0, 1], [1, 1]]"));
    let out = switchctl(&["validate", "--model", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["validation"]["ok"], false);
    let issues = v["validation"]["issues"].as_array().unwrap();
    assert!(issues.iter().any(|i| i["message"] == "transition row not stochastic"));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(switchctl(&["analyze", "--builtin", "example1", "--bogus"]).status.code(), Some(2));
}

#[test]
fn analyze_example1() {
    let out = switchctl(&["analyze", "--builtin", "example1", "--max-jumps", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let a = &v["analysis"];
    assert_eq!(a["ker_b_star"]["dim"], 2);
    assert_eq!(a["chain"]["dims_by_level"], serde_json::json!([[0, 0], [1, 1], [2, 2]]));
    assert_eq!(a["backend"], "exact");
}

#[test]
fn analyze_float_backend_agrees() {
    let out = switchctl(&["analyze", "--builtin", "operon", "--backend", "float"]);
    assert_eq!(out.status.code(), Some(0));
    let exact = json(&switchctl(&["analyze", "--builtin", "operon"]));
    let float = json(&out);
    assert_eq!(exact["analysis"]["chain"]["dims_by_level"], float["analysis"]["chain"]["dims_by_level"]);
}

#[test]
fn witness_exit_codes() {
    let ok = switchctl(&["witness", "--builtin", "example1", "--prefix", "0,1", "--level", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(json(&ok)["witness"]["evaluations"].is_array());
    // V^0 is trivial, so no witness lives there.
    assert_eq!(switchctl(&["witness", "--builtin", "example1", "--level", "0"]).status.code(), Some(3));
    // A self-transition is not a possible jump.
    assert_eq!(switchctl(&["witness", "--builtin", "example1", "--prefix", "0,0"]).status.code(), Some(1));
    assert_eq!(switchctl(&["witness", "--builtin", "example1", "--level", "4"]).status.code(), Some(1));
}

#[test]
fn simulate_prints_one_line_per_path() {
    let out = switchctl(&["simulate", "--builtin", "example1", "--paths", "3", "--x0", "1,0,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["path"], i);
    }
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--builtin", "operon", "--paths", "5", "--seed", "11", "--x0", "1,1,1"];
    assert_eq!(switchctl(&args).stdout, switchctl(&args).stdout);
}

#[test]
fn duality_check_passes_on_example1() {
    let out = switchctl(&[
        "duality-check", "--builtin", "example1", "--prefix", "0,1", "--level", "1", "--paths", "5000",
        "--control", "const:1,-1",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["duality"]["pass"], true);
}

#[test]
fn report_operon_flags() {
    let out = switchctl(&["report", "--builtin", "operon", "--paths", "2000"]);
    assert_eq!(out.status.code(), Some(0));
    let flags = &json(&out)["flags"];
    assert_eq!(flags["null_controllable_from_initial_mode"], true);
    assert_eq!(flags["sufficient_condition_holds"], false);
    assert_eq!(flags["obstruction"]["mode"], "e3");
    assert_eq!(flags["obstruction"]["equals_ker_b_star"], true);
    assert_eq!(flags["witness_found"], false);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = switchctl(&["analyze", "--builtin", "example1", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(v["analysis"].is_object());
}

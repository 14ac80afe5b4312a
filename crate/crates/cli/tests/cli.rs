use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data");
    dir.join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omega-sg"))
        .args(args)
        .env_remove("OMEGA_SG_CAP")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn backward_shift_fails_with_witness() {
    let out = run(&["--json", "check", &data("backward_shift.json")]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["verdict"], "fails");
    assert!(v["witness"]["cycle_weight"].as_i64().unwrap() >= 1);
    assert!(out.stderr.is_empty());
}

#[test]
fn nilpotent_exponential_is_exact() {
    let out = run(&[
        "--json",
        "exp",
        &data("nilpotent_B.json"),
        &data("ones.json"),
        "--t",
        "2",
        "--n",
        "2",
        "--eps",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["values"], serde_json::json!(["3", "1"]));
    assert_eq!(v["certified_error"], serde_json::json!(["0", "0"]));
    assert_eq!(v["nilpotent"], true);
}

#[test]
fn zero_operator_leaves_vector_unchanged() {
    let out = run(&[
        "--json",
        "exp",
        &data("zero.json"),
        &data("ones.json"),
        "--t",
        "5",
        "--n",
        "3",
        "--eps",
        "1e-9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["values"], serde_json::json!(["1", "1", "1"]));
}

#[test]
fn cesaro_of_nilpotent_b() {
    // C_t = id + (t/2) B, so at t = 2 on the ones vector the first coordinate is 2
    let out = run(&[
        "--json",
        "cesaro",
        &data("nilpotent_B.json"),
        &data("ones.json"),
        "--t",
        "2",
        "--n",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["values"], serde_json::json!(["2"]));
}

#[test]
fn float_view_adds_decimals() {
    let out = run(&[
        "--json",
        "exp",
        &data("identity.json"),
        &data("e1.json"),
        "--t",
        "1",
        "--n",
        "1",
        "--float",
    ]);
    let v = json(&out);
    assert!(v["decimal"][0].as_str().unwrap().starts_with("2.718281828"));
}

#[test]
fn negative_time_needs_the_flag() {
    let base = [
        "exp",
        &data("identity.json"),
        &data("e1.json"),
        "--t",
        "-1/2",
        "--n",
        "1",
    ]
    .map(String::from);
    let args: Vec<&str> = base.iter().map(String::as_str).collect();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    let mut with_flag = args.clone();
    with_flag.push("--allow-negative");
    assert_eq!(run(&with_flag).status.code(), Some(0));
}

#[test]
fn evaluation_on_failing_operator_reports_the_certificate() {
    let out = run(&[
        "--json",
        "exp",
        &data("backward_shift.json"),
        &data("ones.json"),
        "--t",
        "1",
        "--n",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["verdict"], "fails");
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_operator_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"n0": 1, "period": 1, "pattern": [[{"offset": 1, "coeff": "one"}]], "exceptional_rows": {}}"#,
    )
    .unwrap();
    let out = run(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("pattern[0][0].coeff"), "{err}");

    std::fs::write(
        &path,
        "{\"n0\": 1,\n \"period\": 1,\n \"pattern\": [[{\"ofset\": 1}]]}",
    )
    .unwrap();
    let out = run(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["exp", &data("zero.json")]).status.code(), Some(2));
    assert_eq!(
        run(&["check", "/nonexistent/op.json"]).status.code(),
        Some(2)
    );
    let out = run(&[
        "exp",
        &data("zero.json"),
        &data("ones.json"),
        "--t",
        "abc",
        "--n",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resource_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("band.json");
    std::fs::write(
        &path,
        r#"{"n0": 1, "period": 1, "pattern": [[{"offset": -1, "coeff": "1"}, {"offset": 0, "coeff": "1"}]], "exceptional_rows": {}}"#,
    )
    .unwrap();
    let args = [
        "probe",
        path.to_str().unwrap(),
        "--row",
        "20",
        "--m",
        "100",
        "--kmax",
        "10",
    ];
    let capped = Command::new(env!("CARGO_BIN_EXE_omega-sg"))
        .args(args)
        .env("OMEGA_SG_CAP", "3")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(3));
    assert_eq!(run(&args).status.code(), Some(0));
}

#[test]
fn probe_finds_backward_shift_witness() {
    let out = run(&[
        "--json",
        "probe",
        &data("backward_shift.json"),
        "--row",
        "1",
        "--m",
        "4",
        "--kmax",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let w = &json(&out)["witness"];
    assert_eq!((w["k"].as_u64(), w["column"].as_u64()), (Some(4), Some(5)));
    assert_eq!(w["value"], "1");
}

#[test]
fn check_reports_requested_rows() {
    let out = run(&[
        "--json",
        "check",
        &data("nilpotent_B.json"),
        "--rows",
        "1,4",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], "generates");
    assert_eq!(v["m_table"]["1"], 2);
    assert_eq!(v["m_table"]["4"], 4);
    assert!(v["m_table"].get("2").is_none());
}

#[test]
fn verify_is_reproducible_and_writes_junit() {
    let dir = tempfile::tempdir().unwrap();
    let junit = dir.path().join("report.xml");
    let args = [
        "--json",
        "verify",
        &data("forward_shift.json"),
        "--seed",
        "7",
        "--trials",
        "4",
        "--junit",
        junit.to_str().unwrap(),
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let v = json(&first);
    assert_eq!(v["passed"], true);
    assert_eq!(v["reports"].as_array().unwrap().len(), 9);
    let xml = std::fs::read_to_string(&junit).unwrap();
    assert!(xml.contains("<testsuite") && xml.contains("failures=\"0\""));
}

#[test]
fn verify_on_failing_operator_exits_1() {
    let out = run(&["verify", &data("backward_shift.json"), "--trials", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corpus_replays_every_entry() {
    let out = run(&["--json", "corpus"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["entries"].as_array().unwrap().len(), 7);

    let one = run(&["--json", "corpus", "--id", "smooth_shift"]);
    assert_eq!(json(&one)["entries"][0]["id"], "smooth_shift");
    assert_eq!(run(&["corpus", "--id", "nope"]).status.code(), Some(2));
}

#[test]
fn text_output_is_not_json() {
    let out = run(&["check", &data("identity.json")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("generates"));
    assert!(serde_json::from_str::<Value>(&text).is_err());
}

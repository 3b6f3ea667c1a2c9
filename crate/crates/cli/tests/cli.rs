use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renyi-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn campaign_reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.json"), path(dir.path(), "b.json"));
    let run = |out: &str, serial: bool| {
        let mut args = vec!["conjecture", "c2", "--trials", "8", "--seed", "5", "--alpha-grid", "0.5,1.5,3", "--out", out];
        if serial {
            args.push("--serial");
        }
        assert!(lab(&args).status.success());
    };
    run(&a, false);
    run(&b, true);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let meta: Value = serde_json::from_str(&fs::read_to_string(path(dir.path(), "a.meta.json")).unwrap()).unwrap();
    assert!(meta["wall_time_s"].is_number());
    let report: Value = serde_json::from_str(&fs::read_to_string(&a).unwrap()).unwrap();
    assert!(report.get("metadata").is_none());
    assert_eq!(report["aggregate"]["trials"], 8);
}

#[test]
fn csv_has_one_line_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "rows.csv");
    let out = lab(&["conjecture", "unitary", "--trials", "4", "--csv", &csv]);
    let report = json_of(&out);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("trial,seed,d_in,d_out,label,alpha,beta,margin"));
    assert_eq!(text.lines().count() as u64, report["aggregate"]["rows"].as_u64().unwrap() + 1);
}

#[test]
fn exit_codes_follow_gating() {
    // the A-side campaign is evidence only, so violations never fail the run
    let a_side = lab(&["conjecture", "c1", "--trials", "30", "--seed", "32", "--alpha-grid", "2"]);
    assert!(a_side.status.success());
    let control = lab(&["conjecture", "c1", "--side", "b", "--trials", "30"]);
    assert!(control.status.success());
    let tight = lab(&["verify", "suite", "--trials", "2", "--tolerance", "1e-15"]);
    assert_eq!(tight.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&tight.stderr).contains("FAIL"));
    let bad = lab(&["conjecture", "c1", "--dims", "2,2"]);
    assert_eq!(bad.status.code(), Some(2));
    let von_neumann = lab(&["conjecture", "c2", "--alpha-grid", "1.0", "--trials", "1"]);
    assert_eq!(von_neumann.status.code(), Some(2));
}

#[test]
fn verify_suite_is_green() {
    let out = lab(&["verify", "suite", "--trials", "3"]);
    let report = json_of(&out);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.iter().filter(|c| c["gated"] == true).all(|c| c["passed"] == true));
}

#[test]
fn eval_cmi_of_a_sampled_state() {
    let dir = tempfile::tempdir().unwrap();
    let state = path(dir.path(), "s.json");
    assert!(lab(&["sample", "state", "--dims", "2,2,2", "--seed", "4", "--out", &state]).status.success());
    let v = json_of(&lab(&["eval", "cmi", "--in", &state, "--alpha", "1.5"]));
    for k in ["sibson", "unoptimized", "sandwiched", "von_neumann"] {
        assert!(v[k].as_f64().unwrap() >= -1e-10, "{k}: {v}");
    }
    // the optimized form never exceeds the unoptimized one
    assert!(v["sibson"].as_f64().unwrap() <= v["unoptimized"].as_f64().unwrap() + 1e-10);
    let near = json_of(&lab(&["eval", "cmi", "--in", &state, "--alpha", "1.0001"]));
    assert!((near["sibson"].as_f64().unwrap() - near["von_neumann"].as_f64().unwrap()).abs() < 1e-3);
    let relabeled = json_of(&lab(&["eval", "cmi", "--in", &state, "--alpha", "1.5", "--labels", "B,A,C"]));
    assert!((relabeled["von_neumann"].as_f64().unwrap() - v["von_neumann"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn eval_instance_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let inst = path(dir.path(), "i.json");
    assert!(lab(&["sample", "instance", "--d-in", "3", "--d-out", "2", "--seed", "9", "--out", &inst]).status.success());
    let d = json_of(&lab(&["eval", "delta", "--in", &inst]));
    let dvn = d["delta_vn"].as_f64().unwrap();
    assert!((dvn - d["rewrite"].as_f64().unwrap()).abs() < 1e-10);
    let small = json_of(&lab(&["eval", "dalpha", "--in", &inst, "--alpha", "0.5"]));
    let large = json_of(&lab(&["eval", "dalpha", "--in", &inst, "--alpha", "2"]));
    assert_eq!(small["delta_vn"].as_f64().unwrap(), dvn);
    assert!(small["delta_alpha"].as_f64().unwrap().is_finite() && large["delta_tilde_alpha"].as_f64().unwrap().is_finite());
    let r = json_of(&lab(&["eval", "remainder", "--kind", "monotonicity", "--in", &inst]));
    assert!(r["margin"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn measure_discord_writes_a_result() {
    let dir = tempfile::tempdir().unwrap();
    let (state, out) = (path(dir.path(), "ab.json"), path(dir.path(), "m.json"));
    assert!(lab(&["sample", "state", "--dims", "2,2", "--seed", "2", "--out", &state]).status.success());
    let run = lab(&[
        "measure", "discord", "--in", &state, "--alpha", "1.5", "--restarts", "2", "--budget", "1500", "--seed", "1", "--out", &out,
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["measure"], "discord");
    assert!(v["value"].as_f64().unwrap() >= -1e-9);
    assert_eq!(v["argmin"]["kind"], "povm");
}

#[test]
fn malformed_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    fs::write(&bad, r#"{"dims":[2],"labels":["A"],"matrix":[[[1,0],[0,0]],[[0,0],[1,0]]]}"#).unwrap();
    let out = lab(&["measure", "squashed", "--in", &bad, "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

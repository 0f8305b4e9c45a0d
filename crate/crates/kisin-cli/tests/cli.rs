//! End-to-end tests of the binary: exit codes, schema diagnostics,
//! determinism, batch mode.

use serde_json::{json, Value};
use std::process::Command;

fn run(input: &Value, extra: &[&str]) -> (Value, i32, String) {
    let dir = std::env::temp_dir().join(format!(
        "kisin-cli-test-{}-{}",
        std::process::id(),
        rand_suffix()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    let in_path = dir.join("in.json");
    std::fs::write(&in_path, serde_json::to_string(input).unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kisin"))
        .arg("--input")
        .arg(&in_path)
        .args(extra)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let parsed = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    let code = out.status.code().unwrap_or(-1);
    std::fs::remove_dir_all(&dir).ok();
    (parsed, code, stdout)
}

fn rand_suffix() -> u64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap()
        .subsec_nanos() as u64
}

fn module_input(a: Value, rank: u64) -> Value {
    json!({
        "p": 2, "N": 4, "M": 16,
        "P": [2, 1],
        "rank": rank,
        "A": a,
        "h": 1
    })
}

#[test]
fn validate_tate_twist_module() {
    // A = [P], h = 1: exit 0 with V = [1]
    let job = json!({
        "command": "validate",
        "input": module_input(json!([[[2, 1]]]), 1),
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 0);
    assert_eq!(report["status"], "ok");
    assert_eq!(report["result"]["valid"], true);
    let v00 = &report["result"]["V"][0][0]["coeffs"];
    assert_eq!(v00[0][0], 1);
    for i in 1..16 {
        assert_eq!(v00[i][0], 0);
    }
}

#[test]
fn validate_height_violation_exits_2() {
    // A = [P²] at h = 1: mathematical failure with a height witness
    let job = json!({
        "command": "validate",
        "input": module_input(json!([[[4, 4, 1]]]), 1),
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 2);
    assert_eq!(report["status"], "math-error");
    let err = report["error"].as_str().unwrap();
    assert!(err.contains("height"), "witnessed height error: {err}");
}

#[test]
fn malformed_json_exits_4() {
    let dir = std::env::temp_dir().join(format!("kisin-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let in_path = dir.join("in.json");
    std::fs::write(&in_path, "{ not json").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kisin"))
        .arg("--input")
        .arg(&in_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn missing_p_field_names_it() {
    let job = json!({
        "command": "validate",
        "input": {"p": 2, "N": 4, "M": 16, "rank": 1, "A": [[[2, 1]]], "h": 1},
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 4);
    assert!(report["error"].as_str().unwrap().contains("'P'"));
}

#[test]
fn unknown_fields_warn_but_pass() {
    let mut input = module_input(json!([[[2, 1]]]), 1);
    input["future_knob"] = json!(true);
    let job = json!({"command": "classify", "input": input});
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["multiplicative"], true);
    let warnings = report["warnings"].as_array().unwrap();
    assert!(warnings
        .iter()
        .any(|w| w.as_str().unwrap().contains("future_knob")));
}

#[test]
fn reports_are_deterministic() {
    let job = json!({
        "command": "breuil",
        "input": {
            "p": 2, "N": 6, "M": 48, "P": [2, 1],
            "rank": 1, "A": [[[2, 1]]], "h": 1
        },
        "options": {"m_n": 32}
    });
    let (_, c1, text1) = run(&job, &[]);
    let (_, c2, text2) = run(&job, &[]);
    assert_eq!(c1, 0);
    assert_eq!(c2, 0);
    assert_eq!(text1, text2, "identical descriptor, identical report bytes");
}

#[test]
fn batch_preserves_order_and_worst_exit() {
    let good = json!({"command": "validate", "input": module_input(json!([[[2, 1]]]), 1)});
    let bad = json!({"command": "validate", "input": module_input(json!([[[4, 4, 1]]]), 1)});
    let batch = json!({"jobs": [good, bad]});
    let (report, code, _) = run(&batch, &["--jobs", "2"]);
    assert_eq!(code, 2, "worst outcome wins");
    let reports = report["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["status"], "ok");
    assert_eq!(reports[1]["status"], "math-error");
}

#[test]
fn demo_2adic_certificate() {
    let job = json!({
        "command": "demo-2adic",
        "input": {"p": 2, "N": 6, "M": 64, "P": [2, 1]},
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 0);
    let r = &report["result"];
    assert_eq!(r["mod2"]["valuation"], 1);
    assert_eq!(r["mod2"]["vanishes"], true);
    assert_eq!(r["mod4"]["dp_coordinate_index"], 2);
    assert_eq!(r["mod4"]["nonzero"], true);
    assert_eq!(r["eff_N_used"], 2);
}

#[test]
fn output_file_is_written() {
    let dir = std::env::temp_dir().join(format!("kisin-cli-out-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let in_path = dir.join("in.json");
    let out_path = dir.join("report.json");
    let job = json!({"command": "classify", "input": module_input(json!([[[2, 1]]]), 1)});
    std::fs::write(&in_path, serde_json::to_string(&job).unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kisin"))
        .arg("--input")
        .arg(&in_path)
        .arg("--output")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["result"]["nilpotent"], true);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn homcount_and_trivialize_commands() {
    let hom = json!({
        "command": "homcount",
        "input": {
            "p": 2, "N": 1, "M": 8, "P": [2, 1],
            "rank": 1, "A": [[[1]]], "h": 1,
            "exponents": [1]
        },
        "options": {"window": 12}
    });
    let (report, code, _) = run(&hom, &[]);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["count"], 2);
    assert_eq!(report["result"]["ring_too_small"], false);
    let triv = json!({
        "command": "trivialize",
        "input": module_input(json!([[[1, 1]]]), 1),
        "options": {"budget": 2}
    });
    let (report, code, _) = run(&triv, &[]);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["residual_identity"], true);
}

#[test]
fn schema_diagnostics_name_paths() {
    // wrong matrix shape
    let job = json!({
        "command": "validate",
        "input": {"p": 2, "N": 4, "M": 16, "P": [2, 1], "rank": 2,
                  "A": [[[1]]], "h": 1},
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 4);
    assert!(report["error"].as_str().unwrap().contains("'A'"));
    // non-integer coefficient
    let job = json!({
        "command": "validate",
        "input": {"p": 2, "N": 4, "M": 16, "P": [2, 1], "rank": 1,
                  "A": [[["x"]]], "h": 1},
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 4);
    assert!(report["error"].as_str().unwrap().contains("A[0][0]"));
    // unknown command
    let job = json!({"command": "frobnicate", "input": {}});
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 4);
    assert!(report["error"].as_str().unwrap().contains("frobnicate"));
}

#[test]
fn extension_field_descriptor() {
    // W(F_4) module with coordinate-vector coefficients
    let job = json!({
        "command": "classify",
        "input": {"p": 2, "k": {"r": 2}, "N": 4, "M": 16,
                  "P": [[2, 0], [1, 0]],
                  "rank": 1, "A": [[ [[0, 1]] ]], "h": 1},
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 0);
    assert_eq!(report["result"]["etale"], true);
    assert_eq!(report["result"]["unipotent"], true);
}

#[test]
fn transport_exact_command() {
    let job = json!({
        "command": "transport-exact",
        "input": {
            "p": 2, "N": 6, "M": 32, "P": [2, 1],
            "sub": {"rank": 1, "A": [[[1]]]},
            "mid": {"rank": 2, "A": [[[1], [0, 1]], [[0], [2, 1]]]},
            "quotient": {"rank": 1, "A": [[[2, 1]]]},
            "iota": [[[1]], [[0]]],
            "pi": [[[0], [1]]]
        }
    });
    let (report, code, _) = run(&job, &[]);
    assert_eq!(code, 0, "report: {report}");
    assert_eq!(report["result"]["pass"], true);
}

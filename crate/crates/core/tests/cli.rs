use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;

fn pqpair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pqpair")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn catalog_list_prints_five_names() {
    let out = pqpair(&["catalog", "--list"]);
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = String::from_utf8(out.stdout).unwrap().lines().map(str::to_string).collect();
    assert_eq!(names, ["scalar_exact", "abelian_diag", "irregular_2x2", "regular_fuchsian", "resonant_regular"]);
}

#[test]
fn verify_scalar_entry() {
    let out = pqpair(&["verify", "--model", "scalar_exact"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["max_residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["points"].as_array().unwrap().len(), 21);
}

#[test]
fn seed_then_evolve_irregular_entry() {
    let dir = tempfile::tempdir().unwrap();
    let seed = pqpair(&["seed", "--model", "irregular_2x2", "--order", "10"]);
    assert_eq!(seed.status.code(), Some(0));
    assert!(stdout_json(&seed)["max_residual"].as_f64().unwrap() < 1e-11);

    let out_dir = dir.path().join("run");
    let run = pqpair(&["evolve", "--model", "irregular_2x2", "--order", "10", "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let (header, rows) = pqpair::report::read_csv(&csv).unwrap();
    let f_cols: Vec<usize> = (0..header.len()).filter(|&k| header[k].starts_with("F[")).collect();
    assert_eq!(f_cols.len(), 12);
    let max_f = rows.iter().flat_map(|r| f_cols.iter().map(move |&k| r[k])).fold(0.0, f64::max);
    assert!(max_f < 1e-8);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary, stdout_json(&run));
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let d = dir.path().join(k.to_string());
        let out = pqpair(&["evolve", "--model", "regular_fuchsian", "--steps", "100", "--out-dir", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        texts.push(std::fs::read(d.join("trajectory.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn export_and_reload_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let out = pqpair(&["catalog", "--export", "resonant_regular", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let seed = pqpair(&["seed", "--model", path.to_str().unwrap(), "--order", "8", "--regular"]);
    assert_eq!(seed.status.code(), Some(0));
    let v = stdout_json(&seed);
    assert!(v["max_log_coeff"].as_f64().unwrap() > 1e-6);
}

#[test]
fn conserve_and_recompose() {
    let out = pqpair(&["conserve", "--model", "regular_fuchsian", "--steps", "200"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_json(&out)["max_drift"].as_f64().unwrap() < 1e-8);
    let out = pqpair(&["recompose", "--model", "regular_fuchsian", "--lambda", "0.1", "--order", "6"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_json(&out)["at_x0"]["decay_slope"].as_f64().unwrap() >= 5.5);
}

#[test]
fn error_exit_codes() {
    assert_eq!(pqpair(&["recompose", "--model", "irregular_2x2", "--lambda", "0.1"]).status.code(), Some(2));
    assert_eq!(pqpair(&["verify", "--model", "no_such_entry"]).status.code(), Some(2));
    assert_eq!(pqpair(&["catalog", "--export", "nope"]).status.code(), Some(2));
    assert_eq!(pqpair(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pqpair(&["seed"]).status.code(), Some(2));
    // A failed check, not a usage error.
    let strict = pqpair(&["--f-tol", "1e-30", "evolve", "--model", "irregular_2x2", "--steps", "100"]);
    assert_eq!(strict.status.code(), Some(1));
}

const VALID: &str = r#"{"dimension": 2, "m": 0, "n": -2, "state": ["u"], "x0": 0, "u0": ["0.1"],
  "vector_field": ["1"], "P": {"0": [["u", "0"], ["0", "1"]]},
  "Q": {"-2": [["1", "0"], ["0", "-1"]], "-1": [["0.5", "0"], ["0", "0.25"]]}}"#;

fn write_doc(dir: &Path, text: &str) -> String {
    let p = dir.join("doc.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn valid_document_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_doc(dir.path(), VALID);
    assert_eq!(pqpair(&["seed", "--model", &p, "--order", "4"]).status.code(), Some(0));
}

#[derive(Debug, Clone)]
enum Damage {
    Truncate(usize),
    DropKey(usize),
    Replace(usize, Value),
    BadExpression(String),
}

fn damage() -> impl Strategy<Value = Damage> {
    let junk = prop_oneof![
        Just(Value::Null),
        Just(Value::from(-3)),
        Just(Value::from("two")),
        Just(serde_json::json!([["1"]])),
        Just(serde_json::json!({"x": 1})),
        Just(Value::from(2.5)),
    ];
    prop_oneof![
        (1usize..VALID.len() - 1).prop_map(Damage::Truncate),
        (0usize..9).prop_map(Damage::DropKey),
        ((0usize..9), junk).prop_map(|(k, v)| Damage::Replace(k, v)),
        prop_oneof![Just("u +"), Just("(u"), Just("u ** 2"), Just("v"), Just("1/"), Just("u $ 2"), Just("")]
            .prop_map(|s| Damage::BadExpression(s.to_string())),
    ]
}

const KEYS: [&str; 9] = ["dimension", "m", "n", "state", "x0", "u0", "vector_field", "P", "Q"];

fn apply(d: &Damage) -> String {
    let mut v: Value = serde_json::from_str(VALID).unwrap();
    match d {
        Damage::Truncate(k) => return VALID[..*k].to_string(),
        Damage::DropKey(k) => {
            v.as_object_mut().unwrap().remove(KEYS[*k]);
        }
        Damage::Replace(k, j) => {
            v[KEYS[*k]] = j.clone();
        }
        Damage::BadExpression(s) => {
            v["Q"]["-1"][0][1] = Value::from(s.as_str());
        }
    }
    v.to_string()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn malformed_documents_never_exit_zero(d in damage()) {
        // Any number is a valid x0, any nonpositive m and negative n too.
        let still_valid = match &d {
            Damage::Replace(4, v) => v.is_number(),
            Damage::Replace(1, v) => v.as_i64().is_some_and(|m| m <= 0),
            Damage::Replace(2, v) => v.as_i64().is_some_and(|n| n < 0),
            _ => false,
        };
        prop_assume!(!still_valid);
        let text = apply(&d);
        prop_assume!(serde_json::from_str::<Value>(&text).ok() != serde_json::from_str::<Value>(VALID).ok());
        let dir = tempfile::tempdir().unwrap();
        let p = write_doc(dir.path(), &text);
        for cmd in ["seed", "verify"] {
            let out = pqpair(&[cmd, "--model", &p]);
            prop_assert_ne!(out.status.code(), Some(0), "{:?} accepted by {}", d, cmd);
        }
    }
}

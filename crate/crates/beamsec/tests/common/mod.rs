#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Map, Value};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_beamsec"))
}

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn config_path(name: &str) -> PathBuf {
    crate_dir().join("configs").join(name)
}

/// `small.json` with `patch` merged in at the top level.
pub fn small_config(patch: Value) -> Value {
    let text = std::fs::read_to_string(config_path("small.json")).unwrap();
    let mut base: Value = serde_json::from_str(&text).unwrap();
    merge(&mut base, patch);
    base
}

pub fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

pub fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

pub fn run(verb: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(verb)
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

/// Smaller verification suites for test runs.
pub fn quick_verify() -> Value {
    json!({ "verify": { "lemma_samples": 20000, "rotation_trials": 20, "rotation_samples": 200,
                        "exclusion_instances": 6, "oracle_instances": 8, "oracle_iters": 20000 } })
}

fn cell(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = s.parse::<u64>() {
        return json!(i);
    }
    if let Ok(f) = s.parse::<f64>() {
        return json!(f);
    }
    Value::String(s.to_string())
}

/// CSV rows as JSON objects, with empty cells as null.
pub fn read_csv(path: &Path) -> Vec<Value> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let m: Map<String, Value> = headers.iter().zip(rec.iter()).map(|(h, v)| (h.to_string(), cell(v))).collect();
            Value::Object(m)
        })
        .collect()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn schema(name: &str) -> jsonschema::Validator {
    let s = read_json(&crate_dir().join("schemas").join(format!("{name}.schema.json")));
    jsonschema::validator_for(&s).unwrap()
}

pub fn assert_valid(validator: &jsonschema::Validator, value: &Value, what: &str) {
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{what}: {errors:?}");
}

/// File contents with the named CSV column blanked out.
pub fn without_column(path: &Path, column: &str) -> String {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    let idx = headers.iter().position(|h| h == column);
    let mut out = String::new();
    out.push_str(&headers.iter().collect::<Vec<_>>().join(","));
    out.push('\n');
    for rec in r.records() {
        let rec = rec.unwrap();
        let cells: Vec<&str> = rec.iter().enumerate().map(|(i, c)| if Some(i) == idx { "" } else { c }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

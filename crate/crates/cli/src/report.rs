//! Deterministic JSON reports.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "kummerwitt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The outcome of one task.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub task: String,
    pub verdict: bool,
    /// Lines for the human summary.
    pub summary: Vec<String>,
    pub result: Value,
}

/// SHA-256 of the compact serialization, as lowercase hex.
pub fn digest(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("values serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Adds a `run_hash` field computed over every other field.
pub fn seal(mut doc: Map<String, Value>) -> Value {
    doc.remove("run_hash");
    let hash = digest(&Value::Object(doc.clone()));
    doc.insert("run_hash".into(), Value::String(hash));
    Value::Object(doc)
}

/// The document for a single `run`.
pub fn run_document(input: &Value, flags: &Value, report: &Report) -> Value {
    let doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "task": report.task,
        "input": input,
        "flags": flags,
        "verdict": report.verdict,
        "result": report.result,
    });
    match doc {
        Value::Object(map) => seal(map),
        _ => unreachable!(),
    }
}

pub fn to_pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

/// Recomputes the hash of a sealed document.
pub fn check_seal(value: &Value) -> bool {
    let Value::Object(map) = value else {
        return false;
    };
    let Some(Value::String(hash)) = map.get("run_hash") else {
        return false;
    };
    let mut rest = map.clone();
    rest.remove("run_hash");
    digest(&Value::Object(rest)) == *hash
}

//! Browser bindings for the voting protocol: run an election, audit its
//! transcript, and tamper with a transcript to watch the auditor catch it.
//! Everything runs client-side; elections are deterministic in the seed.
//!
//! The exported functions exchange JSON strings so the page needs no
//! generated types. Build with the wasm32-unknown-unknown target and
//! wasm-bindgen (see www/index.html and the repository README).

use serde::Deserialize;
use wasm_bindgen::prelude::*;

use selftally::board::audit;
use selftally::engine::{run, Scenario};
use selftally::group::Group;

/// Election request from the page: a scenario plus a group name.
#[derive(Deserialize)]
struct DemoConfig {
    #[serde(default = "default_group")]
    group: String,
    #[serde(flatten)]
    scenario: Scenario,
}

fn default_group() -> String {
    "test-tiny".to_string()
}

fn resolve_group(name: &str) -> Result<Group, String> {
    Group::by_name(name).ok_or_else(|| format!("unknown group {name:?}"))
}

fn run_election_impl(config_json: &str) -> Result<String, String> {
    let cfg: DemoConfig = serde_json::from_str(config_json).map_err(|e| format!("config: {e}"))?;
    let group = resolve_group(&cfg.group)?;
    let out = run(&group, &cfg.scenario).map_err(|e| e.to_string())?;
    let payload = serde_json::json!({
        "report": out.report,
        "transcript": out.board.to_jsonl(),
    });
    Ok(payload.to_string())
}

fn audit_transcript_impl(jsonl: &str) -> Result<String, String> {
    let report = audit(jsonl).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Flips one hex digit inside the `entry_index`-th entry's payload, leaving
/// everything else (including the recorded seals) untouched.
fn tamper_transcript_impl(jsonl: &str, entry_index: u32) -> Result<String, String> {
    let lines: Vec<&str> = jsonl.lines().collect();
    let entries: Vec<usize> = (0..lines.len())
        .filter(|&i| lines[i].contains("\"kind\":\"entry\""))
        .collect();
    let &target = entries
        .get(entry_index as usize)
        .ok_or_else(|| format!("transcript has only {} entries", entries.len()))?;
    let line = lines[target];
    let markers = [
        "\"y\":\"",
        "\"ballot\":\"",
        "\"c\":\"",
        "\"factor\":\"",
        "\"a1\":\"",
        "\"a\":\"",
    ];
    let at = markers
        .iter()
        .find_map(|m| line.find(m).map(|p| p + m.len()))
        .ok_or("entry has no tamperable field")?;
    let old = line.as_bytes()[at] as char;
    let new = if old == '1' { '2' } else { '1' };
    let mut edited = line.to_string();
    edited.replace_range(at..at + 1, &new.to_string());
    let mut out: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
    out[target] = edited;
    Ok(out.join("\n") + "\n")
}

/// Runs an election from a JSON config
/// `{"group": "...", "n": 3, "votes": [1,0,1], "abort_set": [3], "seed": 7,
///   "misbehaviors": [...]}` and returns
/// `{"report": ..., "transcript": "..."}`.
#[wasm_bindgen]
pub fn run_election(config_json: &str) -> Result<String, JsError> {
    run_election_impl(config_json).map_err(|e| JsError::new(&e))
}

/// Independently re-verifies a JSON Lines transcript and recomputes its
/// tally; returns the audit report as JSON.
#[wasm_bindgen]
pub fn audit_transcript(jsonl: &str) -> Result<String, JsError> {
    audit_transcript_impl(jsonl).map_err(|e| JsError::new(&e))
}

/// Corrupts one payload hex digit of the chosen entry so the audit demo has
/// something to find.
#[wasm_bindgen]
pub fn tamper_transcript(jsonl: &str, entry_index: u32) -> Result<String, JsError> {
    tamper_transcript_impl(jsonl, entry_index).map_err(|e| JsError::new(&e))
}

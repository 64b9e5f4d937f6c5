use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::learner::LearnerState;
use crate::store::StoreError;

fn write_number(out: &mut String, n: &serde_json::Number) {
    if let Some(i) = n.as_i64() {
        write!(out, "{i}").unwrap();
    } else if let Some(u) = n.as_u64() {
        write!(out, "{u}").unwrap();
    } else {
        let f = n.as_f64().expect("json number");
        if f == 0.0 {
            // Collapse -0.0 so equal values render equally.
            out.push_str("0.0000000000000000e0");
        } else {
            write!(out, "{f:.16e}").unwrap();
        }
    }
}

fn write_str(out: &mut String, s: &str) {
    if s.bytes().all(|b| b >= 0x20 && b != b'"' && b != b'\\') {
        out.push('"');
        out.push_str(s);
        out.push('"');
    } else {
        out.push_str(&serde_json::to_string(s).expect("string serializes"));
    }
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => write_str(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            out.push('{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(out, k);
                out.push(':');
                write_value(out, v);
            }
            out.push('}');
        }
    }
}

/// Sorted keys, no whitespace, integers as integers and every other
/// number in 17-significant-digit exponent form.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, StoreError> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v);
    Ok(out)
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// First non-finite float in the state, by field path.
pub fn non_finite_field(state: &LearnerState) -> Option<String> {
    for (t, tm) in state.mastery() {
        for (name, v) in [("m", tm.m), ("alpha_count", tm.alpha_count), ("beta_count", tm.beta_count)] {
            if !v.is_finite() {
                return Some(format!("mastery.{t}.{name}"));
            }
        }
        if tm.recent_solve_times.iter().any(|v| !v.is_finite()) {
            return Some(format!("mastery.{t}.recent_solve_times"));
        }
    }
    for r in state.reviews() {
        if !r.ease_factor.is_finite() {
            return Some(format!("reviews.{}.ease_factor", r.item_id));
        }
    }
    let p = state.preferences();
    for (name, v) in [("self_reported_skill", p.self_reported_skill), ("expertise_rank", p.expertise_rank)] {
        if !v.is_finite() {
            return Some(format!("preferences.{name}"));
        }
    }
    None
}

/// Canonical snapshot bytes and their SHA-256 digest.
pub fn write_snapshot(state: &LearnerState) -> Result<(String, String), StoreError> {
    if let Some(field) = non_finite_field(state) {
        return Err(StoreError::NonFinite(field));
    }
    let bytes = canonical_json(state)?;
    let digest = digest_bytes(bytes.as_bytes());
    Ok((bytes, digest))
}

/// Digest of the canonical form of `state`.
pub fn state_digest(state: &LearnerState) -> String {
    let bytes = canonical_json(state).expect("learner state serializes");
    digest_bytes(bytes.as_bytes())
}

pub fn parse_snapshot(bytes: &str) -> Result<LearnerState, StoreError> {
    Ok(serde_json::from_str(bytes)?)
}

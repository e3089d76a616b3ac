//! Reader and writer for the harmonized OpenLABEL JSON profile.
//!
//! A profile document has a single top-level `openlabel` object with the
//! children `metadata`, `coordinate_systems`, `resources`, `ontologies`
//! (optional), `contexts`, `objects`, `events` and `frames`. Frames are keyed
//! by dense decimal frame ids; per-frame participant state lives under
//! `frames/<n>/objects/<participant>`, with pairwise risk measures nested one
//! level deeper under `pairwise_risk/<target>`.
//!
//! Serialization is canonical: object keys sorted by byte order, floats in
//! their shortest round-trip form, no insignificant whitespace, UTF-8, and a
//! trailing newline. Optional values that are absent are omitted.

mod decode;
mod encode;
mod strict;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::model::{validate_scenario, Scenario, ScenarioMetadata, ValidationReport};

/// File extension for profile documents.
pub const FILE_EXTENSION: &str = ".aveas.json";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error:\n{0}")]
    Schema(ValidationReport),
    #[error("semantic error:\n{0}")]
    Semantic(ValidationReport),
}

impl ParseError {
    /// The violations behind this error, in report form.
    pub fn report(&self) -> ValidationReport {
        match self {
            ParseError::Syntax { line, column, message } => {
                let mut r = ValidationReport::default();
                r.error("$", format!("syntax error at line {line}, column {column}: {message}"));
                r
            }
            ParseError::Schema(r) | ParseError::Semantic(r) => r.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("scenario is invalid:\n{0}")]
    Validation(ValidationReport),
    #[error("non-finite number at {0}")]
    NonFinite(String),
}

fn read_value(bytes: &[u8]) -> Result<Value, ParseError> {
    serde_json::from_slice::<strict::StrictValue>(bytes)
        .map(|v| v.0)
        .map_err(|e| ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
}

/// Parses a profile document and checks every scenario invariant.
pub fn parse(bytes: &[u8]) -> Result<Scenario, ParseError> {
    let scenario = parse_unchecked(bytes)?;
    let report = validate_scenario(&scenario);
    if report.is_valid() {
        Ok(scenario)
    } else {
        Err(ParseError::Semantic(report))
    }
}

/// Structural decoding only; semantic invariants are not checked.
pub fn parse_unchecked(bytes: &[u8]) -> Result<Scenario, ParseError> {
    let value = read_value(bytes)?;
    let mut dec = decode::Decoder::default();
    match dec.document(&value) {
        Some(s) if dec.report.is_valid() => Ok(s),
        _ => Err(ParseError::Schema(dec.report)),
    }
}

/// Structural checks (syntax, types, required keys) reported rather than thrown.
pub fn schema_check(bytes: &[u8]) -> ValidationReport {
    match parse_unchecked(bytes) {
        Ok(_) => ValidationReport::default(),
        Err(e) => e.report(),
    }
}

/// Canonical bytes for a valid scenario.
pub fn serialize(s: &Scenario) -> Result<Vec<u8>, SerializeError> {
    let report = validate_scenario(s);
    if !report.is_valid() {
        return Err(SerializeError::Validation(report));
    }
    Ok(canonical_bytes(&encode::document(s)?))
}

/// Canonical form of an arbitrary JSON value, newline-terminated.
pub fn canonical_bytes(v: &Value) -> Vec<u8> {
    // serde_json's Map is ordered by key and floats print via shortest round-trip.
    let mut out = serde_json::to_vec(v).expect("JSON values always serialize");
    out.push(b'\n');
    out
}

/// Canonical form of any serializable value, newline-terminated.
pub fn to_canonical<T: Serialize>(v: &T) -> Result<Vec<u8>, serde_json::Error> {
    Ok(canonical_bytes(&serde_json::to_value(v)?))
}

/// Canonical single-line JSON without the trailing newline.
pub fn to_canonical_line<T: Serialize>(v: &T) -> Result<String, serde_json::Error> {
    let mut bytes = to_canonical(v)?;
    bytes.pop();
    Ok(String::from_utf8(bytes).expect("serde_json emits UTF-8"))
}

/// Metadata object in profile form, reused by the scenario store index.
pub fn metadata_to_value(m: &ScenarioMetadata) -> Result<Value, SerializeError> {
    encode::metadata(m, "$.metadata")
}

pub fn metadata_from_value(v: &Value) -> Result<ScenarioMetadata, ValidationReport> {
    let mut dec = decode::Decoder::default();
    match dec.metadata(v, "$.metadata") {
        Some(m) if dec.report.is_valid() => Ok(m),
        _ => Err(dec.report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn minimal_document_parses() {
        let doc = fixtures::minimal_document();
        let s = parse(doc.as_bytes()).unwrap();
        assert_eq!(s.participants.len(), 1);
        assert_eq!(s.frames.len(), 1);
        assert!(s.events.is_empty());
    }

    #[test]
    fn gap_in_frame_keys_is_a_schema_error() {
        let doc = fixtures::minimal_document().replace(
            r#""frames":{"0":"#,
            r#""frames":{"2":{"timestamp":0.1,"objects":{}},"0":"#,
        );
        match parse(doc.as_bytes()) {
            Err(ParseError::Schema(r)) => {
                assert!(r.errors().any(|v| v.message.contains("non-dense frame keys")), "{r}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse(b"{\n  \"openlabel\": [1,\n}") {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn schema_check_reports_missing_and_mistyped_fields() {
        let valid = fixtures::minimal_document();
        assert!(schema_check(valid.as_bytes()).is_valid());

        let mut v: Value = serde_json::from_str(&valid).unwrap();
        v["openlabel"].as_object_mut().unwrap().remove("metadata");
        let r = schema_check(&canonical_bytes(&v));
        assert_eq!(r.error_count(), 1, "{r}");
        assert!(r.violations[0].message.contains("missing required key 'metadata'"));

        let mut v: Value = serde_json::from_str(&valid).unwrap();
        v["openlabel"]["frames"]["0"]["objects"]["P1"]["speed"] = Value::String("fast".into());
        let r = schema_check(&canonical_bytes(&v));
        assert_eq!(r.error_count(), 1, "{r}");
        assert_eq!(r.violations[0].path, "$.openlabel.frames.0.objects.P1.speed");
        assert!(r.violations[0].message.contains("expected number"));
        assert!(matches!(parse(&canonical_bytes(&v)), Err(ParseError::Schema(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: Value = serde_json::from_str(&fixtures::minimal_document()).unwrap();
        v["openlabel"]["metadata"]["tagging"] = Value::Bool(true);
        let r = schema_check(&canonical_bytes(&v));
        assert!(r.errors().any(|e| e.message.contains("unknown key 'tagging'")));
    }

    #[test]
    fn semantic_violations_are_reported_after_schema() {
        let mut v: Value = serde_json::from_str(&fixtures::minimal_document()).unwrap();
        v["openlabel"]["metadata"]["scenario_duration"] = Value::from(5.0);
        assert!(schema_check(&canonical_bytes(&v)).is_valid());
        assert!(matches!(parse(&canonical_bytes(&v)), Err(ParseError::Semantic(_))));
    }

    #[test]
    fn serialize_is_canonical_and_newline_terminated() {
        let s = fixtures::following_scenario(5);
        let bytes = serialize(&s).unwrap();
        assert_eq!(*bytes.last().unwrap(), b'\n');
        assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 1);
        let again = serialize(&parse(&bytes).unwrap()).unwrap();
        assert_eq!(bytes, again);
        assert!(std::str::from_utf8(&bytes).unwrap().starts_with("{\"openlabel\":{\"contexts\""));
    }

    #[test]
    fn serialize_rejects_invalid_scenarios() {
        let mut s = fixtures::following_scenario(3);
        s.frames[2].timestamp = s.frames[1].timestamp;
        assert!(matches!(serialize(&s), Err(SerializeError::Validation(_))));
    }

    #[test]
    fn absent_optionals_round_trip_as_absent() {
        let s = fixtures::minimal_scenario();
        let text = String::from_utf8(serialize(&s).unwrap()).unwrap();
        assert!(!text.contains("null"));
        assert!(!text.contains("ontologies"));
        assert!(!text.contains("acceleration"));
        assert_eq!(parse(text.as_bytes()).unwrap(), s);
    }
}

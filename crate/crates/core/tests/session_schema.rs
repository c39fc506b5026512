//! The published session-log schema and the parser agree on field names.

use std::collections::BTreeSet;

use acrank_core::session::parse_session_line;
use acrank_core::synth::{generate, SynthConfig};

fn schema() -> serde_json::Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/session_log.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generated_sessions_use_exactly_the_schema_fields() {
    let s = schema();
    let props: BTreeSet<String> = s["properties"].as_object().unwrap().keys().cloned().collect();
    let required: BTreeSet<String> =
        s["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    assert!(required.is_subset(&props));

    let data = generate(&SynthConfig { sessions: 20, ..SynthConfig::default() }).unwrap();
    for session in &data.sessions {
        let line = session.to_json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let keys: BTreeSet<String> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, props);
        assert_eq!(&parse_session_line(&line).unwrap(), session);
    }
}

#[test]
fn required_fields_are_required_by_the_parser() {
    let full = r#"{"session_id":"s","user_id":"u","ts":1,"impressions":[{"prefix":"h","candidates":["hat"]}],"submitted":"hat","gmv":1.5}"#;
    assert!(parse_session_line(full).is_ok(), "past_queries is optional");
    let v: serde_json::Value = serde_json::from_str(full).unwrap();
    for field in schema()["required"].as_array().unwrap() {
        let mut missing = v.clone();
        missing.as_object_mut().unwrap().remove(field.as_str().unwrap());
        assert!(parse_session_line(&missing.to_string()).is_err(), "{field}");
    }
}

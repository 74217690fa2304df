//! Invocation records embedded in every output file.

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    /// Arguments after the program name, verbatim.
    pub invocation: Vec<String>,
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub inputs: Map<String, Value>,
}

impl Provenance {
    pub fn new(invocation: Vec<String>) -> Self {
        Provenance {
            tool: "manifold-icp",
            version: env!("CARGO_PKG_VERSION"),
            invocation,
            inputs: Map::new(),
        }
    }

    /// Records the SHA-256 of an input file under `key`.
    pub fn with_input(mut self, key: &str, bytes: &[u8]) -> Self {
        self.inputs.insert(key.to_string(), Value::String(sha256_hex(bytes)));
        self
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("provenance serializes")
    }

    /// Single-line form for text formats that only allow comments.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("provenance serializes")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Adds a top-level `provenance` key to a JSON object.
pub fn attach(mut doc: Value, prov: &Provenance) -> Value {
    if let Value::Object(map) = &mut doc {
        map.insert("provenance".into(), prov.to_value());
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn attach_only_touches_objects() {
        let p = Provenance::new(vec!["fit".into()]);
        let doc = attach(serde_json::json!({"a": 1}), &p);
        assert_eq!(doc["provenance"]["invocation"][0], "fit");
        assert_eq!(attach(Value::Null, &p), Value::Null);
    }
}

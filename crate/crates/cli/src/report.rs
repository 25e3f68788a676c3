use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use wmalg_core::weights::FamilySpec;
use wmalg_core::WeightFamily;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: &str, content: &[u8]) -> Self {
        Self {
            path: path.to_string(),
            sha256: hex::encode(Sha256::digest(content)),
        }
    }
}

/// Machine-readable summary of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub weights: FamilySpec,
    pub inputs: Vec<InputDigest>,
    pub outputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub passed: usize,
    pub failed: usize,
    pub timing_ms: f64,
}

impl RunReport {
    pub fn new(command: &str, family: &WeightFamily) -> Self {
        Self {
            command: command.to_string(),
            version: wmalg_core::VERSION.to_string(),
            weights: family.spec(),
            inputs: Vec::new(),
            outputs: Value::Null,
            seed: None,
            passed: 0,
            failed: 0,
            timing_ms: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain finite values only")
    }

    /// The report as JSON with the timing field removed, for comparing runs.
    pub fn without_timing(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("serializable report");
        if let Value::Object(map) = &mut v {
            map.remove("timing_ms");
        }
        v
    }
}

//! Provenance header written at the top of every output.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL: &str = "reachmac";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tool version, seed, run options and input digests. Inputs are labelled
/// by file name only, so outputs do not depend on where the run happened.
#[derive(Debug, Clone)]
pub struct Metadata {
    stage: &'static str,
    seed: u64,
    options: Vec<(&'static str, String)>,
    inputs: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Metadata {
    pub fn new(stage: &'static str, cfg: &RunConfig) -> Self {
        let sexes: Vec<&str> = cfg.sexes.iter().map(|s| s.as_str()).collect();
        Self {
            stage,
            seed: cfg.seed,
            options: vec![
                ("mode", cfg.collector.mode.to_string()),
                ("sexes", sexes.join(",")),
                ("lower_bound_policy", cfg.lower_bound_policy.to_string()),
                ("loocv_scope", cfg.loocv_scope.to_string()),
            ],
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, label: impl Into<String>, bytes: &[u8]) -> &mut Self {
        self.inputs.push((label.into(), sha256_hex(bytes)));
        self
    }

    /// Digest over several named files, e.g. a directory of snapshots.
    pub fn input_set<'a>(&mut self, label: impl Into<String>, files: impl IntoIterator<Item = (&'a str, &'a [u8])>) -> &mut Self {
        let mut h = Sha256::new();
        let mut count = 0;
        for (name, bytes) in files {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
            count += 1;
        }
        let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.push((format!("{} ({count} files)", label.into()), hex));
        self
    }

    /// `#`-prefixed lines for CSV and text outputs.
    pub fn comment_header(&self) -> String {
        let mut out = format!("# {TOOL} {VERSION}\n# stage: {}\n# seed: {}\n", self.stage, self.seed);
        for (k, v) in &self.options {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        for (label, hex) in &self.inputs {
            out.push_str(&format!("# input: {label} sha256:{hex}\n"));
        }
        out
    }

    pub fn json(&self) -> Value {
        let options: serde_json::Map<String, Value> =
            self.options.iter().map(|(k, v)| ((*k).to_string(), json!(v))).collect();
        let inputs: Vec<Value> =
            self.inputs.iter().map(|(label, hex)| json!({ "name": label, "sha256": hex })).collect();
        json!({
            "tool": TOOL,
            "version": VERSION,
            "stage": self.stage,
            "seed": self.seed,
            "options": options,
            "inputs": inputs,
        })
    }
}

//! Run manifests: everything needed to reproduce a command byte-for-byte.

use gatesmith_core::pipeline::PipelineConfig;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
pub struct InputRecord {
    pub path: String,
    pub fnv64: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: PipelineConfig,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Manifest {
        Manifest {
            tool: "gatesmith",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            extra: None,
        }
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            fnv64: format!("{:016x}", fnv64(bytes)),
        });
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Default manifest location: next to the primary output.
    pub fn default_path(primary_output: &Path) -> PathBuf {
        let mut name = primary_output
            .file_name()
            .map(|n| n.to_string_lossy().to_string())
            .unwrap_or_else(|| "run".into());
        name.push_str(".manifest.json");
        primary_output.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(
            path,
            serde_json::to_string_pretty(self).expect("manifest serializes"),
        )
    }
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

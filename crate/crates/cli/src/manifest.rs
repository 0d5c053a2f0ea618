use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

/// Record of one invocation, written as JSON next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub version: String,
    pub threads: usize,
    /// Resolved config; feeding it back to `driftfv run` repeats the run.
    pub config: String,
    pub outputs: Vec<PathBuf>,
    pub timings: Vec<Timing>,
    pub notes: Vec<String>,
}

/// First 40 hex digits of the SHA-256 of `text`.
pub fn run_id(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().take(20).map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: &str, config: String, threads: usize) -> Self {
        RunManifest {
            run_id: run_id(&format!("{command}\n{config}")),
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            config,
            outputs: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn time(&mut self, phase: &str, seconds: f64) {
        self.timings.push(Timing { phase: phase.to_string(), seconds });
    }

    /// Writes the manifest and checks that every listed output exists.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(CliError::Invariant(format!("manifest names missing output {}", missing.display())));
        }
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n").map_err(CliError::io(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_id_is_forty_hex_digits() {
        let id = run_id("abc");
        assert_eq!(id, "ba7816bf8f01cfea414140de5dae2223b00361a3");
        assert_ne!(run_id("abd"), id);
    }

    #[test]
    fn missing_output_is_an_invariant_violation() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("run", String::new(), 1);
        m.outputs.push(dir.path().join("absent.csv"));
        let err = m.write(&dir.path().join("m.json")).unwrap_err();
        assert_eq!(err.exit_code(), 5);
        m.outputs.clear();
        m.write(&dir.path().join("m.json")).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(v["run_id"].as_str().unwrap().len(), 40);
    }
}

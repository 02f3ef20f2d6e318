//! Run manifests: what ran, with which resolved settings, on which inputs.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub tool_version: String,
    /// Every setting the command used, defaults included.
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub timings: Vec<PhaseTiming>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            format_version: 1,
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config).map_err(|e| Error::Internal(e.to_string()))?;
        Ok(())
    }

    /// Records the digest of `path`, and of its label and id sidecars
    /// when they exist.
    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let mut add = |role: String, p: &Path| -> Result<()> {
            let bytes = fs::read(p).map_err(|e| Error::read(p, e))?;
            self.inputs.push(InputDigest {
                role,
                path: p.display().to_string(),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
            Ok(())
        };
        add(role.into(), path)?;
        for (suffix, sidecar) in [("labels", crate::emb::labels_path(path)), ("ids", crate::emb::ids_path(path))] {
            if sidecar.exists() {
                add(format!("{role}.{suffix}"), &sidecar)?;
            }
        }
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Runs `f`, recording its wall-clock time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(PhaseTiming {
            phase: phase.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::write(path, e))
}

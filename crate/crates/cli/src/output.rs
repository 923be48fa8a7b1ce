use std::path::Path;

use anyhow::{Context, Result};
use choquard::io::{field_bytes, write_atomic, Sidecar};
use choquard::{Field, Params};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// A file to be written under the output directory.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: impl Into<String>, text: String) -> Self {
        Artifact {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }

    pub fn json(name: impl Into<String>, value: &impl Serialize) -> Result<Self> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        Ok(Self::text(name, text))
    }

    /// The binary samples and the JSON sidecar of a field dump.
    pub fn field(stem: &str, u: &Field, params: &Params) -> Result<[Self; 2]> {
        Ok([
            Artifact {
                name: format!("{stem}.f64"),
                bytes: field_bytes(u),
            },
            Self::json(format!("{stem}.json"), &Sidecar::of(u, params))?,
        ])
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Hash of a blob in the style of git object ids: the payload is prefixed by
/// `blob <len>\0`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write(dir: &Path, artifact: &Artifact) -> Result<()> {
    let path = dir.join(&artifact.name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    write_atomic(&path, &artifact.bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub input_hash: String,
    pub versions: Versions,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub passed: bool,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Serialize)]
pub struct Versions {
    pub choquard: &'static str,
    pub arch: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Versions {
            choquard: env!("CARGO_PKG_VERSION"),
            arch: std::env::consts::ARCH,
        }
    }
}

/// Hash of the canonical JSON of the command and resolved configuration.
pub fn input_hash(command: &str, config: &RunConfig) -> Result<String> {
    let canonical =
        serde_json::to_vec(&serde_json::json!({ "command": command, "config": config }))?;
    Ok(content_hash(&canonical))
}

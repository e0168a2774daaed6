//! Artifacts, CSV/JSON encoders and run manifests.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, SCHEMA_VERSION};

pub const TOOL: &str = "horolab-cli";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";

/// A named output file held in memory until the run is complete.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the configuration without the worker count, which does not
/// affect results.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.workers = 0;
    sha256_hex(&serde_json::to_vec(&c).expect("config serialises"))
}

/// Values stamped on every artifact.
#[derive(Clone, Debug)]
pub struct Meta {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Meta {
    pub fn of(cfg: &RunConfig) -> Self {
        Self {
            command: cfg.command.name().to_string(),
            seed: cfg.seed,
            config_hash: config_hash(cfg),
        }
    }
}

/// CSV with `#` metadata lines and a header row.
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(meta: &Meta, header: &[&str]) -> Self {
        let mut text = String::new();
        text.push_str(&format!(
            "# {TOOL} {TOOL_VERSION}, horolab {}\n",
            horolab::VERSION
        ));
        text.push_str(&format!("# command: {}\n", meta.command));
        text.push_str(&format!("# seed: {}\n", meta.seed));
        text.push_str(&format!("# config_sha256: {}\n", meta.config_hash));
        text.push_str(&header.join(","));
        text.push('\n');
        Self {
            text,
            width: header.len(),
        }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let cells: Vec<String> = cells.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(cells.len(), self.width);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self, name: &str) -> Artifact {
        Artifact {
            name: name.to_string(),
            bytes: self.text.into_bytes(),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    tool: &'a str,
    tool_version: &'a str,
    library_version: &'a str,
    command: &'a str,
    seed: u64,
    config_sha256: &'a str,
    report: &'a T,
}

/// Schema-versioned JSON report.
pub fn json_report<T: Serialize>(meta: &Meta, name: &str, report: &T) -> Result<Artifact> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        tool: TOOL,
        tool_version: TOOL_VERSION,
        library_version: horolab::VERSION,
        command: &meta.command,
        seed: meta.seed,
        config_sha256: &meta.config_hash,
        report,
    };
    let mut bytes = serde_json::to_vec_pretty(&env)?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: name.to_string(),
        bytes,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub library_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub workers: usize,
    pub config: RunConfig,
    pub artifacts: Vec<ArtifactRecord>,
}

impl Manifest {
    pub fn new(cfg: &RunConfig, artifacts: &[Artifact]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: TOOL.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            library_version: horolab::VERSION.to_string(),
            config_sha256: config_hash(cfg),
            seed: cfg.seed,
            workers: cfg.workers,
            config: cfg.clone(),
            artifacts: artifacts
                .iter()
                .map(|a| ArtifactRecord {
                    name: a.name.clone(),
                    sha256: sha256_hex(&a.bytes),
                    bytes: a.bytes.len(),
                })
                .collect(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Writes the artifacts and their manifest into `dir`.
pub fn write_artifacts(dir: &Path, cfg: &RunConfig, artifacts: &[Artifact]) -> Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let manifest = Manifest::new(cfg, artifacts);
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join(MANIFEST_NAME), bytes)?;
    Ok(manifest)
}

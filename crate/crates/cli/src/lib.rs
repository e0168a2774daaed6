//! Batch front-end for horolab: declarative run configurations, command
//! runners producing CSV/JSON artifacts, manifests, and the invariant suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use anyhow::Result;

pub use commands::{run, RunOutcome};
pub use config::RunConfig;
pub use output::{write_artifacts, Artifact, Manifest};

/// Re-runs the configuration recorded in a manifest. Returns the outcome and
/// the names of artifacts whose hash differs from the recorded one (or that
/// are missing on either side).
pub fn rerun_manifest(manifest: &Manifest) -> Result<(RunOutcome, Vec<String>)> {
    let outcome = run(&manifest.config)?;
    let fresh = Manifest::new(&manifest.config, &outcome.artifacts);
    let mut mismatches = Vec::new();
    if fresh.config_sha256 != manifest.config_sha256 {
        mismatches.push("config_sha256".to_string());
    }
    for rec in &manifest.artifacts {
        if !fresh.artifacts.contains(rec) {
            mismatches.push(rec.name.clone());
        }
    }
    for rec in &fresh.artifacts {
        if !manifest.artifacts.iter().any(|r| r.name == rec.name) {
            mismatches.push(rec.name.clone());
        }
    }
    Ok((outcome, mismatches))
}

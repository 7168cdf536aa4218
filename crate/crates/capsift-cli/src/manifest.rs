//! Run manifests: a small JSON record written next to (or inside) every
//! artifact a command produces, capturing what was run, on what, with
//! which parameters. Timestamps live only here — the artifacts themselves
//! stay byte-deterministic so reruns can be diffed.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub started_unix_ms: u128,
    pub wall_ms: u128,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub parameters: serde_json::Value,
}

/// Tracks one command invocation from start to manifest write.
pub struct RunTimer {
    command: &'static str,
    started_unix_ms: u128,
    started: Instant,
}

impl RunTimer {
    pub fn start(command: &'static str) -> RunTimer {
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        RunTimer { command, started_unix_ms, started: Instant::now() }
    }

    /// Finish the run and write its manifest to `path`.
    pub fn write_manifest(
        &self,
        path: &Path,
        inputs: &[&Path],
        outputs: &[&Path],
        parameters: serde_json::Value,
    ) -> Result<()> {
        let manifest = RunManifest {
            tool: "capsift",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            started_unix_ms: self.started_unix_ms,
            wall_ms: self.started.elapsed().as_millis(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            parameters,
        };
        let mut body = serde_json::to_string_pretty(&manifest)?;
        body.push('\n');
        std::fs::write(path, body)
            .with_context(|| format!("writing manifest {}", path.display()))?;
        Ok(())
    }
}

/// Manifest path for a single-file artifact: `<file>.manifest.json` beside it.
pub fn beside(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

/// Manifest path for a directory artifact: `manifest.json` inside it.
pub fn inside(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

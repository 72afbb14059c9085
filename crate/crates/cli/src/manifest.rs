use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments as received, config-file flags included.
    pub argv: Vec<String>,
    /// Resolved settings after defaults, config and flags.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub wall_clock_seconds: f64,
}

#[derive(Debug)]
pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    started: DateTime<Utc>,
    clock: std::time::Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, argv: &[String]) -> Self {
        Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            started: Utc::now(),
            clock: std::time::Instant::now(),
        }
    }

    pub fn finish(
        self,
        config: serde_json::Value,
        seed: Option<u64>,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> RunManifest {
        RunManifest {
            command: self.command,
            argv: self.argv,
            config,
            seed,
            inputs,
            outputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            wall_clock_seconds: self.clock.elapsed().as_secs_f64(),
        }
    }
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}_manifest.json", self.command));
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(path)
    }
}

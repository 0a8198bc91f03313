//! Run manifests and task-level resume.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub label: String,
    pub seconds: f64,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical TOML rendering of the effective config.
    pub config_hash: String,
    pub subcommand: String,
    pub seed: u64,
    pub parameter_grid: Value,
    /// Files written so far, relative to the output directory.
    pub outputs: Vec<String>,
    pub tasks: Vec<TaskRecord>,
}

/// Hash of the config after defaults are filled in, so that equivalent files
/// hash alike.
pub fn config_hash(cfg: &Config) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest bound to an output directory, rewritten after every task.
#[derive(Debug)]
pub struct Recorder {
    dir: PathBuf,
    manifest: RunManifest,
    previous: Vec<TaskRecord>,
}

impl Recorder {
    pub fn new(dir: &Path, cfg: &Config, subcommand: &str, parameter_grid: Value, resume: bool) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let hash = config_hash(cfg);
        let previous = if resume {
            match std::fs::read_to_string(dir.join(MANIFEST_FILE)) {
                Ok(text) => {
                    let old: RunManifest = serde_json::from_str(&text)?;
                    if old.config_hash == hash && old.subcommand == subcommand {
                        old.tasks
                    } else {
                        Vec::new()
                    }
                }
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
                Err(e) => return Err(e.into()),
            }
        } else {
            Vec::new()
        };
        let rec = Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest {
                config_hash: hash,
                subcommand: subcommand.to_string(),
                seed: cfg.seed,
                parameter_grid,
                outputs: Vec::new(),
                tasks: Vec::new(),
            },
            previous,
        };
        rec.flush()?;
        Ok(rec)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    /// Runs `f` unless a task with this label is recorded from an earlier run
    /// with the same config, in which case its stored result is returned.
    pub fn task<T, F>(&mut self, label: &str, f: F) -> Result<T, CliError>
    where
        T: Serialize + for<'de> Deserialize<'de>,
        F: FnOnce() -> Result<T, CliError>,
    {
        if let Some(pos) = self.previous.iter().position(|t| t.label == label) {
            let record = self.previous.remove(pos);
            if let Ok(value) = serde_json::from_value(record.result.clone()) {
                self.manifest.tasks.push(record);
                self.flush()?;
                return Ok(value);
            }
        }
        let start = Instant::now();
        let value = f()?;
        self.manifest.tasks.push(TaskRecord {
            label: label.to_string(),
            seconds: start.elapsed().as_secs_f64(),
            result: serde_json::to_value(&value)?,
        });
        self.flush()?;
        Ok(value)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), contents)?;
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
        self.flush()
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, &text)
    }

    fn flush(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, self.dir.join(MANIFEST_FILE))?;
        Ok(())
    }
}

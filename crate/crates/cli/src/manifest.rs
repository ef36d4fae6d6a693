//! Run manifest: what went in, what came out, and where a run stopped.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: &str = "semaxes-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    #[serde(flatten)]
    pub file: FileRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub schema_version: u32,
    pub toolkit_version: String,
    pub command: String,
    pub status: Status,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputRecord>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> CliResult<(String, u64)> {
    let bytes = std::fs::read(path).map_err(|e| semaxes_core::Error::Io { path: path.to_path_buf(), source: e })?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Collects manifest entries while a command runs and writes the manifest
/// when it ends, successfully or not.
pub struct Recorder {
    dir: PathBuf,
    manifest: Manifest,
}

impl Recorder {
    pub fn new(dir: &Path, command: &str, config: &impl Serialize) -> CliResult<Self> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Internal(e.to_string()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                schema: MANIFEST_SCHEMA.into(),
                schema_version: MANIFEST_VERSION,
                toolkit_version: semaxes_core::VERSION.into(),
                command: command.into(),
                status: Status::Ok,
                failed_stage: None,
                error: None,
                config,
                inputs: Vec::new(),
                artifacts: Vec::new(),
            },
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let (sha256, bytes) = sha256_file(path)?;
        self.manifest.inputs.push(InputRecord {
            role: role.into(),
            file: FileRecord { path: path.display().to_string(), sha256, bytes },
        });
        Ok(())
    }

    /// Registers files already written to the output directory.
    pub fn artifact(&mut self, name: &str, files: &[&str]) -> CliResult<()> {
        let files = files
            .iter()
            .map(|f| {
                let (sha256, bytes) = sha256_file(&self.dir.join(f))?;
                Ok(FileRecord { path: (*f).to_string(), sha256, bytes })
            })
            .collect::<CliResult<Vec<_>>>()?;
        self.manifest.artifacts.push(Artifact { name: name.into(), files });
        Ok(())
    }

    pub fn finish(mut self, outcome: Result<(), (String, &CliError)>) -> CliResult<Manifest> {
        if let Err((stage, err)) = outcome {
            self.manifest.status = Status::Failed;
            self.manifest.failed_stage = Some(stage);
            self.manifest.error = Some(err.to_string());
        }
        let mut text =
            serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push('\n');
        semaxes_core::report::write_text(self.dir.join(MANIFEST_FILE), &text)?;
        Ok(self.manifest)
    }
}

/// Runs `body` with a recorder for `dir`, tracking the current stage name,
/// and writes the manifest afterwards whatever the outcome.
pub fn record_run(
    dir: &Path,
    command: &str,
    config: &impl Serialize,
    body: impl FnOnce(&mut Recorder, &mut &'static str) -> CliResult<()>,
) -> CliResult<Manifest> {
    crate::stages::ensure_dir(dir)?;
    let mut rec = Recorder::new(dir, command, config)?;
    let mut stage = "load";
    match body(&mut rec, &mut stage) {
        Ok(()) => rec.finish(Ok(())),
        Err(e) => {
            rec.finish(Err((stage.to_string(), &e)))?;
            Err(e)
        }
    }
}

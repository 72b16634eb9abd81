//! Per-run bookkeeping: input digests, output registration and the manifest
//! written at the end of every command.

use std::fs;
use std::path::{Path, PathBuf};

use cptr_core::ingest::ParameterConfig;
use cptr_core::simulate::default_parameters;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub command: String,
    /// Arguments after the program name, as typed.
    pub argv: Vec<String>,
    pub cwd: String,
    pub out_dir: String,
    pub input_dir: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub artifact_version: String,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to `out_dir`.
    pub outputs: Vec<FileDigest>,
    pub notes: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a run manifest: {e}", path.display())))
    }

    /// Identifier derived from everything that determines the outputs.
    pub fn run_id(&self) -> String {
        let key = serde_json::json!({
            "command": self.command,
            "argv": self.argv,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "inputs": self.inputs,
            "artifact_version": self.artifact_version,
        });
        sha256_hex(key.to_string().as_bytes())[..12].to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub struct Context {
    pub command: String,
    pub argv: Vec<String>,
    pub out_dir: PathBuf,
    pub input_dir: PathBuf,
    pub seed: Option<u64>,
    pub zones: Vec<String>,
    config_path: Option<PathBuf>,
    inputs: Vec<FileDigest>,
    outputs: Vec<PathBuf>,
    notes: Vec<String>,
    started_at: String,
}

impl Context {
    pub fn new(
        command: &str,
        argv: Vec<String>,
        out_dir: PathBuf,
        input_dir: Option<PathBuf>,
        seed: Option<u64>,
        zones: Vec<String>,
        config_path: Option<PathBuf>,
    ) -> CliResult<Self> {
        fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
        let input_dir = input_dir.unwrap_or_else(|| out_dir.clone());
        Ok(Context {
            command: command.into(),
            argv,
            out_dir,
            input_dir,
            seed,
            zones,
            config_path,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            started_at: now(),
        })
    }

    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("`{}` is randomized and needs an explicit --seed", self.command)))
    }

    /// Records an input file and its digest; returns the path unchanged.
    pub fn input(&mut self, path: &Path) -> CliResult<PathBuf> {
        let digest = file_digest(path)?;
        let shown = path.display().to_string();
        if !self.inputs.iter().any(|d| d.path == shown) {
            self.inputs.push(FileDigest {
                path: shown,
                sha256: digest,
            });
        }
        Ok(path.to_path_buf())
    }

    /// Loads the parameter config, falling back to the built-in defaults.
    pub fn parameters(&mut self) -> CliResult<ParameterConfig> {
        match self.config_path.clone() {
            Some(p) => {
                self.input(&p)?;
                Ok(ParameterConfig::load(&p)?)
            }
            None => Ok(default_parameters()),
        }
    }

    fn config_hash(&self) -> CliResult<String> {
        match &self.config_path {
            Some(p) => file_digest(p),
            None => {
                let json = serde_json::to_vec(&default_parameters()).expect("config serialises");
                Ok(sha256_hex(&json))
            }
        }
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Writes an output file below the output directory.
    pub fn write(&mut self, rel: &Path, bytes: &[u8]) -> CliResult<()> {
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(CliError::Usage(format!(
                "output path {} must be relative to --out-dir and stay inside it",
                rel.display()
            )));
        }
        if self.outputs.iter().any(|p| p == rel) {
            return Err(CliError::Usage(format!(
                "output {} written twice in one run",
                rel.display()
            )));
        }
        let full = self.out_dir.join(rel);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&full, bytes).map_err(|e| CliError::io(&full, e))?;
        self.outputs.push(rel.to_path_buf());
        Ok(())
    }

    /// Writes the manifest and returns its path.
    pub fn finish(self) -> CliResult<PathBuf> {
        let outputs = self
            .outputs
            .iter()
            .map(|rel| {
                Ok(FileDigest {
                    path: rel.display().to_string(),
                    sha256: file_digest(&self.out_dir.join(rel))?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let cwd = std::env::current_dir().map_err(|e| CliError::io(".", e))?;
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            command: self.command.clone(),
            argv: self.argv.clone(),
            cwd: cwd.display().to_string(),
            out_dir: absolute(&self.out_dir).display().to_string(),
            input_dir: absolute(&self.input_dir).display().to_string(),
            config_hash: self.config_hash()?,
            seed: self.seed,
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            inputs: self.inputs.clone(),
            outputs,
            notes: self.notes.clone(),
            started_at: self.started_at.clone(),
            finished_at: now(),
        };
        let path = self
            .out_dir
            .join(format!("manifest_{}_{}.json", manifest.command, manifest.run_id()));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()
            .map(|c| c.join(p))
            .unwrap_or_else(|_| p.to_path_buf())
    }
}

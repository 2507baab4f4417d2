//! Input/output bookkeeping and the per-run manifest.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::UsageError;

#[derive(Debug, Serialize)]
struct FileRecord {
    role: String,
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_hash: &'a str,
    config: &'a serde_json::Value,
    inputs: &'a [FileRecord],
    outputs: &'a [FileRecord],
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One subcommand invocation: hashes every input it reads and every output
/// it writes, then records them in `manifest-<subcommand>.json`.
pub struct Run {
    subcommand: &'static str,
    out_dir: PathBuf,
    config: serde_json::Value,
    config_hash: String,
    inputs: Vec<FileRecord>,
    input_paths: Vec<PathBuf>,
    outputs: Vec<FileRecord>,
}

impl Run {
    pub fn new(subcommand: &'static str, out_dir: &Path, config: &impl Serialize) -> Result<Run> {
        let config = serde_json::to_value(config).context("serializing run config")?;
        let canonical = format!("{subcommand}\n{config}");
        let config_hash = sha256_hex(canonical.as_bytes())[..16].to_string();
        std::fs::create_dir_all(out_dir).map_err(|e| prockb_core::Error::io(out_dir, e))?;
        Ok(Run {
            subcommand,
            out_dir: out_dir.to_path_buf(),
            config,
            config_hash,
            inputs: Vec::new(),
            input_paths: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Read an input file whole and record its digest.
    pub fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| prockb_core::Error::io(path, e))?;
        self.inputs.push(FileRecord {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        self.input_paths.push(path.canonicalize().unwrap_or_else(|_| path.to_path_buf()));
        Ok(bytes)
    }

    pub fn write(&mut self, role: &str, file_name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.out_dir.join(file_name);
        if let Ok(canon) = path.canonicalize() {
            if self.input_paths.contains(&canon) {
                return Err(UsageError(format!(
                    "refusing to overwrite input file `{}`; choose another --out-dir",
                    path.display()
                ))
                .into());
            }
        }
        std::fs::write(&path, bytes).map_err(|e| prockb_core::Error::io(&path, e))?;
        self.outputs.push(FileRecord {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            tool: "prockb",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            config_hash: &self.config_hash,
            config: &self.config,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
        text.push('\n');
        let path = self.out_dir.join(format!("manifest-{}.json", self.subcommand));
        std::fs::write(&path, text).map_err(|e| prockb_core::Error::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

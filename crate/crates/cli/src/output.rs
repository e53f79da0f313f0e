//! Run directories and the manifest written into each.

use std::path::{Path, PathBuf};

use decompkan::model::ModelConfig;
use decompkan::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, DataRef, LoadedFile};
use crate::error::{CliError, CliResult};

pub const OUT_DIR_ENV: &str = "DECOMPKAN_OUT_DIR";

/// Flag, then `DECOMPKAN_OUT_DIR`, then `runs`.
pub fn out_root(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from),
    }
}

/// Everything needed to rerun a command and get the same files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub model: Option<ModelConfig>,
    pub train: Option<TrainConfig>,
    pub data: Option<DataRef>,
    pub seeds: Vec<u64>,
    /// Command-specific settings (grid axes, variants, trial counts, …).
    pub settings: serde_json::Value,
    pub config_file: Option<PathBuf>,
    pub config_hash: Option<String>,
    pub output_dir: PathBuf,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model: None,
            train: None,
            data: None,
            seeds: Vec::new(),
            settings: serde_json::Value::Null,
            config_file: None,
            config_hash: None,
            output_dir: PathBuf::new(),
        }
    }

    pub fn with_file(mut self, file: Option<&LoadedFile>) -> Self {
        if let Some(f) = file {
            self.config_file = Some(f.path.clone());
            self.config_hash = Some(f.sha256.clone());
        }
        self
    }

    pub fn with_settings(mut self, settings: impl Serialize) -> Self {
        self.settings = serde_json::to_value(settings).expect("settings serialize");
        self
    }

    /// Hash of the manifest without its output directory.
    fn content_hash(&self) -> String {
        let mut m = self.clone();
        m.output_dir = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&m).expect("manifest serializes"))
    }
}

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates `<root>/<command>-<UTC timestamp>-<hash8>` (suffixed when
    /// taken) and writes `manifest.json` into it.
    pub fn create(root: &Path, manifest: &mut RunManifest) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let base = format!("{}-{stamp}-{}", manifest.command, &manifest.content_hash()[..8]);
        let mut n = 1;
        let path = loop {
            let name = if n == 1 { base.clone() } else { format!("{base}-{n}") };
            let p = root.join(name);
            match std::fs::create_dir(&p) {
                Ok(()) => break p,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => n += 1,
                Err(e) => return Err(io_err(&p, e)),
            }
        };
        manifest.output_dir = path.clone();
        let dir = Self { path };
        dir.write_json("manifest.json", manifest)?;
        Ok(dir)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let p = self.file(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        std::fs::write(&p, contents).map_err(|e| io_err(&p, e))?;
        Ok(p)
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.write(name, text)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{} is not a run manifest: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_dirs_are_never_reused() {
        let root = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("params").with_settings(("x", 1));
        let a = RunDir::create(root.path(), &mut m.clone()).unwrap();
        let b = RunDir::create(root.path(), &mut m).unwrap();
        assert_ne!(a.path, b.path);
        assert_eq!(m.output_dir, b.path);
        let name = b.path.file_name().unwrap().to_string_lossy().into_owned();
        assert!(name.starts_with("params-"), "{name}");
        let back = read_manifest(&b.file("manifest.json")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn out_root_prefers_the_flag() {
        assert_eq!(out_root(Some(Path::new("x"))), PathBuf::from("x"));
    }
}

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat a run. Outputs are listed relative to the
/// run directory so two runs into different directories compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub config: Option<RunConfig>,
    pub weights_root: Option<PathBuf>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut f = fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn start(command: &str, config: Option<RunConfig>) -> RunManifest {
        RunManifest {
            tool: concat!("hatespeech ", env!("CARGO_PKG_VERSION")).into(),
            command: command.into(),
            config,
            weights_root: std::env::var_os(hatespeech::embeddings::WEIGHTS_DIR_ENV).map(PathBuf::from),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
        self.inputs.push(FileDigest {
            sha256: sha256_file(path)?,
            path: abs,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path, run_dir: &Path) -> Result<(), CliError> {
        let rel = path.strip_prefix(run_dir).unwrap_or(path).to_path_buf();
        self.outputs.push(FileDigest {
            sha256: sha256_file(path)?,
            path: rel,
        });
        Ok(())
    }

    /// Stamps the finish time and writes `run.json` into `run_dir`.
    pub fn finish(mut self, run_dir: &Path) -> Result<PathBuf, CliError> {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
        self.finished_at = now();
        let path = run_dir.join("run.json");
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Runtime(e.to_string()))?;
        fs::write(&path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// The manifest with timestamps blanked, for comparing runs.
    pub fn without_timestamps(&self) -> RunManifest {
        RunManifest {
            started_at: String::new(),
            finished_at: String::new(),
            ..self.clone()
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Top-level JSON keys left out of content hashes.
pub const VOLATILE_KEYS: [&str; 1] = ["wall_time_secs"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Written next to every output. `args` plus `--out <out>` re-runs the
/// invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub subcommand: String,
    /// Full argument list without the program name and `--out`.
    pub args: Vec<String>,
    pub out: Option<PathBuf>,
    /// Working directory the invocation ran in; relative paths resolve here.
    pub cwd: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub dataset_sha256: Vec<String>,
    pub inputs: Vec<FileDigest>,
    /// Content hashes; JSON outputs exclude [`VOLATILE_KEYS`].
    pub outputs: Vec<FileDigest>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }
}

/// SHA-256 of a file. JSON objects are hashed after dropping volatile keys.
pub fn content_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let bytes = if is_json {
        match serde_json::from_slice::<serde_json::Value>(&bytes) {
            Ok(serde_json::Value::Object(mut map)) => {
                for k in VOLATILE_KEYS {
                    map.remove(k);
                }
                serde_json::to_vec(&map).map_err(|e| CliError::Internal(e.to_string()))?
            }
            _ => bytes,
        }
    } else {
        bytes
    };
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn digest_all(paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    paths
        .iter()
        .map(|p| Ok(FileDigest { path: p.clone(), sha256: content_digest(p)? }))
        .collect()
}

/// Where the manifest for an output path goes: `<dir>/manifest.json` for a
/// directory, `<file>.manifest.json` otherwise.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

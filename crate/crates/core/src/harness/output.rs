use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const RESULTS_FILE: &str = "results.csv";
pub const USER_SER_FILE: &str = "ser_users.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const CONSTELLATION_FILE: &str = "constellation.json";
pub const TRACE_DIR: &str = "traces";
pub const CHANNEL_DIR: &str = "channels";

/// One measured value at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub recipe: String,
    pub seed: u64,
    pub scheme: String,
    #[serde(rename = "M")]
    pub m_antennas: usize,
    #[serde(rename = "N")]
    pub n_elements: usize,
    #[serde(rename = "K")]
    pub k_users: usize,
    #[serde(rename = "m")]
    pub order: u32,
    pub rho_db: f64,
    pub sigma_e2: f64,
    #[serde(rename = "S")]
    pub specular: usize,
    pub metric: String,
    pub value: f64,
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub git_describe: String,
    pub recipe: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Fully resolved configuration, replayable as-is.
    pub config: String,
    pub rows: usize,
    pub errors: Vec<String>,
    /// Modelling choices made where the model is underdetermined, recorded with each run.
    pub substitutions: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hashes every regular file under `root` except the manifest, in path order.
pub fn hash_tree(root: &Path) -> Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    collect(root, root, &mut files)?;
    files.sort();
    files
        .into_iter()
        .filter(|rel| rel != MANIFEST_FILE)
        .map(|rel| {
            let bytes = std::fs::read(root.join(&rel))?;
            Ok(FileEntry { sha256: sha256_hex(&bytes), bytes: bytes.len() as u64, path: rel })
        })
        .collect()
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path: PathBuf = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("child of root");
            out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
        }
    }
    Ok(())
}

pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

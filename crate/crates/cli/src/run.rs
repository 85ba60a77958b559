//! Exit codes, run manifests and file output shared by all subcommands.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARTIAL: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_PROTOCOL: u8 = 4;

/// An error carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub trait WithCode<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

pub fn fail<T>(code: u8, msg: impl fmt::Display) -> Result<T, Failure> {
    Err(Failure { code, error: anyhow::anyhow!("{msg}") })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    pub started_at: u64,
    pub finished_at: u64,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl RunManifest {
    pub fn start(config: serde_json::Value) -> Self {
        let canonical = serde_json::to_vec(&config).expect("config serializes");
        RunManifest {
            command_line: std::env::args().collect(),
            config_hash: sha256_hex(&canonical),
            config,
            seeds: Vec::new(),
            input_digests: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: unix_now(),
            finished_at: 0,
            exit_code: EXIT_OK,
            details: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.input_digests.insert(path.to_string_lossy().into_owned(), sha256_hex(bytes));
    }

    pub fn finish(mut self, path: &Path, exit_code: u8) -> Result<(), Failure> {
        self.finished_at = unix_now();
        self.exit_code = exit_code;
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// Sidecar path for the manifest of a run writing `out`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    out.with_file_name(name)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).code(EXIT_CONFIG)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).code(EXIT_CONFIG)?;
    tmp.write_all(bytes).code(EXIT_CONFIG)?;
    tmp.persist(path).map_err(|e| Failure { code: EXIT_CONFIG, error: e.error.into() })?;
    Ok(())
}

pub fn read_input(path: &Path, manifest: &mut RunManifest) -> Result<String, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure { code: EXIT_CONFIG, error: anyhow::anyhow!("{}: {e}", path.display()) })?;
    manifest.input(path, &bytes);
    String::from_utf8(bytes).map_err(|_| Failure { code: EXIT_CONFIG, error: anyhow::anyhow!("{}: not UTF-8", path.display()) })
}

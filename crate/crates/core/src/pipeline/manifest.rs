//! Append-only run log with content digests of every stage's inputs and
//! outputs, used to skip stages whose results are current.

use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub inputs: Vec<FileDigest>,
    /// Digest of the stage's configuration section.
    pub params: String,
    pub outputs: Vec<FileDigest>,
    pub seed: Option<u64>,
    pub wall_ms: u64,
    pub skipped: bool,
}

/// Records of one `run_all` invocation, in stage order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub records: Vec<StageRecord>,
}

impl RunManifest {
    pub fn executed(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| !r.skipped)
            .map(|r| r.stage.as_str())
            .collect()
    }

    pub fn skipped(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| r.skipped)
            .map(|r| r.stage.as_str())
            .collect()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: digest_bytes(&bytes),
    })
}

/// JSON-lines file holding every record ever written in a work directory.
#[derive(Debug, Clone)]
pub struct ManifestLog {
    path: PathBuf,
    records: Vec<StageRecord>,
}

impl ManifestLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut records = Vec::new();
        if path.exists() {
            let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if !line.trim().is_empty() {
                    records.push(serde_json::from_str(&line)?);
                }
            }
        }
        Ok(ManifestLog { path, records })
    }

    /// Most recent record of `stage` that actually ran.
    pub fn latest(&self, stage: &str) -> Option<&StageRecord> {
        self.records.iter().rev().find(|r| r.stage == stage && !r.skipped)
    }

    pub fn append(&mut self, record: StageRecord) -> Result<()> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        writeln!(file, "{}", serde_json::to_string(&record)?).map_err(|e| Error::io(&self.path, e))?;
        self.records.push(record);
        Ok(())
    }
}

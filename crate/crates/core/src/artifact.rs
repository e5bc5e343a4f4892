//! Shared file plumbing: artifact headers and line-delimited JSON records.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Provenance written at the top of every stage output so the artifact can be
/// regenerated from its config and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub tool: String,
    pub stage: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl ArtifactHeader {
    pub fn new(stage: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            tool: concat!("smartreply ", env!("CARGO_PKG_VERSION")).to_string(),
            stage: stage.to_string(),
            seed,
            config,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    #[serde(rename = "_header")]
    header: ArtifactHeader,
}

/// Writes `items` one JSON object per line, preceded by an optional header line.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    header: Option<&ArtifactHeader>,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    if let Some(header) = header {
        serde_json::to_writer(&mut out, &HeaderLine { header: header.clone() })?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a line-delimited JSON file. Blank lines and header lines are
/// skipped; records are returned with their 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Option<ArtifactHeader>, Vec<(usize, T)>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), path)
}

pub(crate) fn parse_jsonl<T: DeserializeOwned>(
    reader: impl BufRead,
    path: &Path,
) -> Result<(Option<ArtifactHeader>, Vec<(usize, T)>)> {
    let mut header = None;
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with("{\"_header\"") {
            let parsed: HeaderLine = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            header = Some(parsed.header);
            continue;
        }
        let record = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push((line_no, record));
    }
    Ok((header, records))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

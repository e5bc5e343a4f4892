use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, FrequencyModel, Model, TrainConfig, Variant};
use crate::artifact::{sha256_hex, ArtifactHeader};
use crate::embeddings::WordVectors;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to serve it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub header: ArtifactHeader,
    pub variant: Variant,
    pub config: TrainConfig,
    pub lambda: f64,
    pub best_epoch: usize,
    pub vocab_hash: String,
    pub catalog_hash: String,
    pub model: Model,
    /// Issue-frequency prior used before the first completed round.
    pub prior: FrequencyModel,
    pub log: Vec<EpochRecord>,
}

/// Hash over the vocabulary words, counts and vector dimension.
pub fn vocabulary_hash(vectors: &WordVectors) -> String {
    let vocab = vectors.vocab();
    let mut text = format!("dim {}\n", vectors.dim());
    for (i, word) in vocab.words().iter().enumerate() {
        text.push_str(&format!("{word}\t{}\n", vocab.count(i)));
    }
    sha256_hex(text.as_bytes())
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let mut bytes = serde_json::to_vec(checkpoint)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint and, when given, checks it was trained against the
/// same vocabulary and catalog.
pub fn load_checkpoint(path: &Path, vocab_hash: Option<&str>, catalog_hash: Option<&str>) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let checkpoint: Checkpoint = serde_json::from_slice(&bytes)?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(Error::Mismatch(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            checkpoint.version
        )));
    }
    if checkpoint.model.variant() != checkpoint.variant {
        return Err(Error::Mismatch(format!(
            "{}: declared variant {} but parameters are {}",
            path.display(),
            checkpoint.variant,
            checkpoint.model.variant()
        )));
    }
    for (what, expected, found) in [
        ("vocabulary", vocab_hash, &checkpoint.vocab_hash),
        ("catalog", catalog_hash, &checkpoint.catalog_hash),
    ] {
        if let Some(expected) = expected {
            if expected != found {
                return Err(Error::Mismatch(format!(
                    "{}: {what} hash {found} does not match the loaded {what} ({expected})",
                    path.display()
                )));
            }
        }
    }
    Ok(checkpoint)
}

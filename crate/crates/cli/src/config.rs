use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use smartreply_core::artifact::{sha256_hex, write_json, ArtifactHeader};
use smartreply_core::model::Variant;
use smartreply_core::pipeline::{PipelineConfig, Profile};

/// Profile defaults with the TOML file, if any, merged on top.
pub fn load_config(profile: Profile, file: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    let defaults = PipelineConfig::for_profile(profile);
    let Some(file) = file else {
        return Ok(defaults);
    };
    let text = std::fs::read_to_string(file).with_context(|| format!("reading config {}", file.display()))?;
    let overrides: Value = toml::from_str(&text).with_context(|| format!("parsing config {}", file.display()))?;
    let mut merged = serde_json::to_value(&defaults)?;
    merge(&mut merged, overrides, "")?;
    serde_json::from_value(merged).with_context(|| format!("invalid config {}", file.display()))
}

/// Recursively overlays `over` on `base`. Keys unknown to `base` are errors.
fn merge(base: &mut Value, over: Value, path: &str) -> anyhow::Result<()> {
    match (base, over) {
        (Value::Object(base), Value::Object(over)) => {
            for (key, value) in over {
                let here = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                match base.get_mut(&key) {
                    Some(slot) => merge(slot, value, &here)?,
                    None if key == "library" => {
                        base.insert(key, value);
                    }
                    None => bail!("unknown config key {here:?}"),
                }
            }
        }
        (slot, value) => *slot = value,
    }
    Ok(())
}

/// Where each stage reads and writes inside the work directory.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn corpus(&self) -> PathBuf {
        self.file("corpus.jsonl")
    }

    pub fn truth(&self) -> PathBuf {
        self.file("truth.jsonl")
    }

    pub fn vectors(&self) -> PathBuf {
        self.file("vectors.txt")
    }

    pub fn sentence_tfidf(&self) -> PathBuf {
        self.file("tfidf_sentence.json")
    }

    pub fn turn_tfidf(&self) -> PathBuf {
        self.file("tfidf_turn.json")
    }

    pub fn catalog(&self) -> PathBuf {
        self.file("catalog.json")
    }

    pub fn mining_report(&self) -> PathBuf {
        self.file("mining_report.json")
    }

    pub fn removed_questions(&self) -> PathBuf {
        self.file("removed_questions.jsonl")
    }

    pub fn labels(&self) -> PathBuf {
        self.file("labels.jsonl")
    }

    pub fn matches(&self) -> PathBuf {
        self.file("matches.jsonl")
    }

    pub fn checkpoint(&self, variant: Variant) -> PathBuf {
        self.root.join("checkpoints").join(format!("{}.json", variant.name()))
    }

    pub fn report_table(&self) -> PathBuf {
        self.root.join("reports").join("benchmark.txt")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("reports").join("benchmark.json")
    }

    pub fn stats(&self) -> PathBuf {
        self.file("stats.json")
    }

    pub fn manifest(&self, stage: &str) -> PathBuf {
        self.root.join("manifests").join(format!("{stage}.json"))
    }
}

/// Stage record: the header that regenerates the outputs, and their digests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub header: ArtifactHeader,
    pub outputs: BTreeMap<String, String>,
}

pub fn write_manifest(layout: &Layout, header: &ArtifactHeader, outputs: &[PathBuf]) -> anyhow::Result<()> {
    let mut digests = BTreeMap::new();
    for path in outputs {
        let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        let name = path.strip_prefix(&layout.root).unwrap_or(path).display().to_string();
        digests.insert(name, sha256_hex(&bytes));
    }
    let path = layout.manifest(&header.stage);
    ensure_parent(&path)?;
    write_json(
        &path,
        &Manifest {
            header: header.clone(),
            outputs: digests,
        },
    )?;
    Ok(())
}

pub fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn require(path: &Path, stage: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!("{} not found; run `smartreply {stage}` first", path.display());
    }
    Ok(())
}

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embeddings::normalized;
use crate::error::{Error, Result};

pub const CATALOG_VERSION: u32 = 1;

/// One investigative-question candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateCluster {
    pub id: usize,
    /// Canonical surface form; always one of `variants`.
    pub intent: String,
    pub variants: Vec<String>,
    pub centroid: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub stage: String,
    #[serde(default)]
    pub edits: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateCatalog {
    pub version: u32,
    pub clusters: Vec<CandidateCluster>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl CandidateCatalog {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn variant_count(&self) -> usize {
        self.clusters.iter().map(|c| c.variants.len()).sum()
    }

    /// The candidate whose variant list contains `text`, if any.
    pub fn owner_of(&self, text: &str) -> Option<usize> {
        self.clusters
            .iter()
            .find(|c| c.variants.iter().any(|v| v == text))
            .map(|c| c.id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CATALOG_VERSION {
            return Err(Error::Validation(format!("unsupported catalog version {}", self.version)));
        }
        let mut seen = HashSet::new();
        for (pos, c) in self.clusters.iter().enumerate() {
            if c.id != pos {
                return Err(Error::Validation(format!("catalog ids must be dense: found {} at {pos}", c.id)));
            }
            if c.variants.is_empty() {
                return Err(Error::Validation(format!("candidate {} has no variants", c.id)));
            }
            if !c.variants.contains(&c.intent) {
                return Err(Error::Validation(format!(
                    "candidate {}: intent {:?} is not one of its variants",
                    c.id, c.intent
                )));
            }
            for v in &c.variants {
                if !seen.insert(v.as_str()) {
                    return Err(Error::Validation(format!("variant {v:?} belongs to two candidates")));
                }
            }
        }
        let dims: HashSet<usize> = self.clusters.iter().map(|c| c.centroid.len()).collect();
        if dims.len() > 1 {
            return Err(Error::Validation("candidate centroids differ in dimension".into()));
        }
        Ok(())
    }

    /// Stable digest identifying the catalog, embedded in model checkpoints.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.clusters).expect("catalog serializes");
        crate::artifact::sha256_hex(&bytes)
    }
}

/// A cluster before curation. Ids are the positions in the input list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineCluster {
    pub intent: String,
    pub variants: Vec<String>,
}

/// One curation step. Cluster ids refer to the input clusters, variant ids to
/// positions in the cluster's current variant list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum CurationEdit {
    /// Makes `intent` the canonical form, adding it as a variant if needed.
    Rename { cluster: usize, intent: String },
    /// Moves the variants of every listed cluster into the first one.
    Merge { clusters: Vec<usize> },
    DropVariant { cluster: usize, variant: usize },
    Rewrite { cluster: usize, variant: usize, text: String },
}

/// The `n` most frequent distinct strings, ties broken lexicographically.
pub fn top_variants<S: AsRef<str>>(members: &[(S, u64)], n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (text, count) in members {
        *counts.entry(text.as_ref()).or_default() += count;
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.into_iter().take(n).map(|(t, _)| t.to_string()).collect()
}

/// Normalized mean of the normalized variant embeddings.
pub fn centroid_of<F: Fn(&str) -> Vec<f64>>(variants: &[String], embed: &F) -> Vec<f64> {
    let mut sum: Vec<f64> = Vec::new();
    for v in variants {
        let e = normalized(&embed(v));
        if sum.is_empty() {
            sum = vec![0.0; e.len()];
        }
        for (s, x) in sum.iter_mut().zip(e) {
            *s += x;
        }
    }
    normalized(&sum)
}

fn dangling(what: String) -> Error {
    Error::Validation(format!("curation edit references {what}"))
}

fn live_cluster(live: &mut [Option<FineCluster>], id: usize, step: usize) -> Result<&mut FineCluster> {
    live.get_mut(id)
        .and_then(Option::as_mut)
        .ok_or_else(|| dangling(format!("unknown cluster {id} (edit {step})")))
}

/// Applies curation edits in order, recomputes centroids with `embed`, and
/// numbers the surviving clusters densely in their original order.
pub fn build_catalog<F: Fn(&str) -> Vec<f64>>(
    clusters: &[FineCluster],
    edits: &[CurationEdit],
    embed: F,
) -> Result<CandidateCatalog> {
    let mut live: Vec<Option<FineCluster>> = clusters.iter().cloned().map(Some).collect();
    let mut log = Vec::with_capacity(edits.len());

    for (step, edit) in edits.iter().enumerate() {
        match edit {
            CurationEdit::Rename { cluster, intent } => {
                let c = live_cluster(&mut live, *cluster, step)?;
                if !c.variants.contains(intent) {
                    c.variants.insert(0, intent.clone());
                }
                c.intent = intent.clone();
                log.push(format!("rename cluster {cluster} -> {intent:?}"));
            }
            CurationEdit::Merge { clusters: ids } => {
                let Some((&target, rest)) = ids.split_first() else {
                    return Err(dangling(format!("an empty merge list (edit {step})")));
                };
                for &id in ids {
                    live_cluster(&mut live, id, step)?;
                }
                if rest.contains(&target) || ids.iter().collect::<HashSet<_>>().len() != ids.len() {
                    return Err(Error::Validation(format!("merge lists a cluster twice (edit {step})")));
                }
                for &id in rest {
                    let moved = live[id].take().expect("checked above");
                    let t = live[target].as_mut().expect("checked above");
                    for v in moved.variants {
                        if !t.variants.contains(&v) {
                            t.variants.push(v);
                        }
                    }
                }
                log.push(format!("merge clusters {ids:?} into {target}"));
            }
            CurationEdit::DropVariant { cluster, variant } => {
                let c = live_cluster(&mut live, *cluster, step)?;
                if *variant >= c.variants.len() {
                    return Err(dangling(format!("unknown variant {variant} of cluster {cluster} (edit {step})")));
                }
                if c.variants.len() == 1 {
                    return Err(Error::Validation(format!(
                        "cannot drop the last variant of cluster {cluster} (edit {step})"
                    )));
                }
                let removed = c.variants.remove(*variant);
                if c.intent == removed {
                    c.intent = c.variants[0].clone();
                }
                log.push(format!("drop variant {removed:?} from cluster {cluster}"));
            }
            CurationEdit::Rewrite { cluster, variant, text } => {
                let c = live_cluster(&mut live, *cluster, step)?;
                let Some(slot) = c.variants.get_mut(*variant) else {
                    return Err(dangling(format!("unknown variant {variant} of cluster {cluster} (edit {step})")));
                };
                let old = std::mem::replace(slot, text.clone());
                if c.intent == old {
                    c.intent = text.clone();
                }
                log.push(format!("rewrite {old:?} -> {text:?} in cluster {cluster}"));
            }
        }
    }

    let mut owner: HashMap<String, usize> = HashMap::new();
    let clusters: Vec<CandidateCluster> = live
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(id, c)| {
            for v in &c.variants {
                owner.entry(v.clone()).or_insert(id);
            }
            CandidateCluster {
                id,
                centroid: centroid_of(&c.variants, &embed),
                intent: c.intent,
                variants: c.variants,
            }
        })
        .collect();
    let catalog = CandidateCatalog {
        version: CATALOG_VERSION,
        clusters,
        provenance: Provenance {
            stage: "curated".into(),
            edits: log,
        },
    };
    catalog.validate()?;
    Ok(catalog)
}

//! Candidate generation: question extraction, courtesy filtering, per-issue
//! clustering, hierarchical refinement, curation and re-matching.

mod agglomerative;
mod catalog;
mod kmeans;
mod mine;
mod rematch;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use agglomerative::{agglomerative_refine, cosine_distance};
pub use catalog::{
    build_catalog, centroid_of, top_variants, CandidateCatalog, CandidateCluster, CurationEdit, FineCluster,
    Provenance, CATALOG_VERSION,
};
pub use kmeans::{minibatch_kmeans, KMeansConfig, KMeansMode, KMeansResult};
pub use mine::{mine_candidates, IssueClustering, MiningConfig, MiningOutput, MiningReport};
pub use rematch::{rematch, MatchMode, Matcher, RematchConfig, Rematched, RoundLabel, SentenceMatch};

use crate::artifact::{read_json, read_jsonl, write_json, write_jsonl, ArtifactHeader};
use crate::corpus::{tokenize, ProcessedTicket};
use crate::embeddings::{cosine_similarity, Embedder};
use crate::error::{Error, Result};

/// An agent sentence ending in a question mark, with its context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub ticket_id: String,
    pub round_index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub embedding: Vec<f64>,
    pub issue_id: Option<usize>,
}

/// Every agent sentence ending in "?", embedded with the sentence-unit statistics.
pub fn extract_questions(tickets: &[ProcessedTicket], embedder: &Embedder<'_>) -> Vec<QuestionRecord> {
    let mut records = Vec::new();
    for ticket in tickets {
        for round in &ticket.rounds {
            for sentence in round.agent.iter().flatten().filter(|s| s.is_question()) {
                records.push(QuestionRecord {
                    ticket_id: ticket.ticket_id.clone(),
                    round_index: round.index,
                    text: sentence.text.clone(),
                    tokens: sentence.tokens.clone(),
                    embedding: embedder.embed(&sentence.tokens),
                    issue_id: ticket.issue_id,
                });
            }
        }
    }
    records
}

pub fn embed_phrase(text: &str, embedder: &Embedder<'_>) -> Vec<f64> {
    embedder.embed(&tokenize(text))
}

/// Splits records into (kept, removed); a record is removed when its
/// cosine similarity to some seed reaches `threshold`.
pub fn filter_seed_similar(
    records: Vec<QuestionRecord>,
    seeds: &[Vec<f64>],
    threshold: f64,
) -> Result<(Vec<QuestionRecord>, Vec<QuestionRecord>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "filter threshold must be in (0, 1], got {threshold}"
        )));
    }
    Ok(records.into_iter().partition(|r| {
        !seeds
            .iter()
            .any(|s| cosine_similarity(&r.embedding, s) >= threshold)
    }))
}

pub fn save_catalog(path: &Path, catalog: &CandidateCatalog) -> Result<()> {
    write_json(path, catalog)
}

pub fn load_catalog(path: &Path) -> Result<CandidateCatalog> {
    let catalog: CandidateCatalog = read_json(path)?;
    catalog.validate()?;
    Ok(catalog)
}

pub fn load_edits(path: &Path) -> Result<Vec<CurationEdit>> {
    read_json(path)
}

pub fn save_labels(path: &Path, labels: &[RoundLabel], header: Option<&ArtifactHeader>) -> Result<()> {
    write_jsonl(path, header, labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<RoundLabel>> {
    let (_, records) = read_jsonl(path)?;
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

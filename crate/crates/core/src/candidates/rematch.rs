use serde::{Deserialize, Serialize};

use super::CandidateCatalog;
use crate::corpus::{tokenize, ProcessedTicket};
use crate::embeddings::{cosine_similarity, Embedder};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Similarity to the candidate centroid.
    #[default]
    Centroid,
    /// Highest similarity to any individual variant.
    VariantMax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RematchConfig {
    pub threshold: f64,
    pub mode: MatchMode,
}

impl Default for RematchConfig {
    fn default() -> Self {
        RematchConfig {
            threshold: 0.85,
            mode: MatchMode::Centroid,
        }
    }
}

/// Candidate ids for one round: the candidates asked in the agent turn of
/// the following round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLabel {
    pub ticket_id: String,
    pub round_index: usize,
    pub candidate_ids: Vec<usize>,
}

/// One agent sentence assigned to a candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceMatch {
    pub ticket_id: String,
    /// Round whose agent turn contains the sentence.
    pub agent_round: usize,
    pub sentence: String,
    pub candidate_id: usize,
    pub similarity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rematched {
    /// One entry per round of every ticket, in corpus order.
    pub labels: Vec<RoundLabel>,
    pub matches: Vec<SentenceMatch>,
}

/// Scores a sentence embedding against every candidate.
pub struct Matcher {
    mode: MatchMode,
    threshold: f64,
    centroids: Vec<Vec<f64>>,
    variants: Vec<Vec<Vec<f64>>>,
}

impl Matcher {
    pub fn new(catalog: &CandidateCatalog, embedder: &Embedder<'_>, config: &RematchConfig) -> Result<Self> {
        if !(config.threshold > 0.0 && config.threshold <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rematch threshold must be in (0, 1], got {}",
                config.threshold
            )));
        }
        let variants = match config.mode {
            MatchMode::Centroid => Vec::new(),
            MatchMode::VariantMax => catalog
                .clusters
                .iter()
                .map(|c| c.variants.iter().map(|v| embedder.embed(&tokenize(v))).collect())
                .collect(),
        };
        Ok(Matcher {
            mode: config.mode,
            threshold: config.threshold,
            centroids: catalog.clusters.iter().map(|c| c.centroid.clone()).collect(),
            variants,
        })
    }

    /// Similarity of `embedding` to each candidate.
    pub fn scores(&self, embedding: &[f64]) -> Vec<f64> {
        match self.mode {
            MatchMode::Centroid => self.centroids.iter().map(|c| cosine_similarity(embedding, c)).collect(),
            MatchMode::VariantMax => self
                .variants
                .iter()
                .map(|vs| {
                    vs.iter()
                        .map(|v| cosine_similarity(embedding, v))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect(),
        }
    }

    /// The single closest candidate (lowest id on ties) if it clears the threshold.
    pub fn assign(&self, embedding: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (j, s) in self.scores(embedding).into_iter().enumerate() {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        best.filter(|(_, s)| *s >= self.threshold)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Assigns every agent sentence (question or not) to its closest candidate
/// and emits per-round labels.
pub fn rematch(
    tickets: &[ProcessedTicket],
    catalog: &CandidateCatalog,
    embedder: &Embedder<'_>,
    config: &RematchConfig,
) -> Result<Rematched> {
    let matcher = Matcher::new(catalog, embedder, config)?;
    let mut labels = Vec::new();
    let mut matches = Vec::new();
    for ticket in tickets {
        let mut asked: Vec<Vec<usize>> = Vec::with_capacity(ticket.rounds.len());
        for round in &ticket.rounds {
            let mut ids = Vec::new();
            for sentence in round.agent.iter().flatten() {
                let embedding = embedder.embed(&sentence.tokens);
                if let Some((candidate_id, similarity)) = matcher.assign(&embedding) {
                    if !ids.contains(&candidate_id) {
                        ids.push(candidate_id);
                    }
                    matches.push(SentenceMatch {
                        ticket_id: ticket.ticket_id.clone(),
                        agent_round: round.index,
                        sentence: sentence.text.clone(),
                        candidate_id,
                        similarity,
                    });
                }
            }
            ids.sort_unstable();
            asked.push(ids);
        }
        for (pos, round) in ticket.rounds.iter().enumerate() {
            labels.push(RoundLabel {
                ticket_id: ticket.ticket_id.clone(),
                round_index: round.index,
                candidate_ids: asked.get(pos + 1).cloned().unwrap_or_default(),
            });
        }
    }
    Ok(Rematched { labels, matches })
}

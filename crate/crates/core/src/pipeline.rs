//! Stage functions shared by the CLI, the service and the acceptance suite.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::artifact::ArtifactHeader;
use crate::candidates::{CandidateCatalog, MiningConfig, RematchConfig, RoundLabel};
use crate::corpus::{split_corpus, ProcessedTicket, Sentence, SplitRatios, Splits, SyntheticSpec};
use crate::embeddings::{compute_tfidf, train_word2vec, DocumentUnit, Embedder, TfIdfStats, Word2VecConfig, WordVectors};
use crate::error::{Error, Result};
use crate::eval::BenchmarkData;
use crate::model::{
    fit_frequency, grid_search, vocabulary_hash, Checkpoint, ModelDims, SequenceExample, TrainConfig, Variant,
    CHECKPOINT_VERSION,
};

/// Word vectors plus the two weighting statistics: agent sentences for
/// candidate mining, dialogue turns for model input.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub vectors: WordVectors,
    pub sentence_stats: TfIdfStats,
    pub turn_stats: TfIdfStats,
}

impl EmbeddingSet {
    pub fn sentence_embedder(&self) -> Embedder<'_> {
        Embedder::new(&self.vectors, &self.sentence_stats)
    }

    pub fn turn_embedder(&self) -> Embedder<'_> {
        Embedder::new(&self.vectors, &self.turn_stats)
    }
}

/// Token streams for word2vec: every sentence of every turn, in corpus order.
pub fn sentence_streams(tickets: &[ProcessedTicket]) -> Vec<Vec<String>> {
    tickets
        .iter()
        .flat_map(|t| &t.rounds)
        .flat_map(|r| r.agent.iter().flatten().chain(&r.customer))
        .map(|s| s.tokens.clone())
        .collect()
}

/// All tokens of a turn; a turn's messages are merged into one document.
pub fn turn_tokens(sentences: &[Sentence]) -> Vec<String> {
    sentences.iter().flat_map(|s| s.tokens.iter().cloned()).collect()
}

pub fn agent_sentence_documents(tickets: &[ProcessedTicket]) -> Vec<Vec<String>> {
    tickets
        .iter()
        .flat_map(|t| &t.rounds)
        .flat_map(|r| r.agent.iter().flatten())
        .map(|s| s.tokens.clone())
        .collect()
}

pub fn turn_documents(tickets: &[ProcessedTicket]) -> Vec<Vec<String>> {
    let mut docs = Vec::new();
    for round in tickets.iter().flat_map(|t| &t.rounds) {
        if let Some(agent) = &round.agent {
            docs.push(turn_tokens(agent));
        }
        docs.push(turn_tokens(&round.customer));
    }
    docs
}

pub fn train_embeddings(tickets: &[ProcessedTicket], config: &Word2VecConfig, seed: u64) -> Result<EmbeddingSet> {
    let vectors = train_word2vec(&sentence_streams(tickets), config, seed)?;
    Ok(EmbeddingSet {
        vectors,
        sentence_stats: compute_tfidf(&agent_sentence_documents(tickets), DocumentUnit::Sentence),
        turn_stats: compute_tfidf(&turn_documents(tickets), DocumentUnit::Turn),
    })
}

/// Round input x_t = [x_t^(a); x_t^(c)]; a missing agent turn is the zero vector.
pub fn round_input(agent: Option<&[Sentence]>, customer: &[Sentence], embedder: &Embedder<'_>) -> Vec<f64> {
    let mut x = match agent {
        Some(turn) => embedder.embed(&turn_tokens(turn)),
        None => vec![0.0; embedder.dim()],
    };
    x.extend(embedder.embed(&turn_tokens(customer)));
    x
}

/// Model inputs and targets for every ticket; rounds without a label get
/// an empty target.
pub fn build_examples(
    tickets: &[ProcessedTicket],
    labels: &[RoundLabel],
    embedder: &Embedder<'_>,
) -> Vec<SequenceExample> {
    let by_round: HashMap<(&str, usize), &[usize]> = labels
        .iter()
        .map(|l| ((l.ticket_id.as_str(), l.round_index), l.candidate_ids.as_slice()))
        .collect();
    tickets
        .iter()
        .map(|t| SequenceExample {
            ticket_id: t.ticket_id.clone(),
            issue_id: t.issue_id,
            inputs: t
                .rounds
                .iter()
                .map(|r| round_input(r.agent.as_deref(), &r.customer, embedder))
                .collect(),
            targets: t
                .rounds
                .iter()
                .map(|r| {
                    by_round
                        .get(&(t.ticket_id.as_str(), r.index))
                        .map(|ids| ids.to_vec())
                        .unwrap_or_default()
                })
                .collect(),
        })
        .collect()
}

/// Runtime/size presets for the whole chain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 2,000 tickets, 100-dim vectors, H = 32, 15 epochs.
    #[default]
    Small,
    /// 20,000 tickets, 300-dim vectors, H = 256, 30 epochs.
    PaperScale,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Profile::Small),
            "paper-scale" => Ok(Profile::PaperScale),
            other => Err(Error::InvalidArgument(format!(
                "unknown profile {other:?}; expected small or paper-scale"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub methods: Vec<Variant>,
    pub runs: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            methods: Variant::ALL.to_vec(),
            runs: 10,
        }
    }
}

/// Parameters of every stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub synth: SyntheticSpec,
    pub word2vec: Word2VecConfig,
    pub mining: MiningConfig,
    pub rematch: RematchConfig,
    pub split: SplitRatios,
    pub train: TrainConfig,
    pub benchmark: BenchmarkConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_profile(Profile::Small)
    }
}

impl PipelineConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (n_tickets, dim, hidden, epochs) = match profile {
            Profile::Small => (2000, 100, 32, 15),
            Profile::PaperScale => (20_000, 300, 256, 30),
        };
        PipelineConfig {
            synth: SyntheticSpec {
                n_tickets,
                ..SyntheticSpec::default()
            },
            word2vec: Word2VecConfig {
                dim,
                ..Word2VecConfig::default()
            },
            mining: MiningConfig::default(),
            rematch: RematchConfig::default(),
            split: SplitRatios::default(),
            train: TrainConfig {
                hidden,
                epochs,
                ..TrainConfig::default()
            },
            benchmark: BenchmarkConfig {
                methods: match profile {
                    Profile::Small => vec![Variant::Frequency, Variant::Linear, Variant::Lstm],
                    Profile::PaperScale => Variant::ALL.to_vec(),
                },
                runs: 10,
            },
        }
    }
}

/// Issue categories present in the corpus: one more than the largest issue id.
pub fn issue_count(tickets: &[ProcessedTicket]) -> usize {
    tickets.iter().filter_map(|t| t.issue_id).max().map_or(0, |i| i + 1)
}

/// Embeds and splits labelled tickets into train/validation/test.
pub fn prepare_benchmark_data(
    tickets: &[ProcessedTicket],
    labels: &[RoundLabel],
    embeddings: &EmbeddingSet,
    catalog: &CandidateCatalog,
    ratios: SplitRatios,
    seed: u64,
) -> Result<BenchmarkData> {
    if catalog.is_empty() {
        return Err(Error::Empty("candidate catalog"));
    }
    let examples = build_examples(tickets, labels, &embeddings.turn_embedder());
    let Splits {
        train,
        validation,
        test,
    } = split_corpus(&examples, ratios, seed)?;
    Ok(BenchmarkData {
        train,
        validation,
        test,
        dims: ModelDims {
            embedding_dim: embeddings.vectors.dim(),
            n_candidates: catalog.len(),
            n_issues: issue_count(tickets),
            hidden: 1,
        },
    })
}

/// Grid-searches λ for `config.variant` and packages the winner with the
/// frequency prior and the vocabulary/catalog hashes.
pub fn train_checkpoint(
    data: &BenchmarkData,
    config: &TrainConfig,
    embeddings: &EmbeddingSet,
    catalog: &CandidateCatalog,
    header: ArtifactHeader,
) -> Result<Checkpoint> {
    let search = grid_search(&data.train, &data.validation, data.dims, config)?;
    let log = search.best.log;
    Ok(Checkpoint {
        version: CHECKPOINT_VERSION,
        header,
        variant: config.variant,
        config: config.clone(),
        lambda: search.best.lambda,
        best_epoch: search.best.best_epoch,
        vocab_hash: vocabulary_hash(&embeddings.vectors),
        catalog_hash: catalog.fingerprint(),
        model: search.best.model,
        prior: fit_frequency(&data.train, data.dims.n_candidates, data.dims.n_issues),
        log,
    })
}

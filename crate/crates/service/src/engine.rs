//! Model-side session logic, independent of HTTP.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use smartreply_core::candidates::{load_catalog, CandidateCatalog};
use smartreply_core::corpus::{fill_placeholders, preprocess_messages, Speaker, TicketMeta};
use smartreply_core::embeddings::{load_tfidf, load_word_vectors, Embedder, TfIdfStats, WordVectors};
use smartreply_core::eval::TOP_K;
use smartreply_core::model::{
    issue_slot, load_checkpoint, predict_topk, vocabulary_hash, Checkpoint, FrequencyModel, Model, StepState,
};
use smartreply_core::pipeline::round_input;

use crate::error::ServiceError;

/// Issue reference in a request: a numeric id or an issue name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IssueRef {
    Id(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub candidate_id: usize,
    pub text: String,
    pub probability: f64,
}

/// Cached conversation state. Serializable so sessions survive a restart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub meta: TicketMeta,
    pub issue_id: Option<usize>,
    pub warnings: Vec<String>,
    pub state: StepState,
    /// Messages of the open agent turn.
    pub agent_turn: Vec<String>,
    /// Messages of the open customer turn.
    pub customer_turn: Vec<String>,
    /// Distribution behind the current suggestions.
    pub probabilities: Vec<f64>,
}

impl Session {
    /// Completed rounds.
    pub fn round(&self) -> usize {
        self.state.rounds
    }
}

/// Files the engine is loaded from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnginePaths {
    pub checkpoint: PathBuf,
    pub catalog: PathBuf,
    pub vectors: PathBuf,
    pub turn_tfidf: PathBuf,
}

/// Read-only model state shared by every session.
#[derive(Debug)]
pub struct Engine {
    model: Model,
    prior: FrequencyModel,
    catalog: CandidateCatalog,
    vectors: WordVectors,
    turn_stats: TfIdfStats,
    issue_names: Vec<String>,
}

impl Engine {
    /// Checks that the checkpoint was trained against this vocabulary and catalog.
    pub fn new(
        checkpoint: Checkpoint,
        catalog: CandidateCatalog,
        vectors: WordVectors,
        turn_stats: TfIdfStats,
    ) -> Result<Self, ServiceError> {
        catalog.validate()?;
        if checkpoint.catalog_hash != catalog.fingerprint() {
            return Err(ServiceError::Startup("checkpoint was trained on a different catalog".into()));
        }
        if checkpoint.vocab_hash != vocabulary_hash(&vectors) {
            return Err(ServiceError::Startup("checkpoint was trained on a different vocabulary".into()));
        }
        if checkpoint.model.n_candidates() != catalog.len() || checkpoint.prior.n_candidates() != catalog.len() {
            return Err(ServiceError::Startup(format!(
                "checkpoint scores {} candidates, catalog has {}",
                checkpoint.model.n_candidates(),
                catalog.len()
            )));
        }
        Ok(Engine {
            model: checkpoint.model,
            prior: checkpoint.prior,
            catalog,
            vectors,
            turn_stats,
            issue_names: Vec::new(),
        })
    }

    pub fn load(paths: &EnginePaths) -> Result<Self, ServiceError> {
        let catalog = load_catalog(&paths.catalog)?;
        let vectors = load_word_vectors(&paths.vectors)?;
        let turn_stats = load_tfidf(&paths.turn_tfidf)?;
        let checkpoint = load_checkpoint(
            &paths.checkpoint,
            Some(&vocabulary_hash(&vectors)),
            Some(&catalog.fingerprint()),
        )?;
        Engine::new(checkpoint, catalog, vectors, turn_stats)
    }

    /// Names accepted as `issue_id` strings; position is the issue id.
    pub fn with_issue_names(mut self, names: Vec<String>) -> Self {
        self.issue_names = names;
        self
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn catalog(&self) -> &CandidateCatalog {
        &self.catalog
    }

    fn embedder(&self) -> Embedder<'_> {
        Embedder::new(&self.vectors, &self.turn_stats)
    }

    /// Maps a request issue to a known id; anything else is treated as missing.
    pub fn resolve_issue(&self, issue: Option<&IssueRef>) -> (Option<usize>, Vec<String>) {
        let n = self.model.n_issues();
        let resolved = match issue {
            None => return (None, Vec::new()),
            Some(IssueRef::Id(id)) => Some(*id),
            Some(IssueRef::Name(name)) => self
                .issue_names
                .iter()
                .position(|n| n == name)
                .or_else(|| name.parse().ok()),
        };
        match resolved {
            Some(id) if id < n => (Some(id), Vec::new()),
            _ => (None, vec!["unknown_issue".to_string()]),
        }
    }

    /// Fresh session: zero recurrent state, suggestions from the issue frequency prior.
    pub fn open(&self, session_id: String, mut meta: TicketMeta, issue: Option<&IssueRef>) -> Session {
        let issue = issue.cloned().or(meta.issue_id.map(IssueRef::Id));
        let (issue_id, warnings) = self.resolve_issue(issue.as_ref());
        meta.issue_id = issue_id;
        let state = self.model.start(issue_id);
        Session {
            session_id,
            probabilities: self.prior.distribution(issue_slot(issue_id, self.prior.n_issues())),
            meta,
            issue_id,
            warnings,
            state,
            agent_turn: Vec::new(),
            customer_turn: Vec::new(),
        }
    }

    /// Buffers a message. A round completes when the customer closes the
    /// turn or when the agent speaks after the customer. Returns whether a
    /// round completed.
    pub fn post(
        &self,
        session: &mut Session,
        speaker: Speaker,
        text: &str,
        end_of_turn: bool,
    ) -> Result<bool, ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::BadRequest("message text is empty".into()));
        }
        match speaker {
            Speaker::Agent => {
                let closes = !session.customer_turn.is_empty();
                if closes {
                    self.complete_round(session)?;
                }
                session.agent_turn.push(text.to_string());
                Ok(closes)
            }
            Speaker::Customer => {
                session.customer_turn.push(text.to_string());
                if end_of_turn {
                    self.complete_round(session)?;
                }
                Ok(end_of_turn)
            }
        }
    }

    fn complete_round(&self, session: &mut Session) -> Result<(), ServiceError> {
        let agent = (!session.agent_turn.is_empty()).then(|| preprocess_messages(&session.agent_turn, &session.meta));
        let customer = preprocess_messages(&session.customer_turn, &session.meta);
        let x = round_input(agent.as_deref(), &customer, &self.embedder());
        let mut state = session.state.clone();
        let p = self.model.step(&mut state, &x)?;
        session.state = state;
        session.probabilities = p;
        session.agent_turn.clear();
        session.customer_turn.clear();
        Ok(())
    }

    /// Top-3 candidates of the current distribution, canonical text filled from the session metadata.
    pub fn suggestions(&self, session: &Session) -> Result<Vec<Suggestion>, ServiceError> {
        let k = TOP_K.min(session.probabilities.len());
        Ok(predict_topk(&session.probabilities, k)?
            .into_iter()
            .map(|id| Suggestion {
                candidate_id: id,
                text: fill_placeholders(&self.catalog.clusters[id].intent, &session.meta).text,
                probability: session.probabilities[id],
            })
            .collect())
    }
}

//! Proactive smart-reply engine.
//!
//! Mines investigative-question candidates from customer-service chat logs,
//! labels every conversation round with the candidates the agent asked next,
//! and trains recommenders (issue frequency, short-term linear, long-term
//! LSTM) that suggest the top three next questions.

pub mod artifact;
pub mod candidates;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};

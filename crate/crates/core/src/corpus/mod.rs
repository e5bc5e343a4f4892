//! Tickets, rounds and turns, plus everything that touches raw conversation
//! text: anonymization, sentence segmentation, splits, statistics and the
//! synthetic corpus generator.

mod anonymize;
mod io;
pub mod library;
mod preprocess;
mod segment;
mod split;
mod stats;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use anonymize::{anonymize, fill_placeholders, AnonymizedText, FilledText, Span};
pub use io::{load_corpus, load_synthetic_labels, parse_corpus, save_corpus, save_synthetic_labels};
pub use preprocess::{preprocess, preprocess_corpus, preprocess_messages, ProcessedRound, ProcessedTicket};
pub use segment::{segment, tokenize, Sentence};
pub use split::{split_corpus, SplitRatios, Splits};
pub use stats::{corpus_stats, CorpusStats, Summary};
pub use synth::{
    generate_synthetic_corpus, pii_fixtures, AskedIntent, RoundTruth, ShapeTargets, SyntheticCorpus, SyntheticSpec,
    TicketTruth,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    Customer,
}

/// Parties whose names may appear in a conversation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Customer,
    Agent,
    Host,
}

/// The fixed registry of anonymization placeholders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Placeholder {
    CustomerName,
    AgentName,
    HostName,
    Email,
    PhoneNumber,
    CardLast4,
    Url,
    Amount,
    Timestamp,
    ReservationCode,
}

impl Placeholder {
    pub const ALL: [Placeholder; 10] = [
        Placeholder::CustomerName,
        Placeholder::AgentName,
        Placeholder::HostName,
        Placeholder::Email,
        Placeholder::PhoneNumber,
        Placeholder::CardLast4,
        Placeholder::Url,
        Placeholder::Amount,
        Placeholder::Timestamp,
        Placeholder::ReservationCode,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Placeholder::CustomerName => "customer name",
            Placeholder::AgentName => "agent name",
            Placeholder::HostName => "host name",
            Placeholder::Email => "email",
            Placeholder::PhoneNumber => "phone number",
            Placeholder::CardLast4 => "card last4",
            Placeholder::Url => "url",
            Placeholder::Amount => "amount",
            Placeholder::Timestamp => "timestamp",
            Placeholder::ReservationCode => "reservation code",
        }
    }

    /// The literal as it appears in anonymized text, e.g. `{card last4}`.
    pub fn token(self) -> String {
        format!("{{{}}}", self.key())
    }

    /// Name placeholders are resolved through party names rather than fill values.
    pub fn role(self) -> Option<Role> {
        match self {
            Placeholder::CustomerName => Some(Role::Customer),
            Placeholder::AgentName => Some(Role::Agent),
            Placeholder::HostName => Some(Role::Host),
            _ => None,
        }
    }

    pub fn for_role(role: Role) -> Placeholder {
        match role {
            Role::Customer => Placeholder::CustomerName,
            Role::Agent => Placeholder::AgentName,
            Role::Host => Placeholder::HostName,
        }
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Placeholder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Placeholder::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| format!("unknown placeholder key {s:?}"))
    }
}

impl Serialize for Placeholder {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for Placeholder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ticket-level metadata known to the data owner.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TicketMeta {
    pub ticket_id: String,
    /// Pre-assigned issue category; `None` means the issue is missing.
    pub issue_id: Option<usize>,
    #[serde(default)]
    pub party_names: BTreeMap<Role, String>,
    /// Values for the non-name placeholders.
    #[serde(default)]
    pub fill_values: BTreeMap<Placeholder, String>,
}

impl TicketMeta {
    /// The concrete value a placeholder stands for in this ticket, if known.
    pub fn value_of(&self, placeholder: Placeholder) -> Option<&str> {
        match placeholder.role() {
            Some(role) => self.party_names.get(&role).map(String::as_str),
            None => self.fill_values.get(&placeholder).map(String::as_str),
        }
    }
}

/// A maximal run of messages from one interlocutor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Turn {
    pub speaker: Speaker,
    pub messages: Vec<String>,
}

impl Turn {
    pub fn new(speaker: Speaker, messages: Vec<String>) -> Self {
        Self { speaker, messages }
    }
}

/// An agent turn followed by a customer turn. Round 1 is customer-only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    /// 1-based round index.
    pub index: usize,
    pub agent: Option<Turn>,
    pub customer: Turn,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ticket {
    pub meta: TicketMeta,
    pub rounds: Vec<Round>,
}

impl Ticket {
    pub fn id(&self) -> &str {
        &self.meta.ticket_id
    }

    pub fn issue(&self) -> Option<usize> {
        self.meta.issue_id
    }

    pub fn message_count(&self) -> usize {
        self.rounds
            .iter()
            .map(|r| r.customer.messages.len() + r.agent.as_ref().map_or(0, |a| a.messages.len()))
            .sum()
    }

    pub fn turn_count(&self) -> usize {
        self.rounds.iter().map(|r| 1 + usize::from(r.agent.is_some())).sum()
    }

    /// Checks the structural invariants of a ticket.
    pub fn validate(&self) -> crate::Result<()> {
        let id = &self.meta.ticket_id;
        if self.rounds.is_empty() {
            return Err(crate::Error::Validation(format!("ticket {id}: no rounds")));
        }
        for (pos, round) in self.rounds.iter().enumerate() {
            let t = pos + 1;
            if round.index != t {
                return Err(crate::Error::Validation(format!(
                    "ticket {id}: round indices must be contiguous from 1 (found {} at position {t})",
                    round.index
                )));
            }
            if t > 1 && round.agent.is_none() {
                return Err(crate::Error::Validation(format!(
                    "ticket {id}: round {t} lacks an agent turn (only round 1 may omit it)"
                )));
            }
            for (turn, expected) in round
                .agent
                .iter()
                .map(|a| (a, Speaker::Agent))
                .chain(std::iter::once((&round.customer, Speaker::Customer)))
            {
                if turn.speaker != expected {
                    return Err(crate::Error::Validation(format!(
                        "ticket {id}: round {t} has a {:?} turn in the {:?} slot",
                        turn.speaker, expected
                    )));
                }
                if turn.messages.is_empty() {
                    return Err(crate::Error::Validation(format!(
                        "ticket {id}: round {t} has an empty {:?} turn",
                        expected
                    )));
                }
            }
        }
        Ok(())
    }
}

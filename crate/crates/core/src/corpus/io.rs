use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Placeholder, Role, Round, Speaker, Ticket, TicketMeta, TicketTruth, Turn};
use crate::artifact::{parse_jsonl, read_jsonl, write_jsonl, ArtifactHeader};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct MetaRecord {
    #[serde(default)]
    party_names: BTreeMap<Role, String>,
    #[serde(default)]
    fill_values: BTreeMap<Placeholder, String>,
}

#[derive(Serialize, Deserialize)]
struct RoundRecord {
    agent: Option<Vec<String>>,
    customer: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TicketRecord {
    ticket_id: String,
    issue_id: Option<usize>,
    meta: MetaRecord,
    rounds: Vec<RoundRecord>,
}

impl From<&Ticket> for TicketRecord {
    fn from(ticket: &Ticket) -> Self {
        TicketRecord {
            ticket_id: ticket.meta.ticket_id.clone(),
            issue_id: ticket.meta.issue_id,
            meta: MetaRecord {
                party_names: ticket.meta.party_names.clone(),
                fill_values: ticket.meta.fill_values.clone(),
            },
            rounds: ticket
                .rounds
                .iter()
                .map(|r| RoundRecord {
                    agent: r.agent.as_ref().map(|a| a.messages.clone()),
                    customer: r.customer.messages.clone(),
                })
                .collect(),
        }
    }
}

impl From<TicketRecord> for Ticket {
    fn from(record: TicketRecord) -> Self {
        Ticket {
            meta: TicketMeta {
                ticket_id: record.ticket_id,
                issue_id: record.issue_id,
                party_names: record.meta.party_names,
                fill_values: record.meta.fill_values,
            },
            rounds: record
                .rounds
                .into_iter()
                .enumerate()
                .map(|(pos, r)| Round {
                    index: pos + 1,
                    agent: r.agent.map(|m| Turn::new(Speaker::Agent, m)),
                    customer: Turn::new(Speaker::Customer, r.customer),
                })
                .collect(),
        }
    }
}

pub fn save_corpus(path: &Path, tickets: &[Ticket], header: Option<&ArtifactHeader>) -> Result<()> {
    write_jsonl(path, header, tickets.iter().map(TicketRecord::from))
}

/// Loads a corpus file, validating every ticket. Ordering follows the file.
pub fn load_corpus(path: &Path) -> Result<Vec<Ticket>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(std::io::BufReader::new(file), path)
}

pub fn parse_corpus(reader: impl BufRead, path: &Path) -> Result<Vec<Ticket>> {
    let (_, records) = parse_jsonl::<TicketRecord>(reader, path)?;
    let mut seen = HashSet::new();
    let mut tickets = Vec::with_capacity(records.len());
    for (line, record) in records {
        let ticket = Ticket::from(record);
        ticket.validate().map_err(|e| match e {
            Error::Validation(msg) => Error::Validation(format!("line {line}: {msg}")),
            other => other,
        })?;
        if !seen.insert(ticket.meta.ticket_id.clone()) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate ticket_id {}",
                ticket.meta.ticket_id
            )));
        }
        tickets.push(ticket);
    }
    Ok(tickets)
}

pub fn save_synthetic_labels(path: &Path, truth: &[TicketTruth], header: Option<&ArtifactHeader>) -> Result<()> {
    write_jsonl(path, header, truth.iter())
}

pub fn load_synthetic_labels(path: &Path) -> Result<Vec<TicketTruth>> {
    let (_, records) = read_jsonl(path)?;
    Ok(records.into_iter().map(|(_, t)| t).collect())
}

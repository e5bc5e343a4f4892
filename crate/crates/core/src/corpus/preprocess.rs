use super::{anonymize, segment, Sentence, Ticket, TicketMeta};

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedRound {
    pub index: usize,
    pub agent: Option<Vec<Sentence>>,
    pub customer: Vec<Sentence>,
}

/// A ticket after anonymization and segmentation; the form every downstream
/// stage consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedTicket {
    pub ticket_id: String,
    pub issue_id: Option<usize>,
    pub rounds: Vec<ProcessedRound>,
}

/// Anonymizes and segments the messages of one turn, in order.
pub fn preprocess_messages<S: AsRef<str>>(messages: &[S], meta: &TicketMeta) -> Vec<Sentence> {
    messages
        .iter()
        .flat_map(|m| segment(&anonymize(m.as_ref(), meta).text))
        .collect()
}

pub fn preprocess(ticket: &Ticket) -> ProcessedTicket {
    ProcessedTicket {
        ticket_id: ticket.meta.ticket_id.clone(),
        issue_id: ticket.meta.issue_id,
        rounds: ticket
            .rounds
            .iter()
            .map(|r| ProcessedRound {
                index: r.index,
                agent: r.agent.as_ref().map(|a| preprocess_messages(&a.messages, &ticket.meta)),
                customer: preprocess_messages(&r.customer.messages, &ticket.meta),
            })
            .collect(),
    }
}

pub fn preprocess_corpus(tickets: &[Ticket]) -> Vec<ProcessedTicket> {
    tickets.iter().map(preprocess).collect()
}

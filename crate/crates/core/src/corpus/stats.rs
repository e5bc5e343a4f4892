use serde::{Deserialize, Serialize};

use super::Ticket;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Lower middle element for even counts.
    pub median: f64,
}

impl Summary {
    fn of(mut values: Vec<usize>) -> Summary {
        values.sort_unstable();
        let mean = values.iter().sum::<usize>() as f64 / values.len() as f64;
        let median = values[(values.len() - 1) / 2] as f64;
        Summary { mean, median }
    }
}

/// Per-ticket conversation length statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub tickets: usize,
    pub messages: Summary,
    pub turns: Summary,
    pub rounds: Summary,
}

pub fn corpus_stats(tickets: &[Ticket]) -> Result<CorpusStats> {
    if tickets.is_empty() {
        return Err(Error::Empty("corpus statistics need at least one ticket"));
    }
    Ok(CorpusStats {
        tickets: tickets.len(),
        messages: Summary::of(tickets.iter().map(Ticket::message_count).collect()),
        turns: Summary::of(tickets.iter().map(Ticket::turn_count).collect()),
        rounds: Summary::of(tickets.iter().map(|t| t.rounds.len()).collect()),
    })
}

impl std::fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<20} {:>8} {:>8}", "", "Median", "Mean")?;
        for (name, s) in [
            ("Number of Messages", self.messages),
            ("Number of Turns", self.turns),
            ("Number of Rounds", self.rounds),
        ] {
            writeln!(f, "{:<20} {:>8.1} {:>8.2}", name, s.median, s.mean)?;
        }
        write!(f, "({} tickets)", self.tickets)
    }
}

//! Recall@Top3 and its round-pooled (Recall-r) and ticket-averaged
//! (Recall-t) aggregates.

mod benchmark;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use benchmark::{
    format_table, mean_and_standard_error, run_benchmark, BenchmarkData, BenchmarkReport, MethodReport, RunOutcome,
    REFERENCE_RESULTS,
};

use crate::error::{Error, Result};
use crate::model::{predict_topk, Model, SequenceExample};

pub const TOP_K: usize = 3;

/// |Ŷ ∩ Y| / min(|Y|, |Ŷ|).
pub fn recall_at_top3(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("recall is undefined for an empty truth set".into()));
    }
    if predicted.is_empty() || predicted.len() > TOP_K {
        return Err(Error::InvalidArgument(format!(
            "expected between 1 and {TOP_K} predictions, got {}",
            predicted.len()
        )));
    }
    let hits = predicted.iter().filter(|j| truth.contains(j)).count();
    Ok(hits as f64 / truth.len().min(predicted.len()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEvaluation {
    pub ticket_id: String,
    pub round_index: usize,
    pub predicted: Vec<usize>,
    pub truth: Vec<usize>,
    /// `None` for invalid rounds (no candidate asked next).
    pub recall: Option<f64>,
}

impl RoundEvaluation {
    pub fn new(ticket_id: &str, round_index: usize, predicted: Vec<usize>, truth: Vec<usize>) -> Result<Self> {
        let recall = if truth.is_empty() {
            None
        } else {
            Some(recall_at_top3(&predicted, &truth)?)
        };
        Ok(RoundEvaluation {
            ticket_id: ticket_id.to_string(),
            round_index,
            predicted,
            truth,
            recall,
        })
    }

    pub fn is_valid(&self) -> bool {
        self.recall.is_some()
    }
}

/// Mean over all valid rounds, pooled across tickets.
pub fn aggregate_recall_r(rounds: &[RoundEvaluation]) -> Result<f64> {
    let values: Vec<f64> = rounds.iter().filter_map(|r| r.recall).collect();
    if values.is_empty() {
        return Err(Error::Empty("no valid rounds"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean of per-ticket means; tickets without valid rounds are excluded.
pub fn aggregate_recall_t(rounds: &[RoundEvaluation]) -> Result<f64> {
    let mut per_ticket: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in rounds {
        if let Some(v) = r.recall {
            let entry = per_ticket.entry(&r.ticket_id).or_default();
            entry.0 += v;
            entry.1 += 1;
        }
    }
    if per_ticket.is_empty() {
        return Err(Error::Empty("no ticket with a valid round"));
    }
    let total: f64 = per_ticket.values().map(|(s, n)| s / *n as f64).sum();
    Ok(total / per_ticket.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rounds: Vec<RoundEvaluation>,
    pub recall_r: f64,
    pub recall_t: f64,
}

/// Top-3 suggestions for every round of `examples`, scored against their targets.
pub fn evaluate_model(model: &Model, examples: &[SequenceExample]) -> Result<Evaluation> {
    let k = TOP_K.min(model.n_candidates());
    let mut rounds = Vec::new();
    for ex in examples {
        for (t, p) in model.predict_sequence(ex)?.iter().enumerate() {
            rounds.push(RoundEvaluation::new(&ex.ticket_id, t + 1, predict_topk(p, k)?, ex.targets[t].clone())?);
        }
    }
    Ok(Evaluation {
        recall_r: aggregate_recall_r(&rounds)?,
        recall_t: aggregate_recall_t(&rounds)?,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn round(ticket: &str, predicted: &[usize], truth: &[usize]) -> RoundEvaluation {
        RoundEvaluation::new(ticket, 1, predicted.to_vec(), truth.to_vec()).unwrap()
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall_at_top3(&[3, 7, 9], &[3]).unwrap(), 1.0);
        assert_eq!(recall_at_top3(&[2, 5, 9], &[1, 2, 4, 5]).unwrap(), 2.0 / 3.0);
        assert_eq!(recall_at_top3(&[1, 2, 3], &[8]).unwrap(), 0.0);
        assert!(recall_at_top3(&[1, 2, 3], &[]).is_err());
        assert!(recall_at_top3(&[1, 2, 3, 4], &[1]).is_err());
        assert_eq!(recall_at_top3(&[4, 1], &[1, 4, 6]).unwrap(), 1.0);
    }

    #[test]
    fn aggregate_examples() {
        let rounds = [round("a", &[1, 2, 3], &[1]), round("a", &[1, 2, 3], &[5])];
        assert_eq!(aggregate_recall_r(&rounds).unwrap(), 0.5);

        let rounds = [
            round("a", &[1, 2, 3], &[]),
            round("a", &[1, 2, 3], &[1, 4, 5, 6, 7]),
            round("b", &[1, 2, 3], &[]),
        ];
        assert!((aggregate_recall_r(&rounds).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let rounds = [
            round("a", &[1, 2, 3], &[1]),
            round("b", &[1, 2, 3], &[9]),
            round("b", &[1, 2, 3], &[9]),
        ];
        assert!((aggregate_recall_r(&rounds).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(aggregate_recall_t(&rounds).unwrap(), 0.5);

        let single = [round("a", &[1, 2, 3], &[1]), round("a", &[1, 2, 3], &[7])];
        assert_eq!(aggregate_recall_t(&single).unwrap(), aggregate_recall_r(&single).unwrap());

        let invalid = [round("a", &[1, 2, 3], &[])];
        assert!(aggregate_recall_r(&invalid).is_err());
        assert!(aggregate_recall_t(&invalid).is_err());
    }

    fn arb_round() -> impl Strategy<Value = (u8, Vec<usize>, Vec<usize>)> {
        (
            0u8..5,
            prop::sample::subsequence((0..8).collect::<Vec<usize>>(), 3),
            prop::sample::subsequence((0..8).collect::<Vec<usize>>(), 0..5),
        )
    }

    proptest! {
        #[test]
        fn recall_is_bounded_and_full_on_containment(
            predicted in prop::sample::subsequence((0..10).collect::<Vec<usize>>(), 1..=3),
            truth in prop::sample::subsequence((0..10).collect::<Vec<usize>>(), 1..6),
        ) {
            let r = recall_at_top3(&predicted, &truth).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            if predicted.iter().all(|j| truth.contains(j)) || truth.iter().all(|j| predicted.contains(j)) {
                prop_assert_eq!(r, 1.0);
            }
        }

        #[test]
        fn invalid_rounds_never_change_aggregates(
            rounds in prop::collection::vec(arb_round(), 1..30),
            noise in prop::collection::vec((0u8..5, prop::sample::subsequence((0..8).collect::<Vec<usize>>(), 3)), 0..10),
        ) {
            let base: Vec<RoundEvaluation> = rounds
                .iter()
                .map(|(t, p, y)| round(&t.to_string(), p, y))
                .collect();
            let mut noisy = base.clone();
            for (i, (t, p)) in noise.iter().enumerate() {
                noisy.insert(i.min(noisy.len()), round(&t.to_string(), p, &[]));
            }
            prop_assert_eq!(aggregate_recall_r(&base).ok(), aggregate_recall_r(&noisy).ok());
            prop_assert_eq!(aggregate_recall_t(&base).ok(), aggregate_recall_t(&noisy).ok());
        }

        #[test]
        fn equal_round_counts_make_aggregates_agree(
            per_ticket in 1usize..5,
            values in prop::collection::vec(prop::sample::subsequence((0..6).collect::<Vec<usize>>(), 1..4), 1..6),
        ) {
            let mut rounds = Vec::new();
            for (t, truth) in values.iter().enumerate() {
                for k in 0..per_ticket {
                    let predicted: Vec<usize> = (k..k + 3).map(|j| j % 6).collect();
                    rounds.push(round(&t.to_string(), &predicted, truth));
                }
            }
            let r = aggregate_recall_r(&rounds).unwrap();
            let t = aggregate_recall_t(&rounds).unwrap();
            prop_assert!((r - t).abs() < 1e-12);
        }
    }
}

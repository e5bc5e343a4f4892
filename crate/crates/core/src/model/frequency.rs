use serde::{Deserialize, Serialize};

use super::SequenceExample;

/// Per-issue candidate counts. Predictions are static for a whole
/// conversation; missing and unseen issues use the global counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyModel {
    n_candidates: usize,
    per_issue: Vec<Vec<u64>>,
    global: Vec<u64>,
}

impl FrequencyModel {
    pub fn empty(n_candidates: usize, n_issues: usize) -> Self {
        FrequencyModel {
            n_candidates,
            per_issue: vec![vec![0; n_candidates]; n_issues],
            global: vec![0; n_candidates],
        }
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn n_issues(&self) -> usize {
        self.per_issue.len()
    }

    pub fn counts(&self, issue_slot: usize) -> &[u64] {
        match self.per_issue.get(issue_slot) {
            Some(row) if row.iter().any(|&c| c > 0) => row,
            _ => &self.global,
        }
    }

    pub fn global_counts(&self) -> &[u64] {
        &self.global
    }

    /// Add-one smoothed frequencies; the ranking equals the count ranking.
    pub fn distribution(&self, issue_slot: usize) -> Vec<f64> {
        let counts = self.counts(issue_slot);
        let total = counts.iter().sum::<u64>() as f64 + self.n_candidates as f64;
        counts.iter().map(|&c| (c as f64 + 1.0) / total).collect()
    }

    pub(crate) fn data_loss(&self, example: &SequenceExample) -> f64 {
        let slot = super::issue_slot(example.issue_id, self.n_issues());
        let p = self.distribution(slot);
        example
            .targets
            .iter()
            .flatten()
            .map(|&j| -p[j].ln())
            .sum()
    }
}

/// Counts how often each candidate is asked in the training tickets of each issue.
pub fn fit_frequency(train: &[SequenceExample], n_candidates: usize, n_issues: usize) -> FrequencyModel {
    let mut model = FrequencyModel::empty(n_candidates, n_issues);
    for ex in train {
        for &j in ex.targets.iter().flatten() {
            model.global[j] += 1;
            if let Some(i) = ex.issue_id.filter(|&i| i < n_issues) {
                model.per_issue[i][j] += 1;
            }
        }
    }
    model
}

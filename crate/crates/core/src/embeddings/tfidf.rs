use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocumentUnit {
    Sentence,
    Turn,
}

/// Document frequencies over a collection of documents of one unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfIdfStats {
    pub unit: DocumentUnit,
    pub n_docs: u64,
    pub df: BTreeMap<String, u64>,
}

impl TfIdfStats {
    pub fn from_counts(unit: DocumentUnit, n_docs: u64, df: BTreeMap<String, u64>) -> Self {
        TfIdfStats { unit, n_docs, df }
    }

    pub fn df(&self, token: &str) -> Option<u64> {
        self.df.get(token).copied()
    }

    /// ln(N / df); `None` for tokens never observed.
    pub fn idf(&self, token: &str) -> Option<f64> {
        self.df(token)
            .map(|df| (self.n_docs as f64 / df as f64).ln())
    }
}

pub fn compute_tfidf<D, S>(documents: &[D], unit: DocumentUnit) -> TfIdfStats
where
    D: AsRef<[S]>,
    S: AsRef<str>,
{
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for doc in documents {
        let distinct: HashSet<&str> = doc.as_ref().iter().map(AsRef::as_ref).collect();
        for token in distinct {
            *df.entry(token.to_string()).or_default() += 1;
        }
    }
    TfIdfStats {
        unit,
        n_docs: documents.len() as u64,
        df,
    }
}

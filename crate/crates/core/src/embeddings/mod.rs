//! Word vectors, Tf-Idf statistics and Tf-Idf-weighted text embeddings.

mod io;
mod tfidf;
mod word2vec;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use io::{load_tfidf, load_word_vectors, save_tfidf, save_word_vectors};
pub use tfidf::{compute_tfidf, DocumentUnit, TfIdfStats};
pub use word2vec::{train_word2vec, Word2VecConfig};

/// Dense token index with per-token counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_count` times, most frequent first
    /// (ties lexicographic).
    pub fn build<S: AsRef<str>>(streams: &[Vec<S>], min_count: u64) -> Self {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for stream in streams {
            for token in stream {
                *counts.entry(token.as_ref()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_parts(
            kept.iter().map(|(w, _)| w.to_string()).collect(),
            kept.iter().map(|(_, c)| *c).collect(),
            min_count,
        )
    }

    pub(crate) fn from_parts(words: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary {
            words,
            counts,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn word(&self, index: usize) -> &str {
        &self.words[index]
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// A V×d matrix of word vectors, row `i` belonging to vocabulary token `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
}

impl WordVectors {
    pub fn new(vocab: Vocabulary, dim: usize, data: Vec<f64>) -> crate::Result<Self> {
        if data.len() != vocab.len() * dim {
            return Err(crate::Error::Dimension {
                context: "word vector matrix",
                expected: vocab.len() * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::Validation("word vectors contain NaN or Inf".into()));
        }
        Ok(WordVectors { vocab, dim, data })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab.get(token).map(|i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> WordVectors {
        WordVectors {
            vocab: self.vocab.clone(),
            dim: self.dim,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextEmbedding {
    pub unit: DocumentUnit,
    pub vector: Vec<f64>,
}

impl TextEmbedding {
    pub fn is_zero(&self) -> bool {
        self.vector.iter().all(|v| *v == 0.0)
    }
}

/// Tf-Idf-weighted mean of the in-vocabulary token vectors, with
/// idf(w) = ln(N / df(w)). Tokens unknown to either the vectors or the
/// statistics are skipped; zero total weight yields the zero vector.
pub fn embed_text<S: AsRef<str>>(tokens: &[S], vectors: &WordVectors, stats: &TfIdfStats) -> TextEmbedding {
    let mut tf: HashMap<&str, f64> = HashMap::new();
    for token in tokens {
        *tf.entry(token.as_ref()).or_default() += 1.0;
    }
    // Sorted so the floating-point summation order is fixed.
    let mut terms: Vec<(&str, f64)> = tf.into_iter().collect();
    terms.sort_by(|a, b| a.0.cmp(b.0));

    let mut sum = vec![0.0; vectors.dim()];
    let mut mass = 0.0;
    for (token, count) in terms {
        let (Some(vec), Some(idf)) = (vectors.get(token), stats.idf(token)) else {
            continue;
        };
        let weight = count * idf;
        if weight <= 0.0 {
            continue;
        }
        mass += weight;
        for (s, v) in sum.iter_mut().zip(vec) {
            *s += weight * v;
        }
    }
    if mass > 0.0 {
        sum.iter_mut().for_each(|s| *s /= mass);
    }
    TextEmbedding {
        unit: stats.unit,
        vector: sum,
    }
}

/// Word vectors paired with the Tf-Idf statistics of one document unit.
#[derive(Clone, Copy, Debug)]
pub struct Embedder<'a> {
    pub vectors: &'a WordVectors,
    pub stats: &'a TfIdfStats,
}

impl<'a> Embedder<'a> {
    pub fn new(vectors: &'a WordVectors, stats: &'a TfIdfStats) -> Self {
        Embedder { vectors, stats }
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn embed<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        embed_text(tokens, self.vectors, self.stats).vector
    }

    /// Embeds the token multiset of several sentences (e.g. a whole turn).
    pub fn embed_all<'s, I>(&self, sentences: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'s [String]>,
    {
        let tokens: Vec<&str> = sentences.into_iter().flatten().map(String::as_str).collect();
        self.embed(&tokens)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales to unit length; the zero vector is returned unchanged.
pub fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    if n == 0.0 {
        a.to_vec()
    } else {
        a.iter().map(|v| v / n).collect()
    }
}

/// a·b / (‖a‖‖b‖), or 0 when either vector is zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

//! Skip-gram with negative sampling, single-threaded and deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Vocabulary, WordVectors};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: u64,
    /// Initial learning rate, decayed linearly to 1e-4 of itself.
    pub learning_rate: f64,
    /// Frequent-word subsampling threshold; 0 disables subsampling.
    pub subsample: f64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 5,
            learning_rate: 0.025,
            subsample: 1e-3,
        }
    }
}

impl Word2VecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.epochs == 0 || self.min_count == 0 {
            return Err(Error::InvalidArgument(
                "word2vec dim, window, epochs and min_count must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || !(self.subsample >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "invalid word2vec learning_rate {} or subsample {}",
                self.learning_rate, self.subsample
            )));
        }
        Ok(())
    }
}

/// Samples negatives from the unigram distribution raised to 3/4.
struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(vocab: &Vocabulary) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..vocab.len())
            .map(|i| {
                acc += (vocab.count(i) as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let r = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= r)
            .min(self.cumulative.len() - 1)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains skip-gram word vectors. Tokens below `min_count` are dropped
/// before training.
pub fn train_word2vec<S: AsRef<str>>(streams: &[Vec<S>], config: &Word2VecConfig, seed: u64) -> Result<WordVectors> {
    config.validate()?;
    let vocab = Vocabulary::build(streams, config.min_count);
    if vocab.is_empty() {
        return Err(Error::Empty("word2vec corpus has no token reaching min_count"));
    }
    let encoded: Vec<Vec<usize>> = streams
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.get(t.as_ref())).collect())
        .collect();
    let total: u64 = (0..vocab.len()).map(|i| vocab.count(i)).sum();

    let keep_prob: Vec<f64> = (0..vocab.len())
        .map(|i| {
            if config.subsample <= 0.0 {
                return 1.0;
            }
            let threshold = config.subsample * total as f64;
            let f = vocab.count(i) as f64;
            ((f / threshold).sqrt() + 1.0) * threshold / f
        })
        .collect();

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut input: Vec<f64> = (0..vocab.len() * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0; vocab.len() * dim];
    let sampler = NegativeSampler::new(&vocab);
    let mut grad = vec![0.0; dim];

    let planned = (total * config.epochs as u64).max(1) as f64;
    let mut processed = 0u64;
    for _ in 0..config.epochs {
        for sentence in &encoded {
            let kept: Vec<usize> = sentence
                .iter()
                .copied()
                .filter(|&w| keep_prob[w] >= 1.0 || rng.random::<f64>() < keep_prob[w])
                .collect();
            processed += sentence.len() as u64;
            let lr = config.learning_rate * (1.0 - processed as f64 / planned).max(1e-4);
            for (pos, &center) in kept.iter().enumerate() {
                let reach = rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (ctx_pos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if ctx_pos == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let center_row = center * dim..(center + 1) * dim;
                    for n in 0..=config.negatives {
                        let (target, label) = if n == 0 {
                            (context, 1.0)
                        } else {
                            let t = sampler.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let target_row = target * dim..(target + 1) * dim;
                        let f: f64 = input[center_row.clone()]
                            .iter()
                            .zip(&output[target_row.clone()])
                            .map(|(a, b)| a * b)
                            .sum();
                        let g = (label - sigmoid(f)) * lr;
                        for ((gr, o), i) in grad
                            .iter_mut()
                            .zip(&mut output[target_row])
                            .zip(&input[center_row.clone()])
                        {
                            *gr += g * *o;
                            *o += g * i;
                        }
                    }
                    for (i, g) in input[center_row].iter_mut().zip(&grad) {
                        *i += g;
                    }
                }
            }
        }
    }
    WordVectors::new(vocab, dim, input)
}

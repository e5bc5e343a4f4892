use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
}

/// Random ticket-level split. Validation and test sizes are rounded from
/// their ratios (at least one each); training receives the remainder.
pub fn split_corpus<T: Clone>(items: &[T], ratios: SplitRatios, seed: u64) -> Result<Splits<T>> {
    let parts = [ratios.train, ratios.validation, ratios.test];
    if parts.iter().any(|r| !(r.is_finite() && *r > 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be positive and sum to 1, got {parts:?}"
        )));
    }
    let n = items.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} tickets into 3 partitions"
        )));
    }
    let n_val = ((n as f64 * ratios.validation).round() as usize).max(1);
    let n_test = ((n as f64 * ratios.test).round() as usize).max(1);
    if n_val + n_test >= n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} tickets leaves no training data"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    let n_train = n - n_val - n_test;
    Ok(Splits {
        train: pick(&order[..n_train]),
        validation: pick(&order[n_train..n_train + n_val]),
        test: pick(&order[n_train + n_val..]),
    })
}

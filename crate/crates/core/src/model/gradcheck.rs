//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Model, ModelDims, SequenceExample};
use crate::error::Result;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is essentially zero are judged on absolute error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    pub coordinates: usize,
    pub max_relative_error: f64,
    /// Coordinate with the largest relative error: (index, analytic, numeric).
    pub worst: Option<(usize, f64, f64)>,
}

/// |a − n| / max(|a|, |n|, floor).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares every coordinate of the analytic gradient against central
/// differences of the loss with the given step.
pub fn check_gradients(model: &Model, examples: &[SequenceExample], lambda: f64, step: f64) -> Result<GradientCheck> {
    let (_, analytic) = model.loss_and_gradient(examples, lambda)?;
    let mut probe = model.clone();
    let mut report = GradientCheck {
        coordinates: analytic.len(),
        max_relative_error: 0.0,
        worst: None,
    };
    for (k, &a) in analytic.iter().enumerate() {
        let original = probe.params()[k];
        probe.params_mut()[k] = original + step;
        let plus = probe.loss(examples, lambda)?;
        probe.params_mut()[k] = original - step;
        let minus = probe.loss(examples, lambda)?;
        probe.params_mut()[k] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(a, numeric);
        if report.worst.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = Some((k, a, numeric));
        }
    }
    Ok(report)
}

/// Tiny fixture: H=3, m=4, d=5, I=2, two tickets of three rounds with
/// multi-hot and empty targets; the first round's agent half is zero.
pub fn tiny_fixture(seed: u64) -> (ModelDims, Vec<SequenceExample>) {
    let dims = ModelDims {
        embedding_dim: 5,
        n_candidates: 4,
        n_issues: 2,
        hidden: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = [
        vec![vec![1], vec![0, 2], vec![]],
        vec![vec![3], vec![], vec![1, 2, 3]],
    ];
    let issues = [Some(1), None];
    let examples = targets
        .into_iter()
        .zip(issues)
        .enumerate()
        .map(|(i, (targets, issue_id))| {
            let inputs = (0..3)
                .map(|t| {
                    (0..2 * dims.embedding_dim)
                        .map(|k| if t == 0 && k < dims.embedding_dim { 0.0 } else { rng.random_range(-1.0..1.0) })
                        .collect()
                })
                .collect();
            SequenceExample {
                ticket_id: format!("g{i}"),
                issue_id,
                inputs,
                targets,
            }
        })
        .collect();
    (dims, examples)
}

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    column_accumulate, column_add, gemv_add, issue_slot, logit_gradient, outer_add, softmax, target_loss, uniform_init,
    ModelDims, SequenceExample,
};
use crate::error::{Error, Result};

/// Short-term linear model: logits = W x_t (+ W_μ μ) + b.
///
/// Parameter layout: `W` (m × 2d), then `W_μ` (m × (I+1)) when the issue is
/// used, then `b` (m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    dims: ModelDims,
    with_issue: bool,
    params: Vec<f64>,
}

struct Blocks {
    w: std::ops::Range<usize>,
    w_mu: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
}

impl LinearModel {
    pub fn init(dims: ModelDims, with_issue: bool, scale: f64, seed: u64) -> Self {
        let mut model = LinearModel {
            dims,
            with_issue,
            params: Vec::new(),
        };
        let blocks = model.blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = uniform_init(blocks.w_mu.end, scale, &mut rng);
        params.resize(blocks.b.end, 0.0);
        model.params = params;
        model
    }

    pub fn from_params(dims: ModelDims, with_issue: bool, params: Vec<f64>) -> Result<Self> {
        let model = LinearModel {
            dims,
            with_issue,
            params,
        };
        let expected = model.blocks().b.end;
        if model.params.len() != expected {
            return Err(Error::Dimension {
                context: "linear parameters",
                expected,
                got: model.params.len(),
            });
        }
        Ok(model)
    }

    fn blocks(&self) -> Blocks {
        let m = self.dims.n_candidates;
        let w = 0..m * self.dims.input_dim();
        let w_mu = w.end..w.end + if self.with_issue { m * self.dims.issue_slots() } else { 0 };
        let b = w_mu.end..w_mu.end + m;
        Blocks { w, w_mu, b }
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn with_issue(&self) -> bool {
        self.with_issue
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims.input_dim() {
            return Err(Error::Dimension {
                context: "linear input",
                expected: self.dims.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64], issue_slot: usize) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let blocks = self.blocks();
        let mut z = self.params[blocks.b.clone()].to_vec();
        gemv_add(&self.params[blocks.w], x, &mut z);
        if self.with_issue {
            column_add(&self.params[blocks.w_mu], self.dims.issue_slots(), issue_slot, &mut z);
        }
        Ok(z)
    }

    pub fn forward(&self, x: &[f64], issue_slot: usize) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(x, issue_slot)?))
    }

    pub(crate) fn data_loss(&self, example: &SequenceExample) -> Result<f64> {
        let slot = issue_slot(example.issue_id, self.dims.n_issues);
        let mut loss = 0.0;
        for (x, y) in example.inputs.iter().zip(&example.targets) {
            if !y.is_empty() {
                loss += target_loss(&self.logits(x, slot)?, y);
            }
        }
        Ok(loss)
    }

    pub(crate) fn accumulate(&self, example: &SequenceExample, grad: &mut [f64]) -> Result<f64> {
        let blocks = self.blocks();
        let slot = issue_slot(example.issue_id, self.dims.n_issues);
        let mut loss = 0.0;
        for (x, y) in example.inputs.iter().zip(&example.targets) {
            if y.is_empty() {
                continue;
            }
            let z = self.logits(x, slot)?;
            loss += target_loss(&z, y);
            let dz = logit_gradient(&softmax(&z), y);
            outer_add(&mut grad[blocks.w.clone()], &dz, x);
            if self.with_issue {
                column_accumulate(&mut grad[blocks.w_mu.clone()], self.dims.issue_slots(), slot, &dz);
            }
            for (g, d) in grad[blocks.b.clone()].iter_mut().zip(&dz) {
                *g += d;
            }
        }
        Ok(loss)
    }
}

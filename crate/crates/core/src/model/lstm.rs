use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    column_accumulate, column_add, gemv_add, gemv_t_add, issue_slot, logit_gradient, outer_add, softmax, target_loss,
    uniform_init, ModelDims, SequenceExample,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }
}

/// Named parameter blocks in the flat vector, in storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmBlocks {
    /// Gate weights over x_t, 4H × 2d, gate order i, f, g, o.
    pub w_x: Range<usize>,
    /// Gate weights over μ, 4H × (I+1); empty unless the issue enters the input.
    pub w_mu: Range<usize>,
    /// Recurrent weights, 4H × H.
    pub u: Range<usize>,
    /// Gate biases, 4H.
    pub b: Range<usize>,
    /// Output rows w_j, m × H.
    pub w_out: Range<usize>,
    /// Output weights over μ, m × (I+1); empty unless the issue enters the output.
    pub v_out: Range<usize>,
}

/// Long-term model: an LSTM over round inputs with a softmax output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    dims: ModelDims,
    issue_in: bool,
    issue_out: bool,
    params: Vec<f64>,
}

struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates i, f, g, o.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    p: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmModel {
    pub fn init(dims: ModelDims, issue_in: bool, issue_out: bool, scale: f64, seed: u64) -> Self {
        let mut model = LstmModel {
            dims,
            issue_in,
            issue_out,
            params: Vec::new(),
        };
        let blocks = model.blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; blocks.v_out.end];
        for range in [&blocks.w_x, &blocks.w_mu, &blocks.u, &blocks.w_out, &blocks.v_out] {
            let values = uniform_init(range.len(), scale, &mut rng);
            params[range.clone()].copy_from_slice(&values);
        }
        let h = dims.hidden;
        for f in &mut params[blocks.b.start + h..blocks.b.start + 2 * h] {
            *f = 1.0;
        }
        model.params = params;
        model
    }

    pub fn from_params(dims: ModelDims, issue_in: bool, issue_out: bool, params: Vec<f64>) -> Result<Self> {
        let model = LstmModel {
            dims,
            issue_in,
            issue_out,
            params,
        };
        let expected = model.blocks().v_out.end;
        if model.params.len() != expected {
            return Err(Error::Dimension {
                context: "LSTM parameters",
                expected,
                got: model.params.len(),
            });
        }
        Ok(model)
    }

    pub fn blocks(&self) -> LstmBlocks {
        let (h4, h, m) = (4 * self.dims.hidden, self.dims.hidden, self.dims.n_candidates);
        let slots = self.dims.issue_slots();
        let w_x = 0..h4 * self.dims.input_dim();
        let w_mu = w_x.end..w_x.end + if self.issue_in { h4 * slots } else { 0 };
        let u = w_mu.end..w_mu.end + h4 * h;
        let b = u.end..u.end + h4;
        let w_out = b.end..b.end + m * h;
        let v_out = w_out.end..w_out.end + if self.issue_out { m * slots } else { 0 };
        LstmBlocks {
            w_x,
            w_mu,
            u,
            b,
            w_out,
            v_out,
        }
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn issue_in(&self) -> bool {
        self.issue_in
    }

    pub fn issue_out(&self) -> bool {
        self.issue_out
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn zero_state(&self) -> LstmState {
        LstmState {
            h: vec![0.0; self.dims.hidden],
            c: vec![0.0; self.dims.hidden],
        }
    }

    /// Gate activations for one step: i, f, g, o stacked.
    fn gates(&self, blocks: &LstmBlocks, x: &[f64], h_prev: &[f64], slot: usize) -> Vec<f64> {
        let hidden = self.dims.hidden;
        let mut a = self.params[blocks.b.clone()].to_vec();
        gemv_add(&self.params[blocks.w_x.clone()], x, &mut a);
        if self.issue_in {
            column_add(&self.params[blocks.w_mu.clone()], self.dims.issue_slots(), slot, &mut a);
        }
        gemv_add(&self.params[blocks.u.clone()], h_prev, &mut a);
        for (k, v) in a.iter_mut().enumerate() {
            *v = if k / hidden == 2 { v.tanh() } else { sigmoid(*v) };
        }
        a
    }

    fn check(&self, x: &[f64], state: &LstmState) -> Result<()> {
        if x.len() != self.dims.input_dim() {
            return Err(Error::Dimension {
                context: "LSTM input",
                expected: self.dims.input_dim(),
                got: x.len(),
            });
        }
        if state.h.len() != self.dims.hidden || state.c.len() != self.dims.hidden {
            return Err(Error::Dimension {
                context: "LSTM state",
                expected: self.dims.hidden,
                got: state.h.len().max(state.c.len()),
            });
        }
        Ok(())
    }

    /// One cell update (h_{t-1}, c_{t-1}) → (h_t, c_t).
    pub fn step(&self, state: &LstmState, x: &[f64], issue_slot: usize) -> Result<LstmState> {
        self.check(x, state)?;
        let gates = self.gates(&self.blocks(), x, &state.h, issue_slot);
        let (c, _, h) = self.cell(&gates, &state.c);
        Ok(LstmState { h, c })
    }

    fn cell(&self, gates: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hidden = self.dims.hidden;
        let (i, rest) = gates.split_at(hidden);
        let (f, rest) = rest.split_at(hidden);
        let (g, o) = rest.split_at(hidden);
        let c: Vec<f64> = (0..hidden).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();
        (c, tanh_c, h)
    }

    pub fn logits(&self, h: &[f64], issue_slot: usize) -> Vec<f64> {
        let blocks = self.blocks();
        let mut z = vec![0.0; self.dims.n_candidates];
        gemv_add(&self.params[blocks.w_out], h, &mut z);
        if self.issue_out {
            column_add(&self.params[blocks.v_out], self.dims.issue_slots(), issue_slot, &mut z);
        }
        z
    }

    /// p_t = softmax(W_out h_t (+ V_out μ)).
    pub fn output(&self, h: &[f64], issue_slot: usize) -> Vec<f64> {
        softmax(&self.logits(h, issue_slot))
    }

    pub(crate) fn data_loss(&self, example: &SequenceExample) -> Result<f64> {
        let slot = issue_slot(example.issue_id, self.dims.n_issues);
        let mut state = self.zero_state();
        let mut loss = 0.0;
        for (t, (x, y)) in example.inputs.iter().zip(&example.targets).enumerate() {
            state = self.step(&state, x, slot)?;
            if !state.is_finite() {
                return Err(Error::NonFinite { round: t + 1 });
            }
            loss += target_loss(&self.logits(&state.h, slot), y);
        }
        Ok(loss)
    }

    /// Full backpropagation through time over one ticket.
    pub(crate) fn accumulate(&self, example: &SequenceExample, grad: &mut [f64]) -> Result<f64> {
        let blocks = self.blocks();
        let hidden = self.dims.hidden;
        let slots = self.dims.issue_slots();
        let slot = issue_slot(example.issue_id, self.dims.n_issues);

        let mut caches: Vec<StepCache> = Vec::with_capacity(example.rounds());
        let mut state = self.zero_state();
        let mut loss = 0.0;
        for (t, (x, y)) in example.inputs.iter().zip(&example.targets).enumerate() {
            self.check(x, &state)?;
            let gates = self.gates(&blocks, x, &state.h, slot);
            let (c, tanh_c, h) = self.cell(&gates, &state.c);
            let z = self.logits(&h, slot);
            loss += target_loss(&z, y);
            let next = LstmState { h, c };
            if !next.is_finite() {
                return Err(Error::NonFinite { round: t + 1 });
            }
            let prev = std::mem::replace(&mut state, next);
            caches.push(StepCache {
                x: x.clone(),
                h_prev: prev.h,
                c_prev: prev.c,
                gates,
                tanh_c,
                h: state.h.clone(),
                p: softmax(&z),
            });
        }

        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut da = vec![0.0; 4 * hidden];
        for (cache, y) in caches.iter().zip(&example.targets).rev() {
            let mut dh = std::mem::take(&mut dh_next);
            if !y.is_empty() {
                let dz = logit_gradient(&cache.p, y);
                outer_add(&mut grad[blocks.w_out.clone()], &dz, &cache.h);
                if self.issue_out {
                    column_accumulate(&mut grad[blocks.v_out.clone()], slots, slot, &dz);
                }
                gemv_t_add(&self.params[blocks.w_out.clone()], &dz, &mut dh);
            }
            let (i, rest) = cache.gates.split_at(hidden);
            let (f, rest) = rest.split_at(hidden);
            let (g, o) = rest.split_at(hidden);
            for k in 0..hidden {
                let tc = cache.tanh_c[k];
                let dc = dh[k] * o[k] * (1.0 - tc * tc) + dc_next[k];
                da[k] = dc * g[k] * i[k] * (1.0 - i[k]);
                da[hidden + k] = dc * cache.c_prev[k] * f[k] * (1.0 - f[k]);
                da[2 * hidden + k] = dc * i[k] * (1.0 - g[k] * g[k]);
                da[3 * hidden + k] = dh[k] * tc * o[k] * (1.0 - o[k]);
                dc_next[k] = dc * f[k];
            }
            outer_add(&mut grad[blocks.w_x.clone()], &da, &cache.x);
            if self.issue_in {
                column_accumulate(&mut grad[blocks.w_mu.clone()], slots, slot, &da);
            }
            outer_add(&mut grad[blocks.u.clone()], &da, &cache.h_prev);
            for (gb, d) in grad[blocks.b.clone()].iter_mut().zip(&da) {
                *gb += d;
            }
            dh_next = vec![0.0; hidden];
            gemv_t_add(&self.params[blocks.u.clone()], &da, &mut dh_next);
        }
        Ok(loss)
    }
}

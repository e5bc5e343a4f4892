//! Recommenders: issue-wise frequency, short-term linear (±issue) and the
//! recurrent LSTM with its three issue-feature variants.

mod checkpoint;
mod frequency;
pub mod gradcheck;
mod linear;
mod lstm;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, vocabulary_hash, Checkpoint, CHECKPOINT_VERSION};
pub use frequency::{fit_frequency, FrequencyModel};
pub use linear::LinearModel;
pub use lstm::{LstmModel, LstmState};
pub use train::{grid_search, train_model, AdamConfig, EpochRecord, GridSearch, TrainConfig, TrainedModel};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Frequency,
    Linear,
    LinearIssue,
    Lstm,
    LstmIssueIn,
    LstmIssueOut,
    LstmIssueInOut,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Frequency,
        Variant::Linear,
        Variant::LinearIssue,
        Variant::Lstm,
        Variant::LstmIssueIn,
        Variant::LstmIssueOut,
        Variant::LstmIssueInOut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Frequency => "freq",
            Variant::Linear => "linear",
            Variant::LinearIssue => "linear+issue",
            Variant::Lstm => "lstm",
            Variant::LstmIssueIn => "lstm+issue_in",
            Variant::LstmIssueOut => "lstm+issue_out",
            Variant::LstmIssueInOut => "lstm+issue_inout",
        }
    }

    /// Row label used in benchmark tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Frequency => "Issue frequency",
            Variant::Linear => "Short-term linear",
            Variant::LinearIssue => "Short-term linear + issue",
            Variant::Lstm => "LSTM",
            Variant::LstmIssueIn => "LSTM + issue (input)",
            Variant::LstmIssueOut => "LSTM + issue (output)",
            Variant::LstmIssueInOut => "LSTM + issue (input & output)",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(
            self,
            Variant::Lstm | Variant::LstmIssueIn | Variant::LstmIssueOut | Variant::LstmIssueInOut
        )
    }

    pub fn issue_in_input(self) -> bool {
        matches!(self, Variant::LinearIssue | Variant::LstmIssueIn | Variant::LstmIssueInOut)
    }

    pub fn issue_in_output(self) -> bool {
        matches!(self, Variant::LstmIssueOut | Variant::LstmIssueInOut)
    }

    /// Whether training depends on random initialization.
    pub fn is_stochastic(self) -> bool {
        self != Variant::Frequency
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .or(match s {
                "frequency" => Some(Variant::Frequency),
                "lstm+issue" => Some(Variant::LstmIssueInOut),
                _ => None,
            })
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::InvalidArgument(format!("unknown model variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shapes shared by every variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Turn-embedding dimension d; each round input has length 2d.
    pub embedding_dim: usize,
    /// Number of candidates m.
    pub n_candidates: usize,
    /// Number of issue categories I; the issue vector has I + 1 slots.
    pub n_issues: usize,
    /// Hidden size H (recurrent variants only).
    pub hidden: usize,
}

impl ModelDims {
    pub fn input_dim(&self) -> usize {
        2 * self.embedding_dim
    }

    pub fn issue_slots(&self) -> usize {
        self.n_issues + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.n_candidates == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive: d={}, m={}, H={}",
                self.embedding_dim, self.n_candidates, self.hidden
            )));
        }
        Ok(())
    }
}

/// Index of the hot coordinate of the issue vector; unknown and missing
/// issues share the last slot.
pub fn issue_slot(issue_id: Option<usize>, n_issues: usize) -> usize {
    match issue_id {
        Some(i) if i < n_issues => i,
        _ => n_issues,
    }
}

/// One-hot issue vector μ of length I + 1.
pub fn issue_vector(issue_id: Option<usize>, n_issues: usize) -> Vec<f64> {
    let mut mu = vec![0.0; n_issues + 1];
    mu[issue_slot(issue_id, n_issues)] = 1.0;
    mu
}

/// One ticket as model input: per-round inputs x_t = [x_t^(a); x_t^(c)] and
/// the candidate ids asked in the following agent turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceExample {
    pub ticket_id: String,
    pub issue_id: Option<usize>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<usize>>,
}

impl SequenceExample {
    pub fn rounds(&self) -> usize {
        self.inputs.len()
    }

    pub fn validate(&self, dims: &ModelDims) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::Dimension {
                context: "targets per round",
                expected: self.inputs.len(),
                got: self.targets.len(),
            });
        }
        for x in &self.inputs {
            if x.len() != dims.input_dim() {
                return Err(Error::Dimension {
                    context: "round input",
                    expected: dims.input_dim(),
                    got: x.len(),
                });
            }
        }
        if let Some(&j) = self.targets.iter().flatten().find(|&&j| j >= dims.n_candidates) {
            return Err(Error::InvalidArgument(format!(
                "ticket {}: candidate id {j} out of range for m={}",
                self.ticket_id, dims.n_candidates
            )));
        }
        Ok(())
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn multi_hot(ids: &[usize], m: usize) -> Vec<f64> {
    let mut y = vec![0.0; m];
    for &j in ids {
        y[j] = 1.0;
    }
    y
}

/// −Σ_t Σ_j y_tj log p_tj + λ‖θ‖², with multi-hot targets used as given.
pub fn sequence_loss(probabilities: &[Vec<f64>], targets: &[Vec<f64>], lambda: f64, params: &[f64]) -> Result<f64> {
    if probabilities.len() != targets.len() {
        return Err(Error::Dimension {
            context: "sequence_loss rounds",
            expected: probabilities.len(),
            got: targets.len(),
        });
    }
    let mut loss = 0.0;
    for (p, y) in probabilities.iter().zip(targets) {
        if p.len() != y.len() {
            return Err(Error::Dimension {
                context: "sequence_loss candidates",
                expected: p.len(),
                got: y.len(),
            });
        }
        for (&pj, &yj) in p.iter().zip(y) {
            if yj != 0.0 {
                loss -= yj * pj.ln();
            }
        }
    }
    Ok(loss + lambda * params.iter().map(|t| t * t).sum::<f64>())
}

/// The k most probable candidates, ties by lowest id.
pub fn predict_topk(probabilities: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > probabilities.len() {
        return Err(Error::InvalidArgument(format!(
            "k={k} exceeds the number of candidates {}",
            probabilities.len()
        )));
    }
    let mut order: Vec<usize> = (0..probabilities.len()).collect();
    order.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Per-session inference state: the issue slot plus the recurrent state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepState {
    pub issue_slot: usize,
    pub rounds: usize,
    pub recurrent: Option<LstmState>,
}

/// A trained recommender of any variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Frequency(FrequencyModel),
    Linear(LinearModel),
    Lstm(LstmModel),
}

impl Model {
    /// Fresh parameters: uniform(−scale, scale) weights, zero biases, forget
    /// bias 1. The frequency variant starts from an empty table.
    pub fn init(variant: Variant, dims: ModelDims, init_scale: f64, seed: u64) -> Result<Model> {
        dims.validate()?;
        Ok(match variant {
            Variant::Frequency => Model::Frequency(FrequencyModel::empty(dims.n_candidates, dims.n_issues)),
            Variant::Linear | Variant::LinearIssue => {
                Model::Linear(LinearModel::init(dims, variant.issue_in_input(), init_scale, seed))
            }
            _ => Model::Lstm(LstmModel::init(
                dims,
                variant.issue_in_input(),
                variant.issue_in_output(),
                init_scale,
                seed,
            )),
        })
    }

    pub fn variant(&self) -> Variant {
        match self {
            Model::Frequency(_) => Variant::Frequency,
            Model::Linear(l) if l.with_issue() => Variant::LinearIssue,
            Model::Linear(_) => Variant::Linear,
            Model::Lstm(l) => match (l.issue_in(), l.issue_out()) {
                (false, false) => Variant::Lstm,
                (true, false) => Variant::LstmIssueIn,
                (false, true) => Variant::LstmIssueOut,
                (true, true) => Variant::LstmIssueInOut,
            },
        }
    }

    pub fn n_candidates(&self) -> usize {
        match self {
            Model::Frequency(f) => f.n_candidates(),
            Model::Linear(l) => l.dims().n_candidates,
            Model::Lstm(l) => l.dims().n_candidates,
        }
    }

    pub fn n_issues(&self) -> usize {
        match self {
            Model::Frequency(f) => f.n_issues(),
            Model::Linear(l) => l.dims().n_issues,
            Model::Lstm(l) => l.dims().n_issues,
        }
    }

    /// Flat parameter vector θ (empty for the frequency variant).
    pub fn params(&self) -> &[f64] {
        match self {
            Model::Frequency(_) => &[],
            Model::Linear(l) => l.params(),
            Model::Lstm(l) => l.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Model::Frequency(_) => &mut [],
            Model::Linear(l) => l.params_mut(),
            Model::Lstm(l) => l.params_mut(),
        }
    }

    pub fn start(&self, issue_id: Option<usize>) -> StepState {
        StepState {
            issue_slot: issue_slot(issue_id, self.n_issues()),
            rounds: 0,
            recurrent: match self {
                Model::Lstm(l) => Some(l.zero_state()),
                _ => None,
            },
        }
    }

    /// Consumes one completed round and returns the distribution over the
    /// candidates the agent asks next. Offline and online inference both go
    /// through this function.
    pub fn step(&self, state: &mut StepState, input: &[f64]) -> Result<Vec<f64>> {
        let round = state.rounds + 1;
        let p = match self {
            Model::Frequency(f) => f.distribution(state.issue_slot),
            Model::Linear(l) => l.forward(input, state.issue_slot)?,
            Model::Lstm(l) => {
                let recurrent = state.recurrent.as_mut().expect("recurrent state for LSTM");
                let next = l.step(recurrent, input, state.issue_slot)?;
                if !next.is_finite() {
                    return Err(Error::NonFinite { round });
                }
                *recurrent = next;
                l.output(&recurrent.h, state.issue_slot)
            }
        };
        state.rounds = round;
        Ok(p)
    }

    /// Probability vectors for every round of a ticket.
    pub fn predict_sequence(&self, example: &SequenceExample) -> Result<Vec<Vec<f64>>> {
        let mut state = self.start(example.issue_id);
        example.inputs.iter().map(|x| self.step(&mut state, x)).collect()
    }

    /// Data term of the loss plus λ‖θ‖², summed over `examples`.
    pub fn loss(&self, examples: &[SequenceExample], lambda: f64) -> Result<f64> {
        let mut data = 0.0;
        for ex in examples {
            data += match self {
                Model::Frequency(f) => f.data_loss(ex),
                Model::Linear(l) => l.data_loss(ex)?,
                Model::Lstm(l) => l.data_loss(ex)?,
            };
        }
        Ok(data + lambda * self.params().iter().map(|t| t * t).sum::<f64>())
    }

    /// Loss and its exact gradient with respect to `params()`.
    pub fn loss_and_gradient(&self, examples: &[SequenceExample], lambda: f64) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params().len()];
        let mut data = 0.0;
        for ex in examples {
            data += self.accumulate(ex, &mut grad)?;
        }
        let theta = self.params();
        let mut reg = 0.0;
        for (g, &t) in grad.iter_mut().zip(theta) {
            *g += 2.0 * lambda * t;
            reg += t * t;
        }
        Ok((data + lambda * reg, grad))
    }

    /// Adds one ticket's data-term gradient into `grad`; returns its data loss.
    pub(crate) fn accumulate(&self, example: &SequenceExample, grad: &mut [f64]) -> Result<f64> {
        match self {
            Model::Frequency(f) => Ok(f.data_loss(example)),
            Model::Linear(l) => l.accumulate(example, grad),
            Model::Lstm(l) => l.accumulate(example, grad),
        }
    }
}

/// Gradient of the per-round data term with respect to the logits:
/// (Σ_j y_j)·p − y.
pub(crate) fn logit_gradient(p: &[f64], targets: &[usize]) -> Vec<f64> {
    let s = targets.len() as f64;
    let mut d: Vec<f64> = p.iter().map(|&pj| s * pj).collect();
    for &j in targets {
        d[j] -= 1.0;
    }
    d
}

pub(crate) fn target_loss(logits: &[f64], targets: &[usize]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    let logp = log_softmax(logits);
    -targets.iter().map(|&j| logp[j]).sum::<f64>()
}

pub(crate) fn uniform_init(n: usize, scale: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

/// y += A x for row-major A (rows × x.len()).
#[inline]
pub(crate) fn gemv_add(a: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = x.len();
    for (row, yi) in a.chunks_exact(cols).zip(y.iter_mut()) {
        *yi += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

/// y += Aᵀ x for row-major A (x.len() × y.len()).
#[inline]
pub(crate) fn gemv_t_add(a: &[f64], x: &[f64], y: &mut [f64]) {
    let cols = y.len();
    for (row, &xi) in a.chunks_exact(cols).zip(x) {
        if xi != 0.0 {
            for (yj, w) in y.iter_mut().zip(row) {
                *yj += w * xi;
            }
        }
    }
}

/// A += u vᵀ for row-major A (u.len() × v.len()).
#[inline]
pub(crate) fn outer_add(a: &mut [f64], u: &[f64], v: &[f64]) {
    let cols = v.len();
    for (row, &ui) in a.chunks_exact_mut(cols).zip(u) {
        if ui != 0.0 {
            for (aij, vj) in row.iter_mut().zip(v) {
                *aij += ui * vj;
            }
        }
    }
}

/// Column `col` of a row-major matrix with `cols` columns, added into `y`.
#[inline]
pub(crate) fn column_add(a: &[f64], cols: usize, col: usize, y: &mut [f64]) {
    for (yi, row) in y.iter_mut().zip(a.chunks_exact(cols)) {
        *yi += row[col];
    }
}

#[inline]
pub(crate) fn column_accumulate(a: &mut [f64], cols: usize, col: usize, v: &[f64]) {
    for (row, vi) in a.chunks_exact_mut(cols).zip(v) {
        row[col] += vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<Variant>(&json).unwrap(), v);
        }
        assert!("gru".parse::<Variant>().is_err());
    }

    #[test]
    fn issue_vector_has_missing_slot() {
        assert_eq!(issue_vector(Some(1), 3), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(issue_vector(None, 3), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(issue_vector(Some(9), 3), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        let p = softmax(&[2f64.ln(), 0.0, 0.0]);
        for (a, b) in p.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = softmax(&[1000.0, 999.0]);
        let e = (-1f64).exp();
        assert!((p[0] - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((p[0] - 0.731).abs() < 1e-3);
    }

    #[test]
    fn loss_arithmetic() {
        let loss = sequence_loss(&[vec![0.5, 0.25, 0.25]], &[vec![1.0, 0.0, 1.0]], 0.0, &[]).unwrap();
        assert!((loss - 2.0794415).abs() < 1e-6);
        assert_eq!(sequence_loss(&[vec![0.5, 0.5]], &[vec![0.0, 0.0]], 0.0, &[3.0]).unwrap(), 0.0);
        let reg = sequence_loss(&[vec![0.5, 0.5]], &[vec![0.0, 0.0]], 0.1, &[3.0, -1.0]).unwrap();
        assert!((reg - 1.0).abs() < 1e-15);
        assert!(sequence_loss(&[vec![0.5, 0.5]], &[], 0.0, &[]).is_err());
    }

    #[test]
    fn topk_examples() {
        assert_eq!(predict_topk(&[0.1, 0.5, 0.4], 3).unwrap(), vec![1, 2, 0]);
        assert_eq!(predict_topk(&[0.25; 4], 3).unwrap(), vec![0, 1, 2]);
        assert!(predict_topk(&[0.5, 0.5], 3).is_err());
    }

    #[test]
    fn logit_gradient_matches_definition() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(logit_gradient(&p, &[]), vec![0.0; 3]);
        let d = logit_gradient(&p, &[0, 2]);
        let expected = [0.4 - 1.0, 0.6, 1.0 - 1.0];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in prop::collection::vec(-50.0f64..50.0, 1..20)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
        }

        #[test]
        fn softmax_is_shift_invariant(logits in prop::collection::vec(-20.0f64..20.0, 1..10), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = logits.iter().map(|z| z + c).collect();
            let (a, b) = (softmax(&logits), softmax(&shifted));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert_eq!(predict_topk(&a, 1).unwrap(), predict_topk(&b, 1).unwrap());
        }

        #[test]
        fn topk_is_sorted_and_distinct(p in prop::collection::vec(0.0f64..1.0, 3..12)) {
            let top = predict_topk(&p, 3).unwrap();
            prop_assert!(top.windows(2).all(|w| p[w[0]] > p[w[1]] || (p[w[0]] == p[w[1]] && w[0] < w[1])));
            for j in 0..p.len() {
                if !top.contains(&j) {
                    prop_assert!(p[j] <= p[top[2]]);
                }
            }
        }
    }
}

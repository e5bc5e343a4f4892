use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fit_frequency, Model, ModelDims, SequenceExample, Variant};
use crate::error::{Error, Result};
use crate::eval::evaluate_model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub variant: Variant,
    pub hidden: usize,
    /// ℓ2 coefficient used by `train_model`.
    pub lambda: f64,
    /// Values tried by `grid_search`.
    pub lambda_grid: Vec<f64>,
    pub adam: AdamConfig,
    pub epochs: usize,
    /// Tickets per update.
    pub batch_size: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Lstm,
            hidden: 256,
            lambda: 0.0,
            lambda_grid: vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
            adam: AdamConfig::default(),
            epochs: 30,
            batch_size: 1,
            init_scale: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.hidden == 0 {
            return bad("hidden size must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) || self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return bad(format!("λ must be non-negative: {} / {:?}", self.lambda, self.lambda_grid));
        }
        if self.lambda_grid.is_empty() {
            return bad("λ grid is empty".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0) {
            return bad(format!("invalid ADAM settings {a:?}"));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_recall_r: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub model: Model,
    pub lambda: f64,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
    pub val_recall_r: f64,
    pub log: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearch {
    pub best: TrainedModel,
    /// (λ, best validation Recall-r) in grid order.
    pub scores: Vec<(f64, f64)>,
}

struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(config: AdamConfig, n: usize) -> Self {
        Adam {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
    }
}

fn validation_recall(model: &Model, validation: &[SequenceExample]) -> Result<f64> {
    Ok(evaluate_model(model, validation)?.recall_r)
}

/// Trains one model with a fixed λ and returns the parameters of the epoch
/// with the best validation Recall-r (earliest on ties).
///
/// Each update uses a batch of tickets and charges the batch its share
/// (batch / N) of λ‖θ‖², so one epoch of updates covers the full objective.
pub fn train_model(
    train: &[SequenceExample],
    validation: &[SequenceExample],
    dims: ModelDims,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    let dims = ModelDims {
        hidden: config.hidden,
        ..dims
    };
    for ex in train.iter().chain(validation) {
        ex.validate(&dims)?;
    }
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }

    if config.variant == Variant::Frequency {
        let model = Model::Frequency(fit_frequency(train, dims.n_candidates, dims.n_issues));
        let val = validation_recall(&model, validation)?;
        let train_loss = model.loss(train, 0.0)?;
        return Ok(TrainedModel {
            model,
            lambda: 0.0,
            best_epoch: 0,
            val_recall_r: val,
            log: vec![EpochRecord {
                epoch: 0,
                train_loss,
                val_recall_r: val,
                lambda: 0.0,
            }],
        });
    }

    let mut model = Model::init(config.variant, dims, config.init_scale, config.seed)?;
    let lambda = config.lambda;
    let mut best = (model.clone(), 0, validation_recall(&model, validation)?);
    let mut log = Vec::with_capacity(config.epochs);
    let mut adam = Adam::new(config.adam.clone(), model.params().len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5348_5546_464c_4521);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let n = train.len() as f64;
    let mut grad = vec![0.0; model.params().len()];

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut loss = 0.0;
            for &i in batch {
                loss += model.accumulate(&train[i], &mut grad)?;
            }
            let share = lambda * batch.len() as f64 / n;
            if share > 0.0 {
                let mut reg = 0.0;
                for (g, &t) in grad.iter_mut().zip(model.params()) {
                    *g += 2.0 * share * t;
                    reg += t * t;
                }
                loss += share * reg;
            }
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: format!("non-finite batch loss {loss}"),
                });
            }
            epoch_loss += loss;
            adam.update(model.params_mut(), &grad);
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                detail: "non-finite parameters".into(),
            });
        }
        let val = validation_recall(&model, validation)?;
        log.push(EpochRecord {
            epoch,
            train_loss: epoch_loss,
            val_recall_r: val,
            lambda,
        });
        if val > best.2 {
            best = (model.clone(), epoch, val);
        }
    }

    Ok(TrainedModel {
        model: best.0,
        lambda,
        best_epoch: best.1,
        val_recall_r: best.2,
        log,
    })
}

/// Trains once per λ in the grid and keeps the model with the best
/// validation Recall-r (earliest grid value on ties).
pub fn grid_search(
    train: &[SequenceExample],
    validation: &[SequenceExample],
    dims: ModelDims,
    config: &TrainConfig,
) -> Result<GridSearch> {
    config.validate()?;
    let grid: &[f64] = if config.variant == Variant::Frequency {
        &[0.0]
    } else {
        &config.lambda_grid
    };
    let mut best: Option<TrainedModel> = None;
    let mut scores = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let trained = train_model(train, validation, dims, &TrainConfig { lambda, ..config.clone() })?;
        scores.push((lambda, trained.val_recall_r));
        if best.as_ref().is_none_or(|b| trained.val_recall_r > b.val_recall_r) {
            best = Some(trained);
        }
    }
    Ok(GridSearch {
        best: best.expect("non-empty grid"),
        scores,
    })
}

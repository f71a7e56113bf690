//! Dataset splitting, the MSE objective, Adam, the training loop and the
//! experiment grid.

mod grid;
mod optim;
mod split;

pub use grid::{run_experiment_grid, GridCellFailure, GridOutcome};
pub use optim::{adam_step, clip_grad_norm, grad_norm, mse_grad, mse_loss, AdamConfig, AdamState};
pub use split::{split_dataset, split_dataset_with, SplitIndex, DEFAULT_SPLIT};

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::features::fit_norm_stats;
use crate::math::Rng;
use crate::nn::{ArchConfig, Model, ModelKind, DECODER_DROPOUT};
use crate::tensor::Matrix;

/// Every knob of a training run. Runs are single-threaded and every random
/// draw comes from a stream derived from `seed`, so a run is bit-for-bit
/// reproducible.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub t_obs: usize,
    pub t_hor: usize,
    pub split: [f64; 3],
    /// Epochs without a validation ADE improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub grad_clip: Option<f64>,
    /// Optional cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
    /// Raster side length the CNN is built for.
    pub image_size: usize,
    /// Dropout on the decoder outputs feeding the head.
    pub decoder_dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 100,
            seed: 0,
            t_obs: 8,
            t_hor: 8,
            split: DEFAULT_SPLIT,
            patience: 10,
            grad_clip: Some(5.0),
            max_steps: None,
            image_size: 256,
            decoder_dropout: DECODER_DROPOUT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return bad("Adam betas must lie in [0, 1) and epsilon must be positive");
        }
        if self.batch_size == 0 || self.t_obs == 0 || self.t_hor == 0 {
            return bad("batch_size, t_obs and t_hor must be positive");
        }
        if !(0.0..1.0).contains(&self.decoder_dropout) {
            return bad("decoder_dropout must lie in [0, 1)");
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        split::validate_fractions(self.split)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }
}

/// One line per finished epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_ade: f64,
    pub val_fde: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were kept (best validation ADE).
    pub best_epoch: Option<usize>,
    pub steps: usize,
}

/// Samples partitioned into train, validation and test sets.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub id: String,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    /// Splits `samples` by id with [`split_dataset_with`].
    pub fn split(id: impl Into<String>, samples: Vec<Sample>, seed: u64, fractions: [f64; 3]) -> Result<Self> {
        let ids: Vec<String> = samples.iter().map(Sample::id).collect();
        let index = split_dataset_with(&ids, seed, fractions)?;
        Ok(Self::from_index(id, samples, &index))
    }

    /// Places each sample according to `index`; unknown ids are dropped.
    pub fn from_index(id: impl Into<String>, samples: Vec<Sample>, index: &SplitIndex) -> Self {
        let mut by_id: BTreeMap<String, Sample> = samples.into_iter().map(|s| (s.id(), s)).collect();
        let mut take = |ids: &[String]| ids.iter().filter_map(|i| by_id.remove(i)).collect::<Vec<_>>();
        let train = take(&index.train);
        let val = take(&index.val);
        let test = take(&index.test);
        Self { id: id.into(), train, val, test }
    }

    pub fn split_index(&self) -> SplitIndex {
        let ids = |v: &[Sample]| v.iter().map(Sample::id).collect();
        SplitIndex { train: ids(&self.train), val: ids(&self.val), test: ids(&self.test) }
    }
}

fn stream(seed: u64, id: u64) -> Rng {
    let mut r = Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

const SHUFFLE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Owns a model and its optimizer state; advances one minibatch at a time.
pub struct Trainer<'a> {
    model: Model,
    config: TrainConfig,
    adam: AdamState,
    shuffle_rng: Rng,
    noise_rng: Rng,
    train: &'a [Sample],
    targets: Vec<Matrix>,
    steps: usize,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    /// Fits input normalization on `train` and initializes weights from
    /// `config.seed`.
    pub fn new(kind: ModelKind, train: &'a [Sample], config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let norm = fit_norm_stats(train.iter().map(|s| &s.motion))?.stats;
        let mut arch = ArchConfig::for_kind(kind, config.image_size)?;
        arch.decoder_dropout = config.decoder_dropout;
        let model = Model::init(arch, config.seed, norm, config.t_obs)?;
        Self::with_model(model, train, config)
    }

    /// Continues from an existing model (its normalization is kept).
    pub fn with_model(model: Model, train: &'a [Sample], config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, found: 0 });
        }
        let targets = train.iter().map(|s| model.targets(s, config.t_hor)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            adam: AdamState::new(&model.params),
            model,
            config: config.clone(),
            shuffle_rng: stream(config.seed, SHUFFLE_STREAM),
            noise_rng: stream(config.seed, NOISE_STREAM),
            train,
            targets,
            steps: 0,
            epoch: 0,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn budget_left(&self) -> bool {
        self.config.max_steps.is_none_or(|m| self.steps < m)
    }

    /// One forward/backward/Adam update on the given training indices.
    /// Returns the minibatch loss before the update.
    pub fn step(&mut self, indices: &[usize]) -> Result<f64> {
        let samples: Vec<&Sample> = indices.iter().map(|&i| &self.train[i]).collect();
        let targets: Vec<Matrix> = indices.iter().map(|&i| self.targets[i].clone()).collect();
        let batch = self.model.prepare_batch(&samples)?;
        let (loss, mut grad) = self.model.loss_and_grad(batch, &targets, self.config.t_hor, &mut self.noise_rng)?;
        let diverged = |s: &Self| Error::Diverged { epoch: s.epoch, step: s.steps, last_good: Box::new(s.model.clone()) };
        if !loss.is_finite() {
            return Err(diverged(self));
        }
        if let Some(c) = self.config.grad_clip {
            clip_grad_norm(&mut grad, c);
        }
        match adam_step(&mut self.model.params, &grad, &mut self.adam, self.config.learning_rate, &self.config.adam()) {
            Ok(()) => {}
            Err(Error::NonFiniteGradient { .. }) => return Err(diverged(self)),
            Err(e) => return Err(e),
        }
        self.steps += 1;
        Ok(loss)
    }

    /// Shuffles the training set and runs minibatches until the epoch or
    /// the step budget ends. Returns the sample-weighted mean loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let mut total = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            if !self.budget_left() {
                break;
            }
            total += self.step(chunk)? * chunk.len() as f64;
            seen += chunk.len();
        }
        Ok(if seen == 0 { f64::NAN } else { total / seen as f64 })
    }
}

/// Trains `kind` on `dataset.train`, scores validation ADE/FDE at
/// `config.t_hor` after every epoch and returns the best-validation model.
/// Without a validation split the training set is scored instead.
pub fn train(kind: ModelKind, dataset: &Dataset, config: &TrainConfig) -> Result<(Model, TrainLog)> {
    let mut trainer = Trainer::new(kind, &dataset.train, config)?;
    let val: &[Sample] = if dataset.val.is_empty() { &dataset.train } else { &dataset.val };
    let mut log = TrainLog::default();
    let mut best: Option<(f64, Model)> = None;
    let mut stale = 0;
    for epoch in 1..=config.max_epochs {
        if !trainer.budget_left() {
            break;
        }
        let train_mse = match trainer.run_epoch() {
            Ok(l) => l,
            Err(Error::Diverged { epoch, step, last_good }) => {
                let last_good = best.map_or(last_good, |(_, m)| Box::new(m));
                return Err(Error::Diverged { epoch, step, last_good });
            }
            Err(e) => return Err(e),
        };
        let (row, _) = evaluate(trainer.model(), val, config.t_hor)?;
        log.epochs.push(EpochLog { epoch, train_mse, val_ade: row.ade_m, val_fde: row.fde_m });
        log.steps = trainer.steps();
        if best.as_ref().is_none_or(|(b, _)| row.ade_m < *b) {
            best = Some((row.ade_m, trainer.model().clone()));
            log.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }
    let model = best.map_or_else(|| trainer.into_model(), |(_, m)| m);
    Ok((model, log))
}

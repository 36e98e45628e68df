use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{ModelParams, Standardization, Weights};
use super::{argmax, backward, fit_to_window, forward, TargetVector};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::types::{GestureDictionary, LabeledSequence};

/// SGD-with-momentum hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Learn per-channel mean/std on the training set and apply them to every window.
    pub standardize: bool,
    pub hidden_size: usize,
    /// Window length `N`; defaults to the longest mean class duration.
    pub window_len: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 200,
            batch_size: 16,
            seed: 0,
            standardize: false,
            hidden_size: 32,
            window_len: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Constraint("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Constraint("momentum must lie in [0, 1)".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.hidden_size == 0 {
            return Err(Error::Constraint(
                "epochs, batch_size and hidden_size must be positive".into(),
            ));
        }
        if self.window_len == Some(0) {
            return Err(Error::Constraint("window length must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean cross-entropy over each epoch's mini-batches, measured before each update.
    pub epoch_loss: Vec<f64>,
    /// Argmax accuracy on the training set after the last epoch.
    pub train_accuracy: f64,
}

/// Trains with the default (parallel when available) batch execution.
pub fn train(
    train_set: &[LabeledSequence],
    dict: &GestureDictionary,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    train_with(train_set, dict, cfg, Execution::default())
}

/// Mini-batch SGD with momentum on mean cross-entropy.
///
/// Per-sample gradients may be computed on a thread pool but are always
/// summed in batch order, so the result is bit-identical for any `exec`.
pub fn train_with(
    train_set: &[LabeledSequence],
    dict: &GestureDictionary,
    cfg: &TrainConfig,
    exec: Execution,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let classes = dict.len();
    let mut seen = vec![false; classes];
    for seq in train_set {
        if !dict.contains(seq.class_id) {
            return Err(Error::InvalidInput(format!(
                "class {} not in dictionary",
                seq.class_id
            )));
        }
        seen[seq.class_id.index()] = true;
    }
    if let Some(missing) = dict.classes().iter().find(|c| !seen[c.id.index()]) {
        return Err(Error::MissingClass(missing.id));
    }

    let window_len = cfg
        .window_len
        .unwrap_or_else(|| dict.durations().into_iter().max().unwrap_or(1));
    let windows = train_set
        .iter()
        .map(|s| fit_to_window(&s.data, window_len))
        .collect::<Result<Vec<_>>>()?;
    let targets = train_set
        .iter()
        .map(|s| TargetVector::for_class(s.class_id, classes))
        .collect::<Result<Vec<_>>>()?;

    let mut params = ModelParams::init(cfg.hidden_size, classes, window_len, cfg.seed);
    if cfg.standardize {
        params.standardization = Some(channel_stats(train_set));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut velocity = Weights::zeros(cfg.hidden_size, classes);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let results = exec.map(batch, |&k| backward(&windows[k], &targets[k], &params));
            let mut grad = Weights::zeros(cfg.hidden_size, classes);
            let mut batch_loss = 0.0;
            for r in results {
                let r = r?;
                grad.add_scaled(&r.grads, 1.0);
                batch_loss += r.loss;
            }
            let inv = 1.0 / batch.len() as f64;
            grad.scale(inv);
            loss_sum += batch_loss * inv;
            batches += 1;

            velocity.scale(cfg.momentum);
            velocity.add_scaled(&grad, -cfg.learning_rate);
            params.weights.add_scaled(&velocity, 1.0);
        }
        let mean = loss_sum / batches as f64;
        if !mean.is_finite() || !params.weights.is_finite() {
            return Err(Error::Constraint(format!(
                "training diverged at epoch {epoch}; lower the learning rate"
            )));
        }
        epoch_loss.push(mean);
    }

    let predictions = exec.map(&windows, |w| forward(w, &params).map(|p| argmax(&p)));
    let mut correct = 0usize;
    for (pred, seq) in predictions.into_iter().zip(train_set) {
        if pred? == seq.class_id.index() {
            correct += 1;
        }
    }
    let report = TrainReport {
        epoch_loss,
        train_accuracy: correct as f64 / train_set.len() as f64,
    };
    Ok((params, report))
}

fn channel_stats(train_set: &[LabeledSequence]) -> Standardization {
    let views: Vec<_> = train_set.iter().map(|s| s.data.view()).collect();
    let all: Array2<f64> = ndarray::concatenate(Axis(1), &views).expect("3-row sequences");
    let mut mean = [0.0; 3];
    let mut std = [1.0; 3];
    for (ch, row) in all.axis_iter(Axis(0)).enumerate() {
        let m = row.mean().unwrap_or(0.0);
        let s = row.std(0.0);
        mean[ch] = m;
        std[ch] = if s > 1e-8 { s } else { 1.0 };
    }
    Standardization { mean, std }
}

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::train_data::TrainingInstance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global gradient norm cap.
    pub clip_norm: f64,
    /// Seeds the epoch shuffles.
    pub seed: u64,
    /// Stop after the first epoch whose mean loss falls below this.
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 8,
            clip_norm: 5.0,
            seed: 13,
            target_loss: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean token loss over the corpus before the first update.
    pub initial_loss: f64,
    /// Mean token loss per epoch, accumulated over that epoch's batches.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Mean per-token negative log-likelihood over `instances`.
pub fn corpus_loss<T: Scalar>(model: &Model<T>, instances: &[TrainingInstance]) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for inst in instances {
        let (l, k) = model.nll(&inst.input, &inst.target, None);
        sum += l.to_f64_lossy();
        n += k;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Mean token loss of a batch and its gradient.
pub fn batch_gradient<T: Scalar>(model: &Model<T>, batch: &[&TrainingInstance]) -> (f64, ModelParams<T>) {
    let tokens: usize = batch.iter().map(|i| i.target.len() + 1).sum();
    let scale = T::one() / T::of(tokens.max(1) as f64);
    let mut grad = model.params.zeros_like();
    let mut loss = 0.0;
    for inst in batch {
        let (l, _) = model.nll(&inst.input, &inst.target, Some((&mut grad, scale)));
        loss += l.to_f64_lossy();
    }
    (loss / tokens.max(1) as f64, grad)
}

/// Teacher-forced SGD with global-norm clipping. Single-threaded; the result depends
/// only on the model, the instances and `cfg`.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    instances: &[TrainingInstance],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if instances.is_empty() {
        return Err(Error::InvalidInput("no training instances".into()));
    }
    if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || !(cfg.clip_norm > 0.0) {
        return Err(Error::InvalidInput(
            "batch_size, learning_rate and clip_norm must be positive".into(),
        ));
    }
    let initial_loss = corpus_loss(model, instances);
    if !initial_loss.is_finite() {
        return Err(Error::Diverged(format!("initial loss {initial_loss}")));
    }
    info!("initial loss {initial_loss:.4}");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let lr = T::of(cfg.learning_rate);
    let clip = cfg.clip_norm;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut tokens) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&TrainingInstance> = chunk.iter().map(|&i| &instances[i]).collect();
            let (loss, mut grad) = batch_gradient(model, &batch);
            if !loss.is_finite() || !grad.all_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss or gradient at epoch {} step {steps}",
                    epoch + 1
                )));
            }
            let n: usize = batch.iter().map(|i| i.target.len() + 1).sum();
            sum += loss * n as f64;
            tokens += n;
            let norm = grad.norm().to_f64_lossy();
            if norm > clip {
                grad.scale(T::of(clip / norm));
            }
            model.params.axpy(-lr, &grad);
            steps += 1;
        }
        let mean = sum / tokens as f64;
        debug!("epoch {} loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
        if !model.params.all_finite() {
            return Err(Error::Diverged(format!("non-finite parameters after epoch {}", epoch + 1)));
        }
        if cfg.target_loss.is_some_and(|t| mean < t) {
            break;
        }
    }
    Ok(TrainReport {
        initial_loss,
        epoch_losses,
        steps,
    })
}

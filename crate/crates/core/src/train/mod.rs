//! Mini-batch training with validation early stopping, optimizers and
//! checkpoint persistence.

mod checkpoint;
mod data;
mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};
pub use data::{Corpus, Prepared};
pub use optim::{AdamSettings, Optimizer, OptimizerKind};

use crate::fm::clamp_output;
use crate::ingest::{DEFAULT_MAX_TOKENS, DEFAULT_VOCAB_CAP};
use crate::model::{BetaGradient, Model, ModelConfig, ModelMode, PairInput};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub adam: AdamSettings,
    pub lambda: f64,
    pub seed: u64,
    /// Epochs without validation MAE improvement before stopping.
    pub patience: usize,
    pub embed_dim: usize,
    /// Filters per convolution bank (`f`).
    pub filters: usize,
    /// Engagement latent width (`v`).
    pub latent_dim: usize,
    /// Contextual convolution window (`s`).
    pub window: usize,
    /// Abstraction convolution window (`s_a`).
    pub abs_window: usize,
    pub fm_rank: usize,
    /// Tokens kept per collection (`T_max`).
    pub max_tokens: usize,
    pub vocab_cap: usize,
    pub mode: ModelMode,
    pub beta_gradient: BetaGradient,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 128,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            adam: AdamSettings::default(),
            lambda: 1e-5,
            seed: 42,
            patience: 3,
            embed_dim: 32,
            filters: 20,
            latent_dim: 20,
            window: 3,
            abs_window: 3,
            fm_rank: 8,
            max_tokens: DEFAULT_MAX_TOKENS,
            vocab_cap: DEFAULT_VOCAB_CAP,
            mode: ModelMode::FusedDynamic,
            beta_gradient: BetaGradient::Stop,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("embed_dim", self.embed_dim),
            ("filters", self.filters),
            ("latent_dim", self.latent_dim),
            ("window", self.window),
            ("abs_window", self.abs_window),
            ("fm_rank", self.fm_rank),
            ("max_tokens", self.max_tokens),
            ("patience", self.patience),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if self.vocab_cap < 3 {
            return Err(Error::InvalidArgument("vocab_cap must be at least 3".into()));
        }
        let a = &self.adam;
        let checks = [
            ("learning_rate", self.learning_rate.is_finite() && self.learning_rate >= 0.0),
            ("lambda", self.lambda.is_finite() && self.lambda >= 0.0),
            ("adam.beta1", (0.0..1.0).contains(&a.beta1)),
            ("adam.beta2", (0.0..1.0).contains(&a.beta2)),
            ("adam.eps", a.eps.is_finite() && a.eps > 0.0),
            ("init_scale", self.init_scale.is_finite() && self.init_scale >= 0.0),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::InvalidArgument(format!("{name} out of range")));
            }
        }
        Ok(())
    }

    pub fn model_config(&self, corpus: &Corpus, global_mean: f64) -> ModelConfig {
        ModelConfig {
            vocab_size: corpus.vocab.len(),
            embed_dim: self.embed_dim,
            filters: self.filters,
            window: self.window,
            abs_window: self.abs_window,
            latent_dim: self.latent_dim,
            fm_rank: self.fm_rank,
            n_devices: corpus.index.devices().len(),
            n_services: corpus.index.services().len(),
            mode: self.mode,
            beta_gradient: self.beta_gradient,
            init_scale: self.init_scale,
            global_mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared error over the epoch's training pairs.
    pub train_loss: f64,
    /// `None` when there is no validation split.
    pub val_mae: Option<f64>,
    pub val_rmse: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    /// One `key=value` line per epoch.
    pub fn to_log_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let fmt = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |x| format!("{x:.6}"));
            out.push_str(&format!(
                "epoch={} loss={:.6} val_mae={} val_rmse={} seconds={:.3}\n",
                e.epoch,
                e.train_loss,
                fmt(e.val_mae),
                fmt(e.val_rmse),
                e.seconds
            ));
        }
        out
    }
}

/// Clamped MAE and RMSE of `model` on `examples`; `None` when empty.
pub fn rating_errors(model: &Model, examples: &[(PairInput, f64)]) -> Option<(f64, f64)> {
    use rayon::prelude::*;
    if examples.is_empty() {
        return None;
    }
    let preds: Vec<f64> = examples
        .par_iter()
        .map(|(p, _)| clamp_output(model.predict(p).rating))
        .collect();
    let n = examples.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, (_, t)) in preds.iter().zip(examples) {
        abs += (p - t).abs();
        sq += (p - t) * (p - t);
    }
    Some((abs / n, (sq / n).sqrt()))
}

/// Trains a fresh model on `data.train`, keeping the parameters of the
/// epoch with the lowest validation MAE.
pub fn train(cfg: &TrainConfig, data: &Prepared) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let model = Model::new(cfg.model_config(&data.corpus, data.global_mean), cfg.seed)?;
    train_model(cfg, data, model)
}

/// Like [`train`], starting from the given model.
pub fn train_model(cfg: &TrainConfig, data: &Prepared, mut model: Model) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.adam, model.params());
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, Vec<crate::nn::Matrix>)> = None;
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut sq_total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(PairInput, f64)> = chunk.iter().map(|&i| data.train[i].clone()).collect();
            let mse = model.accumulate_gradients(&batch, cfg.lambda);
            if !mse.is_finite() {
                return Err(Error::NonFinite(format!("epoch {epoch} batch {b}: loss {mse}")));
            }
            sq_total += mse * batch.len() as f64;
            optimizer.step(model.params_mut());
            if !model.params().all_finite() {
                return Err(Error::NonFinite(format!("epoch {epoch} batch {b}: parameters diverged")));
            }
        }
        let val = rating_errors(&model, &data.validation);
        let record = EpochRecord {
            epoch,
            train_loss: sq_total / data.train.len() as f64,
            val_mae: val.map(|v| v.0),
            val_rmse: val.map(|v| v.1),
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!("{}", TrainHistory { epochs: vec![record.clone()], best_epoch: None }.to_log_lines().trim_end());
        history.epochs.push(record);

        let Some((mae, _)) = val else {
            history.best_epoch = Some(epoch);
            continue;
        };
        if best.as_ref().is_none_or(|(b, _)| mae < *b) {
            best = Some((mae, model.params().values_snapshot()));
            history.best_epoch = Some(epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::info!("early stop after epoch {epoch}; best epoch {:?}", history.best_epoch);
                break;
            }
        }
    }
    if let Some((_, snapshot)) = best {
        model.params_mut().restore_values(snapshot);
    }
    model.params_mut().zero_grads();
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { batch_size: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { learning_rate: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { filters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn log_lines() {
        let h = TrainHistory {
            epochs: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                val_mae: Some(0.25),
                val_rmse: None,
                seconds: 1.0,
            }],
            best_epoch: Some(1),
        };
        assert_eq!(h.to_log_lines(), "epoch=1 loss=0.500000 val_mae=0.250000 val_rmse=na seconds=1.000\n");
    }
}

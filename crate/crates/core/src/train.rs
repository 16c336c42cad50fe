//! Mini-batch training with modality dropout, ADADELTA and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Sample, SplitName};
use crate::encoders::Mode;
use crate::error::{Error, Result};
use crate::eval::{rmse, Regime};
use crate::fusion::LossBreakdown;
use crate::graph::Graph;
use crate::imputation::{sample_mask, MDropConfig};
use crate::model::{Model, ModelConfig, Objective};
use crate::optim::Adadelta;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Multiplier on the ADADELTA step.
    pub lr: f64,
    pub lambda: f64,
    pub rho: f64,
    pub lambda_rho: f64,
    pub squared_norm: bool,
    pub mdrop: MDropConfig,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub dropout: f64,
    pub adadelta_rho: f64,
    pub adadelta_eps: f64,
    pub embed_dim: usize,
    pub lstm_hidden: usize,
    pub ae_hidden: usize,
    /// Start the scoring bias at the mean training rating.
    pub init_bias_to_mean: bool,
    /// Multiplier on `lr` for the two loss-mixing weights.
    pub mix_lr_scale: f64,
    /// Stop gradients from the reconstruction loss reaching the encoders
    /// through the targets.
    pub detach_recon_target: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            lr: 1e-4,
            lambda: 1e-4,
            rho: 0.05,
            lambda_rho: 0.01,
            squared_norm: false,
            mdrop: MDropConfig::default(),
            max_epochs: 30,
            patience: 5,
            seed: 0,
            dropout: 0.5,
            adadelta_rho: 0.95,
            adadelta_eps: 1e-6,
            embed_dim: 256,
            lstm_hidden: 256,
            ae_hidden: 1024,
            init_bias_to_mean: true,
            mix_lr_scale: 1.0,
            detach_recon_target: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("train.max_epochs must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lambda >= 0.0 && self.lambda_rho >= 0.0 && self.mix_lr_scale >= 0.0) {
            return Err(Error::Config("lr, lambda, lambda_rho and mix_lr_scale must be non-negative".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("train.rho={} must lie in (0,1)", self.rho)));
        }
        self.mdrop.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn objective(&self) -> Objective {
        Objective {
            lambda: self.lambda,
            rho: self.rho,
            lambda_rho: self.lambda_rho,
            squared_norm: self.squared_norm,
            detach_target: self.detach_recon_target,
        }
    }

    pub fn model_config(&self, vocab_size: usize, visual_in_dim: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            lstm_hidden: self.lstm_hidden,
            ae_hidden: self.ae_hidden,
            visual_in_dim: visual_in_dim.max(1),
        }
    }
}

/// Independent random streams derived from one seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_total: f64,
    pub valid_rmse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Model with the best validation RMSE seen.
    pub model: Model,
    pub best_valid_rmse: f64,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    /// One CSV line per batch, header included.
    pub log: String,
    /// Autoencoder slots fed a zero input during training.
    pub zero_input_slots: usize,
    /// Set when training stopped on a non-finite loss or gradient.
    pub diverged: Option<String>,
}

/// Trains on the training split, selecting on validation RMSE.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_samples = dataset.samples(SplitName::Train)?;
    let valid_samples = dataset.samples(SplitName::Valid)?;
    if train_samples.is_empty() || valid_samples.is_empty() {
        return Err(Error::invalid("training and validation splits must be non-empty"));
    }
    let model_cfg = cfg.model_config(dataset.vocab().len(), dataset.feature_dim());
    let mut model = Model::new(&model_cfg, cfg.seed)?;
    if cfg.init_bias_to_mean {
        let mean = train_samples.iter().map(|s| s.rating).sum::<f64>() / train_samples.len() as f64;
        model.store.value_mut(model.fusion.b).fill(mean);
    }
    train_model(model, &train_samples, &valid_samples, cfg)
}

/// Training loop over prepared samples, starting from `model`.
pub fn train_model(mut model: Model, train: &[Sample], valid: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut shuffle_rng = stream_rng(cfg.seed, 1);
    let mut mask_rng = stream_rng(cfg.seed, 2);
    let mut dropout_rng = stream_rng(cfg.seed, 3);
    let optimizer = Adadelta {
        lr: cfg.lr,
        rho: cfg.adadelta_rho,
        eps: cfg.adadelta_eps,
        lr_scale: ["fusion.alpha_raw", "fusion.beta_raw"]
            .iter()
            .map(|n| (n.to_string(), cfg.mix_lr_scale))
            .collect(),
        ..Default::default()
    };
    let objective = cfg.objective();

    let mut log = String::from(LossBreakdown::CSV_HEADER);
    log.push('\n');
    let mut best = (rmse_of(&model, valid)?, 0, model.clone());
    let mut history = Vec::new();
    let mut zero_input_slots = 0;
    let mut diverged = None;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();

    'epochs: for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total_sum = 0.0;
        let mut batches = 0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let masks: Vec<_> = batch
                .iter()
                .map(|s| {
                    let m = s.mask.and(&sample_mask(&cfg.mdrop, &mut mask_rng));
                    // dropping every modality the sample has leaves nothing to learn from
                    if m.any() {
                        m
                    } else {
                        s.mask
                    }
                })
                .collect();
            let (grads, out) = {
                let mut g = Graph::new(&model.store);
                let out = model.forward_batch(
                    &mut g,
                    &batch,
                    &masks,
                    Mode::Train,
                    cfg.dropout,
                    Some(&objective),
                    &mut dropout_rng,
                )?;
                let total = out.total.expect("objective requested");
                if !out.breakdown.total.is_finite() {
                    diverged = Some(format!("non-finite loss at epoch {epoch}, batch {bi}"));
                    break 'epochs;
                }
                (g.backward(total)?, out)
            };
            zero_input_slots += out.zero_inputs;
            model.store.zero_grads();
            grads.accumulate_into(&mut model.store);
            match optimizer.step(&mut model.store) {
                Ok(()) => {}
                Err(Error::TrainingDiverged(name)) => {
                    diverged = Some(format!("non-finite gradient for `{name}` at epoch {epoch}, batch {bi}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
            log.push_str(&out.breakdown.csv_row(epoch, bi));
            log.push('\n');
            total_sum += out.breakdown.total;
            batches += 1;
        }
        let valid_rmse = rmse_of(&model, valid)?;
        if !valid_rmse.is_finite() {
            diverged = Some(format!("non-finite validation error at epoch {epoch}"));
            break;
        }
        history.push(EpochStats {
            epoch,
            mean_total: total_sum / batches.max(1) as f64,
            valid_rmse,
        });
        log::debug!("epoch {epoch}: valid rmse {valid_rmse:.6}");
        if valid_rmse < best.0 {
            best = (valid_rmse, epoch, model.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if let Some(reason) = &diverged {
        log::warn!("training diverged: {reason}");
    }
    let (best_valid_rmse, best_epoch, model) = best;
    Ok(TrainOutcome {
        model,
        best_valid_rmse,
        best_epoch,
        history,
        log,
        zero_input_slots,
        diverged,
    })
}

fn rmse_of(model: &Model, samples: &[Sample]) -> Result<f64> {
    let (preds, _) = model.predict(samples, Regime::Full.mask())?;
    let truths: Vec<f64> = samples.iter().map(|s| s.rating).collect();
    rmse(&preds, &truths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{DataConfig, SyntheticConfig};

    fn tiny_dataset() -> Dataset {
        let (raw, _) = SyntheticConfig {
            n_users: 12,
            n_items: 8,
            n_reviews: 60,
            feature_dim: 6,
            ..Default::default()
        }
        .generate();
        Dataset::build(
            raw,
            &DataConfig {
                min_freq: 1,
                l_max: 6,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            lr: 1.0,
            max_epochs: 3,
            embed_dim: 4,
            lstm_hidden: 4,
            ae_hidden: 6,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let ds = tiny_dataset();
        let a = train(&ds, &tiny_cfg()).unwrap();
        let b = train(&ds, &tiny_cfg()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn best_model_is_never_worse_than_history() {
        let ds = tiny_dataset();
        let out = train(&ds, &tiny_cfg()).unwrap();
        assert!(out.history.iter().all(|h| h.valid_rmse >= out.best_valid_rmse));
        let valid = ds.samples(SplitName::Valid).unwrap();
        assert_eq!(rmse_of(&out.model, &valid).unwrap(), out.best_valid_rmse);
    }

    #[test]
    fn no_dropout_and_full_data_never_feeds_zero_inputs() {
        let ds = tiny_dataset();
        let out = train(&ds, &tiny_cfg()).unwrap();
        let all_full = ds.samples(SplitName::Train).unwrap().iter().all(|s| s.mask.all());
        if all_full {
            assert_eq!(out.zero_input_slots, 0);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let ds = tiny_dataset();
        let cfg = TrainConfig {
            lr: 1e300,
            ..tiny_cfg()
        };
        let out = train(&ds, &cfg).unwrap();
        assert!(out.diverged.is_some());
        assert!(out.best_valid_rmse.is_finite());
    }

    #[test]
    fn log_has_one_line_per_batch() {
        let ds = tiny_dataset();
        let out = train(&ds, &tiny_cfg()).unwrap();
        let n_train = ds.samples(SplitName::Train).unwrap().len();
        let per_epoch = n_train.div_ceil(8);
        assert_eq!(out.log.lines().count(), 1 + per_epoch * out.history.len());
        assert_eq!(out.log.lines().next().unwrap().split(',').count(), 14);
    }
}

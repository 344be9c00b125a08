use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{shuffle_batches, Sequence};
use crate::network::{save_checkpoint, ModelConfig, ModelParams};
use crate::util::{derive_seed, round_f32, softplus_inv};
use crate::{Error, Result};

use super::adam::Adam;
use super::backward::{backward, evaluate_batch, Example};
use super::loss::LossBreakdown;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub selection_fraction: f64,
    /// Seeds both parameter initialisation and batch shuffling.
    pub seed: u64,
    /// Write a checkpoint every this many epochs (and after the last one).
    pub checkpoint_interval: usize,
    pub alpha_weight_decay: f64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 32,
            learning_rate: 1e-3,
            selection_fraction: 0.5,
            seed: 1,
            checkpoint_interval: 10,
            alpha_weight_decay: 1e-3,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_interval == 0 {
            return Err(Error::invalid(
                "epochs, batch_size and checkpoint_interval must be >= 1",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction <= 1.0) {
            return Err(Error::invalid("selection_fraction must lie in (0, 1]"));
        }
        if !(self.alpha_weight_decay > 0.0 && self.alpha_weight_decay.is_finite()) {
            return Err(Error::invalid("alpha_weight_decay must be positive"));
        }
        self.model.validate()
    }

    /// The model configuration with its parameter seed taken from `seed`.
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            param_seed: self.seed,
            ..self.model.clone()
        }
    }
}

/// Batch-averaged losses for one epoch; `alpha` is the value after the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossBreakdown,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: ModelParams,
    pub curve: Vec<EpochRecord>,
    pub last_checkpoint: Option<PathBuf>,
}

/// Parameters plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: ModelParams,
    adam: Adam,
    selection_fraction: f64,
}

impl Trainer {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::new(config.model_config())?;
        Ok(Self::from_params(params, config))
    }

    pub fn from_params(params: ModelParams, config: &TrainConfig) -> Self {
        let adam = Adam::new(
            &params.trainable,
            config.learning_rate,
            config.alpha_weight_decay,
        );
        Trainer {
            params,
            adam,
            selection_fraction: config.selection_fraction,
        }
    }

    /// Sets the head's output bias so the untrained model predicts `mean_velocity`.
    pub fn set_output_prior(&mut self, mean_velocity: f64) -> Result<()> {
        if !(mean_velocity > 0.0 && mean_velocity.is_finite()) {
            return Err(Error::invalid("output prior must be a positive velocity"));
        }
        self.params.trainable.head_b2[0] = round_f32(softplus_inv(mean_velocity));
        Ok(())
    }

    /// One forward/backward/update cycle. Returns the losses before the update.
    pub fn train_step(&mut self, batch: &[&Example]) -> Result<LossBreakdown> {
        let eval = evaluate_batch(&self.params, batch, self.selection_fraction)?;
        let grads = backward(&eval, batch, &self.params)?;
        self.adam.update(&mut self.params.trainable, &grads);
        if let Some(param) = self.params.trainable.first_non_finite() {
            return Err(Error::NumericFailure {
                param: param.to_string(),
                last_checkpoint: None,
            });
        }
        Ok(eval.losses)
    }

    pub fn steps_taken(&self) -> u64 {
        self.adam.steps_taken()
    }
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("checkpoint_epoch_{epoch:04}.pnsw")
}

pub fn fit(
    dataset: &[Sequence],
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<FitOutcome> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let mut trainer = Trainer::new(config)?;
    let mean_label = dataset.iter().map(|s| s.v_applied).sum::<f64>() / dataset.len() as f64;
    trainer.set_output_prior(mean_label)?;
    let examples = dataset
        .iter()
        .map(|s| Example::from_sequence(s, &trainer.params))
        .collect::<Result<Vec<_>>>()?;
    let mut curve = Vec::with_capacity(config.epochs);
    let mut last_checkpoint: Option<PathBuf> = None;

    for epoch in 1..=config.epochs {
        let batches = shuffle_batches(
            &examples,
            config.batch_size,
            derive_seed(config.seed, epoch as u64),
        )?;
        let mut sum = [0.0; 3];
        for batch in &batches {
            let refs: Vec<&Example> = batch.indices.iter().map(|&i| &examples[i]).collect();
            let losses = trainer.train_step(&refs).map_err(|e| match e {
                Error::NumericFailure { param, .. } => Error::NumericFailure {
                    param,
                    last_checkpoint: last_checkpoint.clone(),
                },
                other => other,
            })?;
            sum[0] += losses.velocity_loss;
            sum[1] += losses.slip_loss;
            sum[2] += losses.total;
        }
        let n = batches.len() as f64;
        let record = EpochRecord {
            epoch,
            losses: LossBreakdown {
                velocity_loss: sum[0] / n,
                slip_loss: sum[1] / n,
                alpha: trainer.params.alpha(),
                total: sum[2] / n,
            },
        };
        log::info!(
            "epoch {epoch}: velocity {:.5} slip {:.4} alpha {:.4} total {:.5}",
            record.losses.velocity_loss,
            record.losses.slip_loss,
            record.losses.alpha,
            record.losses.total
        );
        curve.push(record);

        if let Some(dir) = checkpoint_dir {
            if epoch % config.checkpoint_interval == 0 || epoch == config.epochs {
                let path = dir.join(checkpoint_name(epoch));
                save_checkpoint(&trainer.params, &path)?;
                last_checkpoint = Some(path);
            }
        }
    }
    Ok(FitOutcome {
        params: trainer.params,
        curve,
        last_checkpoint,
    })
}

pub fn write_curve_csv(curve: &[EpochRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,velocity_loss,slip_loss,alpha,total")?;
    for r in curve {
        let l = &r.losses;
        writeln!(
            w,
            "{},{},{},{},{}",
            r.epoch, l.velocity_loss, l.slip_loss, l.alpha, l.total
        )?;
    }
    w.flush()?;
    Ok(())
}

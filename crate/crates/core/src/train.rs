//! Epoch loop wiring the neighbor schedule into the contrastive loss.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::eval::Dataset;
use crate::geometry::{distance_matrix, select_neighbors, DistanceNorm, NeighborSpace};
use crate::losses::{loss_with_gradient, LossConfig, LossVariant};
use crate::optim::{Adam, OptimConfig};
use crate::schedule::{neighbors_at_epoch, ScheduleConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossVariant,
    pub loss_config: LossConfig,
    pub nn_final: usize,
    pub nn_step_size: usize,
    pub distance_norm: DistanceNorm,
    pub nn_space: NeighborSpace,
    /// Epochs after which the full training set is embedded and kept;
    /// `0` means before the first update.
    pub export_epochs: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            seed: 0,
            loss: LossVariant::DynLocRep,
            loss_config: LossConfig::default(),
            nn_final: 14,
            nn_step_size: 1,
            distance_norm: DistanceNorm::Manhattan,
            nn_space: NeighborSpace::Embedding,
            export_epochs: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> ScheduleConfig {
        ScheduleConfig {
            batch_size: self.batch_size,
            nn_final: self.nn_final,
            step_size: self.nn_step_size,
            max_epochs: self.epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 4 {
            return Err(Error::Config(format!(
                "batch size must be at least 4, got {}",
                self.batch_size
            )));
        }
        self.loss_config.kernel.validate()?;
        if !(self.loss_config.temperature.is_finite() && self.loss_config.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.loss_config.temperature
            )));
        }
        if self.loss.uses_neighbors() {
            self.schedule().validate()?;
        }
        if let Some(e) = self.export_epochs.iter().find(|&&e| e > self.epochs) {
            return Err(Error::Config(format!(
                "export epoch {e} exceeds the epoch count {}",
                self.epochs
            )));
        }
        Ok(())
    }
}

/// One line of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// One-based.
    pub epoch: usize,
    pub lr: f64,
    /// Scheduled neighbor count; `None` for losses without neighbor sets.
    pub nn_count: Option<usize>,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSnapshot {
    pub epoch: usize,
    /// Unit-normalized embeddings of the training set, in dataset order.
    pub embeddings: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: Encoder,
    pub trace: Vec<EpochRecord>,
    pub snapshots: Vec<EmbeddingSnapshot>,
}

/// Stateful trainer; [`train`] drives it through every epoch.
pub struct Trainer<'a> {
    data: &'a Dataset,
    config: TrainConfig,
    encoder: Encoder,
    adam: Adam,
    optim: OptimConfig,
    epoch: usize,
    trace: Vec<EpochRecord>,
    snapshots: Vec<EmbeddingSnapshot>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        data: &'a Dataset,
        config: TrainConfig,
        optim: OptimConfig,
        encoder_config: &EncoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        if data.feature_dim() != encoder_config.input_dim {
            return Err(Error::Shape(format!(
                "dataset has {} features, encoder expects {}",
                data.feature_dim(),
                encoder_config.input_dim
            )));
        }
        if data.len() < 2 {
            return Err(Error::BatchTooSmall {
                min: 2,
                got: data.len(),
            });
        }
        let encoder = Encoder::init(encoder_config, config.seed)?;
        let adam = Adam::new(optim, &encoder)?;
        let mut trainer = Trainer {
            data,
            config,
            encoder,
            adam,
            optim,
            epoch: 0,
            trace: Vec::new(),
            snapshots: Vec::new(),
        };
        trainer.snapshot_if_requested()?;
        Ok(trainer)
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    fn snapshot_if_requested(&mut self) -> Result<()> {
        if self.config.export_epochs.contains(&self.epoch) {
            let embeddings = self.encoder.embed_unit(self.data.features.view())?;
            self.snapshots.push(EmbeddingSnapshot {
                epoch: self.epoch,
                embeddings,
            });
        }
        Ok(())
    }

    fn epoch_order(&self) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(1 + self.epoch as u64);
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        order.shuffle(&mut rng);
        order
    }

    /// Runs one pass over the data and returns its trace record.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.epoch;
        let lr = self.optim.lr_at_epoch(epoch);
        let nn_count = if self.config.loss.uses_neighbors() {
            Some(neighbors_at_epoch(&self.config.schedule(), epoch)?)
        } else {
            None
        };
        let fail = |e: Error| match e {
            Error::Numerical(msg) => Error::Numerical(format!("epoch {}: {msg}", epoch + 1)),
            other => other,
        };

        let order = self.epoch_order();
        let mut losses = Vec::new();
        // Trailing batches of one sample have no pairs and are dropped.
        for batch in order.chunks(self.config.batch_size).filter(|b| b.len() >= 2) {
            let features = self.data.features.select(Axis(0), batch);
            let labels: Vec<f64> = batch.iter().map(|&i| self.data.labels[i]).collect();
            let (embedded, cache) = self.encoder.forward(features.view()).map_err(fail)?;
            let neighbors = match nn_count {
                Some(count) => {
                    let points = match self.config.nn_space {
                        NeighborSpace::Embedding => &embedded.unit,
                        NeighborSpace::Input => &features,
                    };
                    let dist = distance_matrix(points.view(), self.config.distance_norm)?;
                    Some(select_neighbors(dist.view(), count.min(batch.len() - 1))?)
                }
                None => None,
            };
            let out = loss_with_gradient(
                self.config.loss,
                &embedded,
                &labels,
                &self.config.loss_config,
                neighbors.as_ref(),
            )
            .map_err(fail)?;
            let grads = self.encoder.backward(&cache, out.grad_raw.view())?;
            self.adam.step(&mut self.encoder, &grads, lr).map_err(fail)?;
            losses.push(out.value);
        }
        if losses.is_empty() {
            return Err(Error::BatchTooSmall {
                min: 2,
                got: self.data.len(),
            });
        }
        let mean_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "epoch {}: mean loss is not finite",
                epoch + 1
            )));
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            lr,
            nn_count,
            mean_loss,
        };
        self.trace.push(record.clone());
        self.epoch += 1;
        self.snapshot_if_requested()?;
        Ok(record)
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            encoder: self.encoder,
            trace: self.trace,
            snapshots: self.snapshots,
        }
    }
}

pub fn train(
    data: &Dataset,
    config: &TrainConfig,
    optim: &OptimConfig,
    encoder_config: &EncoderConfig,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(data, config.clone(), *optim, encoder_config)?;
    for _ in 0..config.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.finish())
}

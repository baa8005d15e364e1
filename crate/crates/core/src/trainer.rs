//! The per-epoch loop: shuffled mini-batch SGD with activation recording,
//! followed by rewiring.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::activation_log::{CosineBackend, EpochRecords, SequentialCosine};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::evolution::{evolve_epoch, RewireReport};
use crate::rng::{stream, Stream};
use crate::sparse_net::{Mode, Model};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// Accuracy of the train-mode (dropout) predictions made during the epoch.
    pub train_accuracy: f64,
    /// Accuracy of the rewired model on the test set.
    pub test_accuracy: Option<f64>,
    pub edges_total: usize,
    pub rewire: RewireReport,
}

pub struct Trainer {
    model: Model,
    records: EpochRecords,
    backend: Box<dyn CosineBackend>,
}

impl Trainer {
    pub fn new(model: Model) -> Self {
        Self::with_backend(model, Box::new(SequentialCosine))
    }

    pub fn with_backend(model: Model, backend: Box<dyn CosineBackend>) -> Self {
        let records = EpochRecords::for_model(&model);
        Self {
            model,
            records,
            backend,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// Trains one epoch on `train`, rewires, and evaluates on `test`.
    ///
    /// Batch order, dropout masks and rewiring draws come from streams
    /// derived from the configured seed and the epoch number.
    pub fn run_epoch(&mut self, train: &Dataset, test: Option<&Dataset>) -> Result<EpochStats> {
        check_compatible(&self.model, train)?;
        if let Some(t) = test {
            check_compatible(&self.model, t)?;
        }
        let epoch = self.model.epoch() + 1;
        let seed = self.model.config().seed;
        let batch_size = self.model.config().batch_size;
        let mut rng = stream(seed, Stream::Batches, epoch);

        let mut order: Vec<usize> = (0..train.n_samples()).collect();
        order.shuffle(&mut rng);
        let labels = train.labels();
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let samples: Vec<&[f64]> = chunk.iter().map(|&i| train.sample(i)).collect();
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let pass = self
                .model
                .forward(&samples, Mode::Train(&mut rng), Some(&mut self.records))?;
            correct += pass
                .predictions()
                .iter()
                .zip(&batch_labels)
                .filter(|(p, y)| p == y)
                .count();
            let loss = self.model.backward_and_update(&pass, &batch_labels, b)?;
            loss_sum += loss * chunk.len() as f64;
        }

        let mut evo_rng = stream(seed, Stream::Evolution, epoch);
        let rewire = evolve_epoch(
            &mut self.model,
            &mut self.records,
            self.backend.as_ref(),
            &mut evo_rng,
        )?;
        let test_accuracy = test.map(|t| accuracy(&self.model, t)).transpose()?;
        let n = train.n_samples().max(1) as f64;
        Ok(EpochStats {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            test_accuracy,
            edges_total: self.model.edge_count(),
            rewire,
        })
    }
}

fn check_compatible(model: &Model, data: &Dataset) -> Result<()> {
    if data.n_features() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "dataset feature count",
            expected: model.input_dim(),
            found: data.n_features(),
        });
    }
    if data.n_classes() > model.n_classes() {
        return Err(Error::DimensionMismatch {
            what: "dataset class count",
            expected: model.n_classes(),
            found: data.n_classes(),
        });
    }
    Ok(())
}

/// Fraction of samples whose eval-mode prediction matches the label.
pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    check_compatible(model, data)?;
    if data.n_samples() == 0 {
        return Ok(0.0);
    }
    let preds = model.predict(&data.samples())?;
    let correct = preds
        .iter()
        .zip(data.labels())
        .filter(|(p, y)| p == y)
        .count();
    Ok(correct as f64 / data.n_samples() as f64)
}

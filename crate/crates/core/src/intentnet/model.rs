//! Action and object heads trained on observation datasets.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{assemble_input, ModelVariant};
use super::mlp::VariationalMLP;
use super::train::{argmax, fit, Architecture, TrainConfig, TrainLogRow};
use super::{balanced_accuracy, IntentNetError};
use crate::actions::ActionType;
use crate::datasetgen::{Dataset, ObservationRecord};
use crate::rng;
use crate::world::MAX_OBJECTS;

pub const DEFAULT_POSTERIOR_SAMPLES: usize = 100;

/// What a network predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// One of the eleven actions.
    Action,
    /// One of the seven object slots, or "none" (class 7).
    Object,
}

impl Head {
    pub fn classes(self) -> usize {
        match self {
            Head::Action => ActionType::COUNT,
            Head::Object => MAX_OBJECTS + 1,
        }
    }

    pub fn label(self, r: &ObservationRecord) -> usize {
        match self {
            Head::Action => r.label_action,
            Head::Object => r.object().unwrap_or(MAX_OBJECTS),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub head: Head,
}

/// A trained head together with the encoding it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentModel {
    pub config: ModelConfig,
    #[serde(flatten)]
    pub net: VariationalMLP,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: IntentModel,
    pub log: Vec<TrainLogRow>,
    pub best_epoch: usize,
}

pub fn train(
    dataset: &Dataset,
    variant: ModelVariant,
    head: Head,
    tcfg: &TrainConfig,
) -> Result<Trained, IntentNetError> {
    if dataset.is_empty() {
        return Err(IntentNetError::EmptyInput);
    }
    let xs: Vec<Vec<f64>> = dataset
        .records
        .iter()
        .map(|r| assemble_input(r, variant))
        .collect();
    let ys: Vec<usize> = dataset.records.iter().map(|r| head.label(r)).collect();
    let arch = Architecture {
        input: variant.input_width(),
        hidden: variant.hidden(),
        output: head.classes(),
    };
    let fitted = fit(&arch, &xs, &ys, tcfg)?;
    Ok(Trained {
        model: IntentModel {
            config: ModelConfig { variant, head },
            net: fitted.model,
        },
        log: fitted.log,
        best_epoch: fitted.best_epoch,
    })
}

impl IntentModel {
    /// Posterior-predictive class probabilities for one record.
    pub fn predict(
        &self,
        r: &ObservationRecord,
        n: usize,
        seed: u64,
    ) -> Result<Vec<f64>, IntentNetError> {
        let mut g = rng::seeded(seed);
        self.net
            .predict(&assemble_input(r, self.config.variant), n, &mut g)
    }

    /// Predictions for a whole dataset with `n` weight draws shared across
    /// records.
    pub fn predict_all(
        &self,
        d: &Dataset,
        n: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>, IntentNetError> {
        let mut g = rng::seeded(seed);
        let draws: Vec<_> = (0..n.max(1))
            .map(|_| self.net.sample_weights(&mut g))
            .collect();
        let xs: Vec<Vec<f64>> = d
            .records
            .iter()
            .map(|r| assemble_input(r, self.config.variant))
            .collect();
        self.net.predict_batch(&xs, &draws)
    }

    /// Balanced accuracy of the argmax predictions on `d`.
    pub fn evaluate(&self, d: &Dataset, n: usize, seed: u64) -> Result<f64, IntentNetError> {
        let preds: Vec<usize> = self
            .predict_all(d, n, seed)?
            .iter()
            .map(|p| argmax(p))
            .collect();
        let labels: Vec<usize> = d
            .records
            .iter()
            .map(|r| self.config.head.label(r))
            .collect();
        balanced_accuracy(&preds, &labels)
    }

    pub fn save(&self, path: &Path) -> Result<(), IntentNetError> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<IntentModel, IntentNetError> {
        let m: IntentModel = serde_json::from_slice(&std::fs::read(path)?)?;
        let expected = m.config.variant.input_width();
        if m.net.input_dim() != expected {
            return Err(IntentNetError::ShapeMismatch {
                expected,
                got: m.net.input_dim(),
            });
        }
        let classes = m.config.head.classes();
        if m.net.output_dim() != classes {
            return Err(IntentNetError::ShapeMismatch {
                expected: classes,
                got: m.net.output_dim(),
            });
        }
        Ok(m)
    }
}

pub fn write_log_csv<W: Write>(log: &[TrainLogRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,elbo,heldout_balanced_accuracy")?;
    for r in log {
        writeln!(w, "{},{},{}", r.epoch, r.elbo, r.heldout_balanced_accuracy)?;
    }
    Ok(())
}

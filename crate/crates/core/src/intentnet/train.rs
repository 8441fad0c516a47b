//! Stochastic ELBO maximization with held-out model selection.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::eval::balanced_accuracy;
use super::mlp::{elbo_step, Adam, VariationalMLP, DEFAULT_INIT_STD, DEFAULT_PRIOR_STD};
use super::IntentNetError;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of ELBO ascent steps.
    pub epochs: usize,
    /// Held-out evaluation period, in epochs.
    pub callback_every: usize,
    pub elbo_mc_samples: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Tail fraction of the training data held out for model selection.
    pub validation_fraction: f64,
    /// Posterior draws used by the held-out evaluation.
    pub callback_samples: usize,
    pub prior_std: f64,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30_000,
            callback_every: 2_000,
            elbo_mc_samples: 1,
            learning_rate: 0.01,
            batch_size: 128,
            validation_fraction: 0.1,
            callback_samples: 20,
            prior_std: DEFAULT_PRIOR_STD,
            init_std: DEFAULT_INIT_STD,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub elbo: f64,
    pub heldout_balanced_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: VariationalMLP,
    pub log: Vec<TrainLogRow>,
    pub best_epoch: usize,
    pub best_score: f64,
}

/// Network shape: input width, hidden widths, number of classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
}

const MAX_RESTARTS: usize = 3;

/// Trains a classifier on `(xs, ys)`, keeping the parameter snapshot with the
/// best held-out balanced accuracy seen at the periodic callbacks.
pub fn fit(
    arch: &Architecture,
    xs: &[Vec<f64>],
    ys: &[usize],
    cfg: &TrainConfig,
) -> Result<FitResult, IntentNetError> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(IntentNetError::EmptyInput);
    }
    if let Some(&bad) = ys.iter().find(|&&y| y >= arch.output) {
        return Err(IntentNetError::LabelOutOfRange {
            label: bad,
            classes: arch.output,
        });
    }
    if let Some(x) = xs.iter().find(|x| x.len() != arch.input) {
        return Err(IntentNetError::ShapeMismatch {
            expected: arch.input,
            got: x.len(),
        });
    }
    let mut lr = cfg.learning_rate;
    for attempt in 0..=MAX_RESTARTS {
        let seed = rng::derive_seed(cfg.seed, attempt as u64);
        match fit_once(arch, xs, ys, cfg, lr, seed) {
            Err(IntentNetError::NonFiniteGradient) if attempt < MAX_RESTARTS => lr *= 0.5,
            other => return other,
        }
    }
    Err(IntentNetError::NonFiniteGradient)
}

fn fit_once(
    arch: &Architecture,
    xs: &[Vec<f64>],
    ys: &[usize],
    cfg: &TrainConfig,
    lr: f64,
    seed: u64,
) -> Result<FitResult, IntentNetError> {
    let mut rng: Rng = rng::seeded(seed);
    let n = xs.len();
    let n_val = ((n as f64) * cfg.validation_fraction).round() as usize;
    let (train_idx, val_idx): (Vec<usize>, Vec<usize>) = if n_val == 0 || n_val >= n {
        ((0..n).collect(), (0..n).collect())
    } else {
        ((0..n - n_val).collect(), (n - n_val..n).collect())
    };

    let mut model = VariationalMLP::new(
        arch.input,
        &arch.hidden,
        arch.output,
        cfg.prior_std,
        cfg.init_std,
    );
    let mut opt = Adam::new(2 * model.n_weights(), lr);
    let batch_size = cfg.batch_size.clamp(1, train_idx.len());
    let scale = train_idx.len() as f64 / batch_size as f64;

    let val_x: Vec<Vec<f64>> = val_idx.iter().map(|&i| xs[i].clone()).collect();
    let val_y: Vec<usize> = val_idx.iter().map(|&i| ys[i]).collect();

    let mut order = train_idx.clone();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, VariationalMLP)> = None;
    let mut elbo_acc = 0.0;
    let mut elbo_count = 0usize;
    let every = cfg.callback_every.max(1);

    for epoch in 1..=cfg.epochs {
        if cursor + batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let batch: Vec<(&[f64], usize)> = order[cursor..cursor + batch_size]
            .iter()
            .map(|&i| (xs[i].as_slice(), ys[i]))
            .collect();
        cursor += batch_size;
        let elbo = elbo_step(
            &mut model,
            &mut opt,
            &batch,
            scale,
            cfg.elbo_mc_samples,
            &mut rng,
        )?;
        elbo_acc += elbo;
        elbo_count += 1;

        if epoch % every == 0 || epoch == cfg.epochs {
            model.trained = true;
            let draws: Vec<_> = (0..cfg.callback_samples.max(1))
                .map(|_| model.sample_weights(&mut rng))
                .collect();
            let probs = model.predict_batch(&val_x, &draws)?;
            let preds: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
            let score = balanced_accuracy(&preds, &val_y)?;
            log.push(TrainLogRow {
                epoch,
                elbo: elbo_acc / elbo_count as f64,
                heldout_balanced_accuracy: score,
            });
            elbo_acc = 0.0;
            elbo_count = 0;
            if best.as_ref().is_none_or(|(b, _, _)| score >= *b) {
                best = Some((score, epoch, model.clone()));
            }
        }
    }
    model.trained = true;
    let (best_score, best_epoch, model) = best.unwrap_or((0.0, cfg.epochs, model));
    Ok(FitResult {
        model,
        log,
        best_epoch,
        best_score,
    })
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_maximum() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5, 0.2]), 1);
        assert_eq!(argmax(&[1.0]), 0);
    }

    #[test]
    fn rejects_bad_labels() {
        let arch = Architecture {
            input: 2,
            hidden: vec![3],
            output: 2,
        };
        let r = fit(&arch, &[vec![0.0, 1.0]], &[2], &TrainConfig::default());
        assert!(matches!(
            r,
            Err(IntentNetError::LabelOutOfRange {
                label: 2,
                classes: 2
            })
        ));
        assert!(matches!(
            fit(&arch, &[], &[], &TrainConfig::default()),
            Err(IntentNetError::EmptyInput)
        ));
    }
}

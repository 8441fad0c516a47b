//! Intent inference: variational Bayesian classifiers mapping gesture
//! evidence plus context to action and target-object distributions.

use thiserror::Error;

pub mod eval;
pub mod features;
pub mod infer;
pub mod mlp;
pub mod model;
pub mod train;

pub use eval::{accuracy, balanced_accuracy};
pub use features::{assemble_input, encode, ModelVariant, HIDDEN_WIDTH};
pub use infer::{
    infer_intent, infer_intent_among, rank, select, Candidate, IntentModels, DEFAULT_THRESHOLD,
};
pub use mlp::{elbo_step, Adam, Gradient, Layer, VariationalMLP, Weights};
pub use model::{
    train, write_log_csv, Head, IntentModel, ModelConfig, Trained, DEFAULT_POSTERIOR_SAMPLES,
};
pub use train::{argmax, fit, Architecture, FitResult, TrainConfig, TrainLogRow};

#[derive(Debug, Error)]
pub enum IntentNetError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite ELBO gradient; reduce the learning rate")]
    NonFiniteGradient,
    #[error("model has not been trained")]
    UntrainedModel,
    #[error("empty input")]
    EmptyInput,
    #[error("label {label} outside {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("no feasible intent above the confidence threshold")]
    NoConfidentIntent,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

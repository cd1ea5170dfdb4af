//! Training protocol: user-level splits, the BCE objective, optimizers,
//! evaluation metrics, and the 5-task × 6-model × 4-window experiment grid.

pub mod grid;
pub mod metrics;
pub mod optim;
pub mod split;
pub mod trainer;

pub use crate::nn::loss::{bce_grad, bce_loss};
pub use grid::{
    derived_seed, fingerprint_index, run_grid, CellFile, CellKey, DatasetFingerprint, GridSummary,
    RunManifest,
};
pub use metrics::{accuracy, auc, mann_whitney_auc, roc_auc, roc_points};
pub use optim::{Optimizer, OptimizerKind};
pub use split::split_users;
pub use trainer::{evaluate, train, train_with, EvalResult, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("non-finite loss at epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },
    #[error("too few participants: need {needed}, got {got} ({detail})")]
    TooFewParticipants { needed: usize, got: usize, detail: String },
    #[error("invalid training input: {0}")]
    Input(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error(transparent)]
    Preprocess(#[from] crate::preprocess::PreprocessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

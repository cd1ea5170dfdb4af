//! Minimal neural-network core: tensor ops, a static computation graph, the
//! six classifier architectures, and checkpoint I/O.
//!
//! There is no autograd tape; each architecture is a fixed DAG of typed
//! nodes ([`graph::Op`]) evaluated in topological order, with hand-written
//! backward rules per op. All arithmetic is f64; checkpoints may narrow
//! payloads to f32.

pub mod checkpoint;
pub mod graph;
pub mod loss;
pub mod models;
pub mod ops;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use graph::{Gradients, Mode, Model, Param, ParamValue};
pub use loss::{bce_grad, bce_loss};
pub use models::{
    build_ekyt, build_fcn, build_inception, build_mcdcnn, build_model, build_tcn, build_tlenet,
    ModelKind, ModelSpec,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("non-finite value in input batch")]
    NonFiniteInput,
    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("operation requires {required:?} mode, model is in {actual:?} mode")]
    WrongMode { required: Mode, actual: Mode },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

//! The three formula-graph models (GAT, HGNN, GTN), their training loop,
//! dataset splitting, two-stage grid search, and evaluation metrics.

pub mod metrics;
pub mod model;
pub mod tape;
pub mod tensor;
pub mod train;

pub use metrics::{evaluate, LabelMetrics, MetricsReport};
pub use model::{Arch, Attention, Forward, GnnModel, ModelConfig};
pub use tensor::{Real, Tensor};
pub use train::{
    grid_search, loss_and_gradients, split_dataset, train, train_with, EpochInfo, GridOutcome,
    GridResult, SplitSummary, TrainConfig, TrainHistory,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("node attrs are {got}-dim, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("hidden_dim {hidden} not divisible by num_heads {heads}")]
    BadHeadSplit { hidden: usize, heads: usize },
    #[error("dropout must be in [0,1), got {0}")]
    BadDropout(f64),
    #[error("loss diverged (NaN) at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("split counts {requested} do not sum to dataset size {actual}")]
    CountMismatch { requested: usize, actual: usize },
    #[error("graph {0} has no labels")]
    MissingLabels(String),
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint header: {0}")]
    Json(#[from] serde_json::Error),
    #[error("checkpoint payload mismatch: {0}")]
    BadCheckpoint(String),
}

//! Participant-profile classification from gaze sessions.
//!
//! Each session becomes a 6-channel x 450-step tensor of eye direction and
//! head position at successive gaze onsets. Three small networks (dense,
//! per-channel convolutional, per-channel recurrent) are trained from
//! scratch with hand-written backpropagation and Adam, using participant
//! level train/validation splits and early stopping on validation loss.

pub mod experiment;
pub mod nn;
pub mod persist;
pub mod tensor;
pub mod train;

use gazelens_core::model::ProfileField;
use thiserror::Error;

pub use experiment::{run_experiment, ExperimentConfig, RunMetrics};
pub use nn::{Architecture, Hyperparams, Network};
pub use tensor::{
    build_session_tensor, normalize_channels, participant_split, ChannelStats, SessionTensor, Split,
};
pub use train::{
    predict_proba, top_k_accuracy, train_classifier, ClassifierSpec, OutputKind, TrainedModel,
};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error(
        "participant {participant_id}: {got} gaze events, need {need} (use padding to allow fewer)"
    )]
    TooFewEvents {
        participant_id: String,
        got: usize,
        need: usize,
    },
    #[error("split of {n} participants leaves {train} for training; both sides must be non-empty")]
    DegenerateSplit { n: usize, train: usize },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("training or validation set is empty")]
    EmptySet,
    #[error("every training sample has {target} class {class}")]
    SingleClassTraining { target: ProfileField, class: usize },
    #[error("loss became non-finite at epoch {epoch} (train {train_loss}, validation {val_loss})")]
    NonFiniteLoss {
        epoch: usize,
        train_loss: f64,
        val_loss: f64,
    },
    #[error("input has {got} values, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("k = {k} is outside 1..={n_classes}")]
    KOutOfRange { k: usize, n_classes: usize },
    #[error(transparent)]
    Shape(#[from] nn::ShapeError),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

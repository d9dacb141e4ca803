//! Two-stage enhancement: a predictor blends a bank of 3D LUTs per frame,
//! then an optional restorer adds a residual correction.

pub mod arch;
mod config;
mod loss;
mod model;
mod train;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lut::LutError;
use crate::media::MediaError;
use crate::nn::NnError;

pub use config::{merge, ArchConfig, LrSchedule, TrainConfig, PRESETS};
pub use loss::{
    quality_loss, stage1_loss, stage2_loss, total_loss, ConstScorer, FileScorer, LossGrad, LossWeights, ProxyPerceptual,
    QualityScorer, ScoreField, ScoringSuite, Stage1Terms, Stage2Terms, StubScorer, COSINE_EPS,
};
pub use model::{enhance_clip, enhance_frame, frame_to_tensor, tensor_to_frame, EnhanceReport, StageOneModel, StageTwoModel, MAC_BUDGET};
pub use train::{
    continue_stage1, continue_stage2, finetune_joint, joint_loss, joint_objective, pairs_from_clips, sample_batch, stage1_backward,
    stage1_forward, stage1_objective, stage2_objective, train_stage1, train_stage2, Stage1Forward, Stage1Grads, TrainLog, TrainPair,
};

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("config: {0}")]
    Config(String),
    #[error("quality scorer: {0}")]
    Scorer(String),
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Lut(#[from] LutError),
    #[error(transparent)]
    Media(#[from] MediaError),
}

impl EnhanceError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EnhanceError::Io { path: path.to_path_buf(), source }
    }
}

//! Losses, the conditioned patch discriminator, the optimizer loop, image
//! metrics and per-identity material refinement.

mod config;
mod disc;
mod loss;
mod metrics;
mod refine;
mod trainer;

use thiserror::Error;

pub use config::{FrameFilter, Split, TrainConfig};
pub use disc::{Discriminator, DISC_INPUT_CHANNELS, DISC_SCALES};
pub use loss::{
    empty_mask_warnings, hinge_d_loss, hinge_g_loss, linearity_consistency_loss, loss_l1reg, loss_reconstruction,
    total_loss, LossParts, LossWeights, ReconLoss, PYRAMID_LEVELS,
};
pub use metrics::{masked_mse, psnr, ssim, PSNR_CAP_DB, SSIM_SIGMA, SSIM_WINDOW};
pub use refine::{refine_identity, RefineConfig, RefineResult};
pub use trainer::{evaluate, write_eval_csv, EvalRow, ProbeMetrics, StepReport, TrainData, Trainer};

use crate::config::ConfigError;
use crate::geometry::GeometryError;
use crate::linearnet::NetError;
use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("no training frames match the configuration")]
    NoFrames,
    #[error("{0}")]
    Invalid(String),
}

#[cfg(test)]
mod tests;

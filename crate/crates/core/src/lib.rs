//! Feature-level voice conversion with cycle-consistent adversarial
//! networks.
//!
//! The crate ingests vocoder frame features (mel-cepstrum, F0, aperiodicity),
//! learns a nonparallel mapping between two speakers' lower-order
//! mel-cepstra, and converts utterances stream by stream. Two parallel
//! baselines (an MSE regressor and an MSE-assisted LSGAN) are included for
//! comparison, along with DTW alignment, MLPG smoothing and an objective
//! mel-cepstral distortion metric.

pub mod align;
pub mod baselines;
pub mod batching;
pub mod cyclegan;
pub mod error;
pub mod features;
pub mod format;
pub mod mlpg;
pub mod net;
pub mod pipeline;
pub mod rng;

pub use align::{dtw_align, paired_frames, AlignmentPath};
pub use baselines::{
    mse_loss, train_gan_baseline, train_mse_baseline, GanBaselineConfig, MseBaselineConfig, ParallelTrainSet,
};
pub use cyclegan::{
    adversarial_loss_log, adversarial_loss_lsgan, convert_frames, cycle_loss, full_objective, train, CycleGanConfig,
    CycleGanModel, CycleGanTrainer, Direction, LossForm, LossReport,
};
pub use error::{Error, Result};
pub use features::{
    compute_deltas, denormalize, fit_logf0_stats, fit_norm_stats, merge_mcep, normalize, split_mcep, transform_f0,
    DeltaWindow, DeltaWindowSet, FeatureKind, FeatureSequence, LogF0Stats, NormStats,
};
pub use mlpg::{mlpg_generate, postfilter, GaussianTrajectory};
pub use net::{Activation, Gradients, Mlp, OptimizerMethod, OptimizerState};

//! Losses, metrics, optimizer, preprocessing and the training loop.

pub mod loss;
pub mod metrics;
pub mod optim;
pub mod preprocess;
pub mod trainer;

pub use loss::{dice_loss, loss, pcc_loss, weighted_ce_loss, LossGrad, LossKind, PCC_EPS};
pub use metrics::{dice_metric, region_dice, scores_dice, DiceSummary};
pub use optim::{adamax_step, cosine_lr, AdamaxState, ScheduleConfig};
pub use preprocess::{
    apply_affine, augment, downsample_labels, downsample_sample, downsample_volume, normalize_modality, resize_nearest,
    resize_trilinear, sample_affine, Affine, AugmentConfig,
};
pub use trainer::{evaluate, prepare_input, train_loop, EvalReport, LossReport, SampleDice, TrainConfig, TrainOutcome};

//! Optimizers, gradients, losses and the meta-trainers.

mod adam;
mod eval;
mod grad;
mod loss;
mod mlp;
mod preparer;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use eval::{evaluate_on_grid, GridEvaluation, PointMetrics, REL_ERROR_FLOOR};
pub use grad::{grad_central_diff, DEFAULT_GRAD_STEP};
pub use loss::{build_targets, global_loss, point_eval, point_losses, prepared_state, PointEval, PointTarget};
pub use mlp::Mlp;
pub use preparer::{Checkpoint, ExactPreparer, GibbsPreparer, Preparer, CHECKPOINT_SCHEMA_VERSION};
pub use trainer::{
    train, train_meta_vqt, train_nn_meta_vqt, train_vqt_single, Architecture, GradientMethod, MetaTrainConfig,
    SingleReport, TrainReport, VqtInit, DEFAULT_HIDDEN, DEFAULT_META_EPOCHS, META_LR, NN_META_LR,
};

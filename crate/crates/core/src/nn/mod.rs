//! Feed-forward network that learns the solver's power mapping.

mod mlp;
mod persist;
mod train;

pub use mlp::{
    clip_power, forward, predict_power, xavier_init, ForwardCache, Mlp, Normalization, Predictor,
    DEFAULT_DIMS,
};
pub use persist::{ModelRecord, ACTIVATION_TAG};
pub use train::{
    backprop, full_gradient, l2_decay_factor, loss, mse, step_adam, step_l1, step_l2, step_plain,
    train, AdamState, Example, GradientSet, HistoryPoint, Optimizer, Regularization, TrainConfig,
    TrainOutcome,
};

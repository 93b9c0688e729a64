//! Phone-level Bi-LSTM predictor of the four prosodic controls.

mod config;
mod loss;
mod model;
mod train;

pub use config::{default_grid, EmphasisFeature, PredictorConfig, DEFAULT_TARGET_WEIGHTS, PRESET_NAMES};
pub use loss::{weighted_l1_grad, weighted_l1_loss};
pub use model::{
    Block, DropoutCtx, ForwardCache, PredictorModel, PredictorParams, UtteranceInput, MODEL_FORMAT_VERSION,
    N_POSITION_FEATURES,
};
pub use train::{
    example_loss, grid_search, loss_and_grad, mean_loss, prepare_examples, train, train_model, EpochLoss, Example,
    GridResult, TrainReport, TrainSummary,
};

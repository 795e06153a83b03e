//! Convolutional regressor, its training loop and the nightlight baseline.

mod gradcheck;
mod network;
mod nightlight;
pub(crate) mod train;

pub use gradcheck::{grad_check, grad_check_with, GradCheckReport, GradCheckSpec};
pub use network::{Architecture, ConvRegressorConfig, ModelParams, ParamEntry, Scalar};
pub use nightlight::{
    predict_nightlight, sample_nightlight, train_nightlight_baseline, NightlightGrid, NIGHTLIGHT_CELL_DEG,
    NIGHTLIGHT_MAX,
};
pub use train::{
    embed_batch, predict_batch, stratified_split, train, write_history, Dataset, EpochRecord, TrainOutcome, TrainSpec,
};

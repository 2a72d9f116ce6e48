//! Neural density estimator: network, training data, optimizers and model
//! files. Everything is written against plain `f64` buffers.

mod activation;
mod mlp;
mod model_io;
mod optim;
mod samples;
mod train;

pub use activation::{tanh_in_place, Activation};
pub use mlp::{
    default_layer_sizes, forward, init_params, init_params_with, layer_sizes, param_count, InputNormalization,
    MlpParams, DEFAULT_HIDDEN_LAYERS, DEFAULT_HIDDEN_WIDTH,
};
pub use model_io::{read_model, read_model_file, write_model, write_model_file, MODEL_MAGIC, MODEL_VERSION};
pub use optim::{adam_step, lbfgs_minimize, AdamConfig, AdamState, LbfgsConfig, LbfgsOutcome, LbfgsStop, Objective};
pub use samples::{sample_dataset, Sample, SampleSet};
pub use train::{
    adam_optimize, gradient, lbfgs_optimize, loss_and_gradient, mse_loss, train, train_from, HistoryPoint, Phase,
    TrainConfig, TrainReport,
};

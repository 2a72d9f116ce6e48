//! Mean-squared-error objective and the two-phase Adam then L-BFGS schedule.

use std::time::Instant;

use super::activation::Activation;
use super::mlp::{default_layer_sizes, init_params_with, layer_sizes, InputNormalization, MlpParams, NetShape};
use super::mlp::{validate_layer_sizes, PreparedBatch};
use super::optim::{adam_step, lbfgs_minimize, AdamConfig, AdamState, LbfgsConfig, LbfgsStop, Objective};
use super::samples::SampleSet;
use crate::error::{Error, Result};

fn prepare(params: &MlpParams, samples: &SampleSet) -> Result<PreparedBatch> {
    if samples.is_empty() {
        return Err(Error::InvalidSamples("empty sample set".into()));
    }
    Ok(PreparedBatch::new(
        samples.points().iter().map(|s| (s.x, s.t, s.rho)),
        params.normalization(),
    ))
}

/// `(1/N) sum (rho - rho_hat)^2` over the samples.
pub fn mse_loss(params: &MlpParams, samples: &SampleSet) -> Result<f64> {
    Ok(prepare(params, samples)?.loss(params.shape(), params.values()))
}

/// Gradient of [`mse_loss`], laid out like [`MlpParams::values`].
pub fn gradient(params: &MlpParams, samples: &SampleSet) -> Result<Vec<f64>> {
    Ok(loss_and_gradient(params, samples)?.1)
}

pub fn loss_and_gradient(params: &MlpParams, samples: &SampleSet) -> Result<(f64, Vec<f64>)> {
    let batch = prepare(params, samples)?;
    let mut grad = vec![0.0; params.num_params()];
    let loss = batch.loss_and_gradient(params.shape(), params.values(), &mut grad);
    Ok((loss, grad))
}

struct MseObjective<'a> {
    shape: NetShape<'a>,
    batch: PreparedBatch,
    dim: usize,
}

impl Objective for MseObjective<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.batch.loss_and_gradient(self.shape, x, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub adam_iterations: usize,
    pub adam_learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_epsilon: f64,
    pub lbfgs_iterations: usize,
    pub lbfgs_memory: usize,
    pub lbfgs_tolerance: f64,
    pub seed: u64,
    /// `None` derives the map from the samples' grid.
    pub input_normalization: Option<InputNormalization>,
    /// Sampling period of the MSE history, in iterations.
    pub history_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl TrainConfig {
    /// Ten hidden layers of 40, 15,000 Adam then 50,000 L-BFGS iterations.
    pub fn paper() -> Self {
        Self {
            layer_sizes: default_layer_sizes(),
            activation: Activation::Tanh,
            adam_iterations: 15_000,
            adam_learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_epsilon: 1e-8,
            lbfgs_iterations: 50_000,
            lbfgs_memory: 10,
            lbfgs_tolerance: 1e-9,
            seed: 0,
            input_normalization: None,
            history_every: 100,
        }
    }

    /// Four hidden layers of 20, 3,000 Adam then 2,000 L-BFGS iterations.
    pub fn ci_scale() -> Self {
        Self {
            layer_sizes: layer_sizes(4, 20),
            adam_iterations: 3_000,
            lbfgs_iterations: 2_000,
            ..Self::paper()
        }
    }

    /// Warm-start budget for refinement: 2,000 Adam then 5,000 L-BFGS.
    pub fn refine_budget() -> Self {
        Self {
            adam_iterations: 2_000,
            lbfgs_iterations: 5_000,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_layer_sizes(&self.layer_sizes)?;
        let bad = |m: &str| Err(Error::InvalidTrainConfig(m.into()));
        if !(self.adam_learning_rate > 0.0 && self.adam_learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return bad("Adam epsilon must be positive");
        }
        if !(self.lbfgs_tolerance >= 0.0 && self.lbfgs_tolerance.is_finite()) {
            return bad("L-BFGS tolerance must be non-negative");
        }
        if self.lbfgs_memory == 0 {
            return bad("L-BFGS memory must be at least 1");
        }
        if self.history_every == 0 {
            return bad("history period must be at least 1");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.adam_learning_rate,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            epsilon: self.adam_epsilon,
        }
    }

    pub fn lbfgs(&self) -> LbfgsConfig {
        LbfgsConfig {
            max_iterations: self.lbfgs_iterations,
            memory: self.lbfgs_memory,
            gradient_tolerance: self.lbfgs_tolerance,
            history_every: self.history_every,
            ..LbfgsConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Adam,
    Lbfgs,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Adam => "adam",
            Phase::Lbfgs => "lbfgs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryPoint {
    pub phase: Phase,
    /// Iteration within the phase at which `mse` was measured.
    pub iteration: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub final_mse: f64,
    pub mse_history: Vec<HistoryPoint>,
    pub wall_time_secs: f64,
    pub adam_iterations_run: usize,
    pub lbfgs_iterations_run: usize,
    pub lbfgs_evaluations: usize,
    /// Why L-BFGS stopped; `None` when the phase had no budget.
    pub lbfgs_stop: Option<LbfgsStop>,
}

/// Fresh Glorot-initialized network trained on `samples`.
pub fn train(samples: &SampleSet, config: &TrainConfig) -> Result<(MlpParams, TrainReport)> {
    config.validate()?;
    let norm = config
        .input_normalization
        .unwrap_or_else(|| InputNormalization::for_grid(samples.source_grid()));
    let params = init_params_with(&config.layer_sizes, config.activation, norm, config.seed)?;
    train_from(params, samples, config)
}

/// Continues training `params` on `samples`. The architecture, activation
/// and input map of `params` are kept; `config` supplies only the schedule.
pub fn train_from(
    mut params: MlpParams,
    samples: &SampleSet,
    config: &TrainConfig,
) -> Result<(MlpParams, TrainReport)> {
    config.validate()?;
    let start = Instant::now();
    let sizes = params.layer_sizes().to_vec();
    let objective = MseObjective {
        shape: NetShape {
            sizes: &sizes,
            activation: params.activation(),
        },
        batch: prepare(&params, samples)?,
        dim: params.num_params(),
    };
    let mut history = Vec::new();

    let adam = config.adam();
    let mut state = AdamState::new(objective.dim);
    let mut grad = vec![0.0; objective.dim];
    for it in 0..config.adam_iterations {
        let loss = objective.value_and_gradient(params.values(), &mut grad);
        if !loss.is_finite() {
            return Err(Error::InvalidNetwork(format!("Adam diverged at iteration {it}")));
        }
        if it % config.history_every == 0 {
            history.push(HistoryPoint {
                phase: Phase::Adam,
                iteration: it,
                mse: loss,
            });
        }
        adam_step(params.values_mut(), &grad, &mut state, &adam);
    }

    let mut report = TrainReport {
        final_mse: f64::NAN,
        mse_history: Vec::new(),
        wall_time_secs: 0.0,
        adam_iterations_run: config.adam_iterations,
        lbfgs_iterations_run: 0,
        lbfgs_evaluations: 0,
        lbfgs_stop: None,
    };
    if config.lbfgs_iterations > 0 {
        let mut x = params.values().to_vec();
        let outcome = lbfgs_minimize(&objective, &mut x, &config.lbfgs());
        if outcome.stop == LbfgsStop::NonFinite {
            return Err(Error::InvalidNetwork("L-BFGS reached a non-finite objective".into()));
        }
        params.set_values(&x);
        history.extend(outcome.history.iter().map(|&(iteration, mse)| HistoryPoint {
            phase: Phase::Lbfgs,
            iteration,
            mse,
        }));
        report.final_mse = outcome.final_value;
        report.lbfgs_stop = Some(outcome.stop);
        report.lbfgs_iterations_run = outcome.iterations;
        report.lbfgs_evaluations = outcome.evaluations;
    } else {
        report.final_mse = objective.batch.loss(objective.shape, params.values());
        if config.adam_iterations > 0 {
            history.push(HistoryPoint {
                phase: Phase::Adam,
                iteration: config.adam_iterations,
                mse: report.final_mse,
            });
        }
    }
    report.mse_history = history;
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok((params, report))
}

/// Adam phase only, warm-started from `params`.
pub fn adam_optimize(params: MlpParams, samples: &SampleSet, config: &TrainConfig) -> Result<(MlpParams, TrainReport)> {
    let config = TrainConfig {
        lbfgs_iterations: 0,
        ..config.clone()
    };
    train_from(params, samples, &config)
}

/// L-BFGS phase only, warm-started from `params`.
pub fn lbfgs_optimize(
    params: MlpParams,
    samples: &SampleSet,
    config: &TrainConfig,
) -> Result<(MlpParams, TrainReport)> {
    let config = TrainConfig {
        adam_iterations: 0,
        ..config.clone()
    };
    train_from(params, samples, &config)
}

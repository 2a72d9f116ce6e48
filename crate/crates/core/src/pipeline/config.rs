//! Line-oriented run configuration: `key = value` with dotted section keys.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::certify::{Evaluation, MetricKind, Normalization, SweepOptions, Thresholds};
use crate::error::{Error, Result};
use crate::lwr::{Environment, Grid, PiecewiseConstantProfile};
use crate::nn::{Activation, TrainConfig};

/// Every recognised key with a one-line description, in emission order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    (
        "seed",
        "master seed; sampling and initialization seeds are derived from it",
    ),
    ("output_dir", "run directory for datasets, model, reports and manifest"),
    ("env.v_f", "free-flow speed of the training environment (m/s)"),
    ("env.rho_m", "jam density (veh/m), shared by all environments"),
    ("grid.x_min", "first space node (m)"),
    ("grid.x_max", "last space node (m); dx must divide x_max - x_min"),
    ("grid.dx", "space step (m)"),
    ("grid.t_max", "last time node (s); dt must divide it"),
    ("grid.dt", "time step (s)"),
    (
        "profile.breakpoints",
        "ascending interval ends of the initial density, comma separated (m)",
    ),
    (
        "profile.values",
        "density on each interval (veh/m), one fewer than breakpoints",
    ),
    (
        "samples.count",
        "training samples drawn without replacement from the training grid",
    ),
    (
        "train.hidden",
        "hidden layer widths, comma separated; inputs are (x, t), output is rho",
    ),
    ("train.activation", "hidden activation: tanh or linear"),
    ("train.adam_iterations", "Adam iterations before L-BFGS"),
    ("train.adam_learning_rate", "Adam step size"),
    ("train.adam_beta1", "Adam first-moment decay"),
    ("train.adam_beta2", "Adam second-moment decay"),
    ("train.adam_epsilon", "Adam denominator offset"),
    ("train.lbfgs_iterations", "maximum L-BFGS iterations"),
    ("train.lbfgs_memory", "L-BFGS curvature pairs kept"),
    (
        "train.lbfgs_tolerance",
        "L-BFGS stops when the gradient norm falls to this",
    ),
    ("train.history_every", "MSE history sampling period (iterations)"),
    ("sweep.v_f", "free-flow speeds to certify, comma separated (m/s)"),
    ("certify.metric", "data_mismatch or pde_residual"),
    ("certify.reuse_max", "largest NPL classified Reuse (C)"),
    (
        "certify.refine_max",
        "largest NPL classified Refine (R); above is Discard (D)",
    ),
    (
        "certify.normalization",
        "training (divide by the training env's loss) or a positive constant",
    ),
    (
        "certify.sensors",
        "sensor positions (m) restricting the loss to their grid columns; empty for the full grid",
    ),
];

/// Everything a pipeline run needs. `train.seed` is not part of the file;
/// [`RunConfig::train_config`] fills it from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub env: Environment,
    pub grid: Grid,
    pub profile: PiecewiseConstantProfile,
    pub sample_count: usize,
    pub train: TrainConfig,
    pub sweep_v_f: Vec<f64>,
    pub metric: MetricKind,
    pub thresholds: Thresholds,
    pub normalization: Normalization,
    pub sensors: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("run"),
            env: Environment::paper(),
            grid: Grid::paper(),
            profile: PiecewiseConstantProfile::paper(),
            sample_count: 15_000,
            train: TrainConfig::paper(),
            sweep_v_f: (1..=9).map(|k| 5.0 * k as f64).collect(),
            metric: MetricKind::DataMismatch,
            thresholds: Thresholds::default(),
            normalization: Normalization::TrainingEnv,
            sensors: None,
        }
    }
}

/// Stages that draw random numbers. Each gets its own stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Sampling = 1,
    Init = 2,
}

/// Seed for `stage`, a SplitMix64 output at counter position `stage`.
pub fn stage_seed(master: u64, stage: Stage) -> u64 {
    let mut z = master.wrapping_add((stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shortest round-trip form; exponent notation below 1e-4.
fn num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Training schedule with the derived initialization seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: stage_seed(self.seed, Stage::Init),
            ..self.train.clone()
        }
    }

    pub fn sample_seed(&self) -> u64 {
        stage_seed(self.seed, Stage::Sampling)
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            kind: self.metric,
            thresholds: self.thresholds,
            normalization: self.normalization,
            evaluation: match &self.sensors {
                None => Evaluation::FullGrid,
                Some(xs) => Evaluation::Sensors(xs.clone()),
            },
        }
    }

    /// Training speed and sweep speeds, sorted, without repeats.
    pub fn all_speeds(&self) -> Vec<f64> {
        let mut v = self.sweep_v_f.clone();
        v.push(self.env.v_f());
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::Config { line: 0, reason });
        let wrap = |e: Error| Error::Config {
            line: 0,
            reason: e.to_string(),
        };
        self.train.validate().map_err(wrap)?;
        if self.train.layer_sizes.first() != Some(&2) || self.train.layer_sizes.last() != Some(&1) {
            return bad("network must map (x, t) to a single density".into());
        }
        if self.sample_count == 0 || self.sample_count > self.grid.node_count() {
            return bad(format!(
                "samples.count must lie in 1..={} for this grid, got {}",
                self.grid.node_count(),
                self.sample_count
            ));
        }
        if self.sweep_v_f.is_empty() {
            return bad("sweep.v_f is empty".into());
        }
        let mut seen = self.sweep_v_f.clone();
        seen.sort_by(f64::total_cmp);
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return bad("sweep.v_f repeats a speed".into());
        }
        for &v in &self.sweep_v_f {
            self.env.with_v_f(v).map_err(wrap)?;
        }
        if let Normalization::Fixed(c) = self.normalization {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("certify.normalization must be positive, got {c}"));
            }
        }
        if let Some(xs) = &self.sensors {
            if xs.is_empty() {
                return bad("certify.sensors is present but empty".into());
            }
            if let Some(x) = xs
                .iter()
                .find(|&&x| !(x >= self.grid.x_min() && x <= self.grid.x_max()))
            {
                return bad(format!("sensor at {x} m lies outside the grid"));
            }
        }
        if self.output_dir.as_os_str().is_empty() {
            return bad("output_dir is empty".into());
        }
        Ok(())
    }

    /// Text form accepted by [`RunConfig::parse`].
    pub fn emit(&self) -> String {
        let t = &self.train;
        let hidden: Vec<String> = t.layer_sizes[1..t.layer_sizes.len() - 1]
            .iter()
            .map(|w| w.to_string())
            .collect();
        let value = |key: &str| -> String {
            match key {
                "seed" => self.seed.to_string(),
                "output_dir" => self.output_dir.display().to_string(),
                "env.v_f" => num(self.env.v_f()),
                "env.rho_m" => num(self.env.rho_m()),
                "grid.x_min" => num(self.grid.x_min()),
                "grid.x_max" => num(self.grid.x_max()),
                "grid.dx" => num(self.grid.dx()),
                "grid.t_max" => num(self.grid.t_max()),
                "grid.dt" => num(self.grid.dt()),
                "profile.breakpoints" => join(self.profile.breakpoints()),
                "profile.values" => join(self.profile.values()),
                "samples.count" => self.sample_count.to_string(),
                "train.hidden" => hidden.join(","),
                "train.activation" => match t.activation {
                    Activation::Tanh => "tanh".into(),
                    Activation::Linear => "linear".into(),
                },
                "train.adam_iterations" => t.adam_iterations.to_string(),
                "train.adam_learning_rate" => num(t.adam_learning_rate),
                "train.adam_beta1" => num(t.adam_betas.0),
                "train.adam_beta2" => num(t.adam_betas.1),
                "train.adam_epsilon" => num(t.adam_epsilon),
                "train.lbfgs_iterations" => t.lbfgs_iterations.to_string(),
                "train.lbfgs_memory" => t.lbfgs_memory.to_string(),
                "train.lbfgs_tolerance" => num(t.lbfgs_tolerance),
                "train.history_every" => t.history_every.to_string(),
                "sweep.v_f" => join(&self.sweep_v_f),
                "certify.metric" => self.metric.to_string(),
                "certify.reuse_max" => num(self.thresholds.reuse_max()),
                "certify.refine_max" => num(self.thresholds.refine_max()),
                "certify.normalization" => match self.normalization {
                    Normalization::TrainingEnv => "training".into(),
                    Normalization::Fixed(c) => num(c),
                },
                "certify.sensors" => self.sensors.as_deref().map(join).unwrap_or_default(),
                _ => unreachable!("key table and emitter disagree on {key}"),
            }
        };
        let mut out = String::new();
        for (key, _) in CONFIG_KEYS {
            let v = value(key);
            if v.is_empty() {
                let _ = writeln!(out, "{key} =");
            } else {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }

    /// Starts from the defaults and applies each `key = value` line. Blank
    /// lines and `#` comments are skipped; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = Raw::from(&RunConfig::default());
        let mut seen = HashSet::new();
        for (k, line) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Config { line: line_no, reason };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.iter().any(|(k, _)| *k == key) {
                return Err(err(format!("unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("key {key:?} given twice")));
            }
            raw.set(key, value).map_err(err)?;
        }
        raw.build()
    }
}

/// Field values before cross-field validation.
struct Raw {
    seed: u64,
    output_dir: String,
    v_f: f64,
    rho_m: f64,
    grid: [f64; 5],
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    sample_count: usize,
    hidden: Vec<usize>,
    train: TrainConfig,
    sweep: Vec<f64>,
    metric: MetricKind,
    reuse_max: f64,
    refine_max: f64,
    normalization: Normalization,
    sensors: Option<Vec<f64>>,
}

fn number<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

fn list<T: std::str::FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| number(s.trim())).collect()
}

impl From<&RunConfig> for Raw {
    fn from(c: &RunConfig) -> Self {
        let s = &c.train.layer_sizes;
        Raw {
            seed: c.seed,
            output_dir: c.output_dir.display().to_string(),
            v_f: c.env.v_f(),
            rho_m: c.env.rho_m(),
            grid: [c.grid.x_min(), c.grid.x_max(), c.grid.dx(), c.grid.t_max(), c.grid.dt()],
            breakpoints: c.profile.breakpoints().to_vec(),
            values: c.profile.values().to_vec(),
            sample_count: c.sample_count,
            hidden: s[1..s.len() - 1].to_vec(),
            train: c.train.clone(),
            sweep: c.sweep_v_f.clone(),
            metric: c.metric,
            reuse_max: c.thresholds.reuse_max(),
            refine_max: c.thresholds.refine_max(),
            normalization: c.normalization,
            sensors: c.sensors.clone(),
        }
    }
}

impl Raw {
    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let t = &mut self.train;
        match key {
            "seed" => self.seed = number(v)?,
            "output_dir" => self.output_dir = v.to_string(),
            "env.v_f" => self.v_f = number(v)?,
            "env.rho_m" => self.rho_m = number(v)?,
            "grid.x_min" => self.grid[0] = number(v)?,
            "grid.x_max" => self.grid[1] = number(v)?,
            "grid.dx" => self.grid[2] = number(v)?,
            "grid.t_max" => self.grid[3] = number(v)?,
            "grid.dt" => self.grid[4] = number(v)?,
            "profile.breakpoints" => self.breakpoints = list(v)?,
            "profile.values" => self.values = list(v)?,
            "samples.count" => self.sample_count = number(v)?,
            "train.hidden" => self.hidden = list(v)?,
            "train.activation" => {
                t.activation = match v {
                    "tanh" => Activation::Tanh,
                    "linear" => Activation::Linear,
                    _ => return Err(format!("unknown activation {v:?} (expected tanh or linear)")),
                }
            }
            "train.adam_iterations" => t.adam_iterations = number(v)?,
            "train.adam_learning_rate" => t.adam_learning_rate = number(v)?,
            "train.adam_beta1" => t.adam_betas.0 = number(v)?,
            "train.adam_beta2" => t.adam_betas.1 = number(v)?,
            "train.adam_epsilon" => t.adam_epsilon = number(v)?,
            "train.lbfgs_iterations" => t.lbfgs_iterations = number(v)?,
            "train.lbfgs_memory" => t.lbfgs_memory = number(v)?,
            "train.lbfgs_tolerance" => t.lbfgs_tolerance = number(v)?,
            "train.history_every" => t.history_every = number(v)?,
            "sweep.v_f" => self.sweep = list(v)?,
            "certify.metric" => self.metric = v.parse()?,
            "certify.reuse_max" => self.reuse_max = number(v)?,
            "certify.refine_max" => self.refine_max = number(v)?,
            "certify.normalization" => {
                self.normalization = if v == "training" {
                    Normalization::TrainingEnv
                } else {
                    Normalization::Fixed(number(v)?)
                }
            }
            "certify.sensors" => self.sensors = if v.is_empty() { None } else { Some(list(v)?) },
            _ => unreachable!("unknown keys are rejected before dispatch"),
        }
        Ok(())
    }

    fn build(self) -> Result<RunConfig> {
        let wrap = |e: Error| Error::Config {
            line: 0,
            reason: e.to_string(),
        };
        let [x_min, x_max, dx, t_max, dt] = self.grid;
        let mut layer_sizes = vec![2];
        layer_sizes.extend(&self.hidden);
        layer_sizes.push(1);
        let config = RunConfig {
            seed: self.seed,
            output_dir: PathBuf::from(self.output_dir),
            env: Environment::new(self.v_f, self.rho_m).map_err(wrap)?,
            grid: Grid::new(x_min, x_max, dx, t_max, dt).map_err(wrap)?,
            profile: PiecewiseConstantProfile::new(self.breakpoints, self.values).map_err(wrap)?,
            sample_count: self.sample_count,
            train: TrainConfig {
                layer_sizes,
                ..self.train
            },
            sweep_v_f: self.sweep,
            metric: self.metric,
            thresholds: Thresholds::new(self.reuse_max, self.refine_max).map_err(wrap)?,
            normalization: self.normalization,
            sensors: self.sensors,
        };
        config.validate()?;
        Ok(config)
    }
}

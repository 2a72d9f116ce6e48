//! Normalized physics loss, Reuse/Refine/Discard classification and the
//! cross-environment certification sweep.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::metrics::{bound_violation_rate, pde_residual_loss_on, rel_l2_error_on};
use crate::error::{Error, Result};
use crate::lwr::{lax_hopf_solve, DensityField, Environment, Grid, PiecewiseConstantProfile};
use crate::nn::MlpParams;

/// Smallest normalization constant; keeps a perfect training fit from
/// dividing by zero.
pub const NPL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MetricKind {
    /// Relative L2 distance to the conservation-law solution.
    #[default]
    DataMismatch,
    /// Mean squared residual of the conservation law itself.
    PdeResidual,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::DataMismatch => "data_mismatch",
            MetricKind::PdeResidual => "pde_residual",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "data_mismatch" => Ok(MetricKind::DataMismatch),
            "pde_residual" => Ok(MetricKind::PdeResidual),
            _ => Err(format!("unknown metric {s:?} (expected data_mismatch or pde_residual)")),
        }
    }
}

/// Upper NPL bounds of the Reuse and Refine bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    reuse_max: f64,
    refine_max: f64,
}

impl Thresholds {
    pub fn new(reuse_max: f64, refine_max: f64) -> Result<Self> {
        if !(reuse_max > 0.0 && reuse_max < refine_max && refine_max.is_finite()) {
            return Err(Error::Metric(format!(
                "thresholds need 0 < reuse_max < refine_max, got {reuse_max}, {refine_max}"
            )));
        }
        Ok(Self { reuse_max, refine_max })
    }

    pub fn reuse_max(&self) -> f64 {
        self.reuse_max
    }

    pub fn refine_max(&self) -> f64 {
        self.refine_max
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            reuse_max: 2.0,
            refine_max: 5.0,
        }
    }
}

/// Certification verdict, ordered from best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Reuse,
    Refine,
    Discard,
}

impl Category {
    pub fn letter(self) -> char {
        match self {
            Category::Reuse => 'C',
            Category::Refine => 'R',
            Category::Discard => 'D',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'C' => Some(Category::Reuse),
            'R' => Some(Category::Refine),
            'D' => Some(Category::Discard),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// `C` up to and including `reuse_max`, `R` up to and including
/// `refine_max`, `D` above. Zero is `C`.
pub fn classify(npl: f64, thresholds: &Thresholds) -> Result<Category> {
    if npl.is_nan() || npl < 0.0 {
        return Err(Error::Metric(format!("NPL must be non-negative, got {npl}")));
    }
    Ok(if npl <= thresholds.reuse_max {
        Category::Reuse
    } else if npl <= thresholds.refine_max {
        Category::Refine
    } else {
        Category::Discard
    })
}

/// Anything that yields a density field on a grid. The field may depend on
/// the grid but not on the environment: shifting the environment changes
/// the reference solution, never the model.
pub trait DensityModel: Sync {
    fn predict_field(&self, grid: &Grid) -> Result<Vec<f64>>;
}

impl DensityModel for MlpParams {
    fn predict_field(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.predict_grid(grid)
    }
}

/// A precomputed field used as a model, for solver-to-solver comparisons.
impl DensityModel for DensityField {
    fn predict_field(&self, grid: &Grid) -> Result<Vec<f64>> {
        if self.grid() != grid {
            return Err(Error::GridMismatch(
                "fixed field was computed on a different grid".into(),
            ));
        }
        Ok(self.values().to_vec())
    }
}

/// Where the physics loss is evaluated.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Evaluation {
    #[default]
    FullGrid,
    /// Only at the grid columns nearest these sensor positions (meters).
    Sensors(Vec<f64>),
}

impl Evaluation {
    fn rows(&self, grid: &Grid) -> Result<Option<Vec<usize>>> {
        match self {
            Evaluation::FullGrid => Ok(None),
            Evaluation::Sensors(xs) => {
                if xs.is_empty() {
                    return Err(Error::Metric("empty sensor list".into()));
                }
                let mut rows = Vec::with_capacity(xs.len());
                for &x in xs {
                    if !(x >= grid.x_min() && x <= grid.x_max()) {
                        return Err(Error::Metric(format!("sensor at {x} m lies outside the grid")));
                    }
                    rows.push(((x - grid.x_min()) / grid.dx()).round() as usize);
                }
                rows.sort_unstable();
                rows.dedup();
                Ok(Some(rows))
            }
        }
    }
}

type TruthFor<'a> = dyn Fn(&Environment) -> Result<Cow<'a, DensityField>> + Sync + 'a;

fn raw_loss<'a>(field: &DensityField, kind: MetricKind, rows: Option<&[usize]>, truth: &TruthFor<'a>) -> Result<f64> {
    match kind {
        MetricKind::DataMismatch => rel_l2_error_on(field, truth(field.env())?.as_ref(), rows),
        MetricKind::PdeResidual => pde_residual_loss_on(field, field.env(), rows),
    }
}

fn solved<'a>(
    profile: &'a PiecewiseConstantProfile,
    grid: &'a Grid,
) -> impl Fn(&Environment) -> Result<Cow<'a, DensityField>> + Sync + 'a {
    move |env| Ok(Cow::Owned(lax_hopf_solve(profile, env, grid)?.1))
}

/// Raw physics loss of `model` in `env`: data mismatch against the exact
/// solution from `profile`, or the conservation-law residual under `env`'s
/// flux.
pub fn physics_loss(
    model: &dyn DensityModel,
    env: &Environment,
    grid: &Grid,
    profile: &PiecewiseConstantProfile,
    kind: MetricKind,
) -> Result<f64> {
    let field = DensityField::new(*grid, *env, model.predict_field(grid)?)?;
    raw_loss(&field, kind, None, &solved(profile, grid))
}

/// How raw losses are turned into NPL.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Normalization {
    /// Divide by the training environment's raw loss, floored at
    /// [`NPL_FLOOR`].
    #[default]
    TrainingEnv,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NplEntry {
    pub env: Environment,
    pub raw_loss: f64,
    pub npl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NplResult {
    pub normalization_constant: f64,
    pub entries: Vec<NplEntry>,
}

/// Settings shared by every environment in a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOptions {
    pub kind: MetricKind,
    pub thresholds: Thresholds,
    pub normalization: Normalization,
    pub evaluation: Evaluation,
}

struct Evaluated {
    entries: Vec<(NplEntry, f64)>,
    constant: f64,
}

fn evaluate(
    model: &dyn DensityModel,
    training_env: &Environment,
    envs: &[Environment],
    grid: &Grid,
    options: &SweepOptions,
    truth: &TruthFor<'_>,
) -> Result<Evaluated> {
    if envs.is_empty() {
        return Err(Error::Metric("no environments to evaluate".into()));
    }
    let prediction = model.predict_field(grid)?;
    let rows = options.evaluation.rows(grid)?;
    let rows = rows.as_deref();
    let score = |env: &Environment| -> Result<(f64, f64)> {
        let field = DensityField::new(*grid, *env, prediction.clone())?;
        let raw = raw_loss(&field, options.kind, rows, truth)?;
        Ok((raw, bound_violation_rate(&field, env)))
    };
    let scored: Vec<(f64, f64)> = envs.par_iter().map(score).collect::<Result<_>>()?;

    let constant = match options.normalization {
        Normalization::Fixed(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Metric(format!(
                    "normalization constant must be positive, got {c}"
                )));
            }
            c
        }
        Normalization::TrainingEnv => {
            let raw = match envs.iter().position(|e| e == training_env) {
                Some(k) => scored[k].0,
                None => score(training_env)?.0,
            };
            raw.max(NPL_FLOOR)
        }
    };
    let entries = envs
        .iter()
        .zip(scored)
        .map(|(env, (raw, bvr))| {
            (
                NplEntry {
                    env: *env,
                    raw_loss: raw,
                    npl: raw / constant,
                },
                bvr,
            )
        })
        .collect();
    Ok(Evaluated { entries, constant })
}

/// Raw loss and NPL of `model` in each environment, in the given order.
pub fn compute_npl(
    model: &dyn DensityModel,
    training_env: &Environment,
    envs: &[Environment],
    grid: &Grid,
    profile: &PiecewiseConstantProfile,
    kind: MetricKind,
) -> Result<NplResult> {
    let options = SweepOptions {
        kind,
        ..SweepOptions::default()
    };
    let e = evaluate(model, training_env, envs, grid, &options, &solved(profile, grid))?;
    Ok(NplResult {
        normalization_constant: e.constant,
        entries: e.entries.into_iter().map(|(n, _)| n).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertRow {
    pub env: Environment,
    pub raw_loss: f64,
    pub npl: f64,
    pub category: Category,
    pub bound_violation_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationReport {
    pub training_env: Environment,
    pub metric: MetricKind,
    pub normalization_constant: f64,
    pub rows: Vec<CertRow>,
    pub thresholds: Thresholds,
}

impl CertificationReport {
    pub fn row(&self, v_f: f64) -> Option<&CertRow> {
        self.rows.iter().find(|r| r.env.v_f() == v_f)
    }
}

fn sorted_speeds(v_f_list: &[f64]) -> Result<Vec<f64>> {
    let mut speeds = v_f_list.to_vec();
    if speeds.iter().any(|v| !v.is_finite()) {
        return Err(Error::Metric("non-finite free-flow speed in sweep".into()));
    }
    speeds.sort_by(f64::total_cmp);
    if speeds.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Metric("duplicate free-flow speed in sweep".into()));
    }
    Ok(speeds)
}

fn assemble(training_env: &Environment, e: Evaluated, options: &SweepOptions) -> Result<CertificationReport> {
    let rows = e
        .entries
        .into_iter()
        .map(|(n, bvr)| {
            Ok(CertRow {
                env: n.env,
                raw_loss: n.raw_loss,
                npl: n.npl,
                category: classify(n.npl, &options.thresholds)?,
                bound_violation_rate: bvr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CertificationReport {
        training_env: *training_env,
        metric: options.kind,
        normalization_constant: e.constant,
        rows,
        thresholds: options.thresholds,
    })
}

/// Certifies `model` in every environment obtained from `training_env` by
/// replacing `v_f`. Rows come back sorted by `v_f`.
pub fn certification_sweep(
    model: &dyn DensityModel,
    training_env: &Environment,
    v_f_list: &[f64],
    grid: &Grid,
    profile: &PiecewiseConstantProfile,
    options: &SweepOptions,
) -> Result<CertificationReport> {
    let speeds = sorted_speeds(v_f_list)?;
    let envs = speeds
        .iter()
        .map(|&v| training_env.with_v_f(v))
        .collect::<Result<Vec<_>>>()?;
    let e = evaluate(model, training_env, &envs, grid, options, &solved(profile, grid))?;
    assemble(training_env, e, options)
}

/// [`certification_sweep`] against precomputed reference fields, one per
/// environment, all on one grid. `training_truth` supplies the training
/// environment (and its loss for the default normalization).
pub fn certify_against_fields(
    model: &dyn DensityModel,
    training_truth: &DensityField,
    truths: &[DensityField],
    options: &SweepOptions,
) -> Result<CertificationReport> {
    let grid = training_truth.grid();
    for t in truths {
        training_truth.check_same_grid(t)?;
    }
    let speeds = sorted_speeds(&truths.iter().map(|t| t.env().v_f()).collect::<Vec<_>>())?;
    let envs: Vec<Environment> = speeds
        .iter()
        .map(|&v| {
            *truths
                .iter()
                .find(|t| t.env().v_f() == v)
                .expect("speed taken from truths")
                .env()
        })
        .collect();
    let lookup = |env: &Environment| -> Result<Cow<'_, DensityField>> {
        std::iter::once(training_truth)
            .chain(truths)
            .find(|t| t.env() == env)
            .map(Cow::Borrowed)
            .ok_or_else(|| Error::Metric(format!("no reference field for v_f = {}", env.v_f())))
    };
    let e = evaluate(model, training_truth.env(), &envs, grid, options, &lookup)?;
    assemble(training_truth.env(), e, options)
}

//! Warm-start refinement of a model for a shifted environment.

use crate::error::{Error, Result};
use crate::nn::{mse_loss, train_from, MlpParams, SampleSet, TrainConfig, TrainReport};

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub train: TrainReport,
    /// MSE of the starting model on the merged samples.
    pub initial_mse: f64,
    /// True when training did not improve on the starting model, which is
    /// then returned unchanged.
    pub kept_original: bool,
}

/// Continues training `model` on `old_samples` merged with
/// `new_env_samples` (new observations win where both cover a node).
/// Never returns parameters with a higher merged-sample MSE than `model`.
pub fn refine(
    model: &MlpParams,
    old_samples: &SampleSet,
    new_env_samples: &SampleSet,
    budget: &TrainConfig,
) -> Result<(MlpParams, RefineReport)> {
    if new_env_samples.is_empty() {
        return Err(Error::InvalidSamples(
            "refinement needs samples from the new environment".into(),
        ));
    }
    let merged = old_samples.union(new_env_samples)?;
    let initial_mse = mse_loss(model, &merged)?;
    let (params, mut train) = train_from(model.clone(), &merged, budget)?;
    if train.final_mse > initial_mse {
        log::info!(
            "refinement ended at MSE {} above the starting {}; keeping the original model",
            train.final_mse,
            initial_mse
        );
        train.final_mse = initial_mse;
        return Ok((
            model.clone(),
            RefineReport {
                train,
                initial_mse,
                kept_original: true,
            },
        ));
    }
    Ok((
        params,
        RefineReport {
            train,
            initial_mse,
            kept_original: false,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::rel_l2_error;
    use crate::lwr::{lax_hopf_solve, DensityField, Environment, Grid, PiecewiseConstantProfile};
    use crate::nn::{layer_sizes, sample_dataset, train};

    fn grid() -> Grid {
        Grid::new(0.0, 1000.0, 20.0, 50.0, 1.0).unwrap()
    }

    fn truth(v_f: f64) -> DensityField {
        let env = Environment::paper().with_v_f(v_f).unwrap();
        lax_hopf_solve(&PiecewiseConstantProfile::paper(), &env, &grid())
            .unwrap()
            .1
    }

    fn small(adam: usize, lbfgs: usize) -> TrainConfig {
        TrainConfig {
            layer_sizes: layer_sizes(2, 12),
            adam_iterations: adam,
            lbfgs_iterations: lbfgs,
            seed: 3,
            ..TrainConfig::paper()
        }
    }

    fn trained() -> (MlpParams, SampleSet, TrainReport) {
        let samples = sample_dataset(&truth(25.0), 600, 1).unwrap();
        let (model, report) = train(&samples, &small(200, 300)).unwrap();
        (model, samples, report)
    }

    #[test]
    fn zero_budget_leaves_model_unchanged() {
        let (model, samples, _) = trained();
        let new = sample_dataset(&truth(35.0), 200, 2).unwrap();
        let (out, report) = refine(&model, &samples, &new, &small(0, 0)).unwrap();
        assert_eq!(out, model);
        assert_eq!(report.train.final_mse, report.initial_mse);
    }

    #[test]
    fn same_samples_do_not_worsen_fit() {
        let (model, samples, original) = trained();
        let (_, report) = refine(&model, &samples, &samples, &small(100, 100)).unwrap();
        assert_eq!(report.initial_mse, original.final_mse);
        assert!(report.train.final_mse <= original.final_mse + 1e-9);
    }

    #[test]
    fn empty_new_samples_rejected() {
        let (model, samples, _) = trained();
        let empty = SampleSet::new(Vec::new(), Environment::paper(), grid(), 0).unwrap();
        assert!(refine(&model, &samples, &empty, &small(1, 1)).is_err());
    }

    #[test]
    fn full_grid_refinement_reduces_shifted_error() {
        let (model, samples, _) = trained();
        let target = truth(35.0);
        let env = *target.env();
        let before = rel_l2_error(&model.evaluate_on_grid(&grid(), &env).unwrap(), &target).unwrap();
        let new = SampleSet::full_grid(&target).unwrap();
        let (refined, _) = refine(&model, &samples, &new, &small(300, 500)).unwrap();
        let after = rel_l2_error(&refined.evaluate_on_grid(&grid(), &env).unwrap(), &target).unwrap();
        assert!(after < before, "{after} vs {before}");
    }
}

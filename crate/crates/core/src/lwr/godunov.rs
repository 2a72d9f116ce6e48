//! First-order Godunov finite-volume solver.
//!
//! Independent of the Lax-Hopf route; used to cross-check it. Cells are
//! centred on the grid's space nodes (`[x_i - dx/2, x_i + dx/2]`), so output
//! needs no resampling. The computational domain is padded on both sides by
//! the domain of dependence `v_f * t_max` and closed with transmissive ghost
//! cells, which reproduces whole-line evolution inside the grid.

use super::fundamental::godunov_flux_unchecked;
use super::{DensityField, Environment, Grid, PiecewiseConstantProfile};
use crate::error::Result;

/// Target Courant number for internal sub-steps.
pub const CFL_TARGET: f64 = 0.9;

/// Smallest number of equal sub-steps per output step with
/// `v_f * dt_sub / dx <= CFL_TARGET`.
pub fn substeps_per_output(env: &Environment, grid: &Grid) -> usize {
    let ratio = env.v_f() * grid.dt() / (CFL_TARGET * grid.dx());
    ((ratio - 1e-12).ceil() as usize).max(1)
}

pub fn godunov_solve(profile: &PiecewiseConstantProfile, env: &Environment, grid: &Grid) -> Result<DensityField> {
    profile.validate_for(env, grid)?;
    let (nx, nt, dx) = (grid.nx(), grid.nt(), grid.dx());
    let pad = (env.v_f() * grid.t_max() / dx).ceil() as usize + 2;
    let ncell = nx + 2 * pad;
    let x_first = grid.x_min() - pad as f64 * dx;

    let mut rho: Vec<f64> = (0..ncell)
        .map(|j| {
            let xc = x_first + j as f64 * dx;
            profile.average_over(xc - 0.5 * dx, xc + 0.5 * dx)
        })
        .collect();
    let mut fluxes = vec![0.0; ncell + 1];

    let substeps = substeps_per_output(env, grid);
    let ratio = grid.dt() / substeps as f64 / dx;

    let mut out = vec![0.0; nx * nt];
    let record = |out: &mut [f64], rho: &[f64], n: usize| {
        for i in 0..nx {
            out[i * nt + n] = rho[pad + i];
        }
    };
    record(&mut out, &rho, 0);

    for n in 1..nt {
        for _ in 0..substeps {
            fluxes[0] = godunov_flux_unchecked(rho[0], rho[0], env);
            for j in 1..ncell {
                fluxes[j] = godunov_flux_unchecked(rho[j - 1], rho[j], env);
            }
            fluxes[ncell] = godunov_flux_unchecked(rho[ncell - 1], rho[ncell - 1], env);
            for j in 0..ncell {
                rho[j] -= ratio * (fluxes[j + 1] - fluxes[j]);
            }
        }
        record(&mut out, &rho, n);
    }

    DensityField::new(*grid, *env, out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::lwr::lax_hopf_solve;

    #[test]
    fn substep_counts() {
        let g = Grid::paper();
        assert_eq!(substeps_per_output(&Environment::paper(), &g), 2);
        assert_eq!(substeps_per_output(&Environment::new(5.0, 0.15).unwrap(), &g), 1);
        assert_eq!(substeps_per_output(&Environment::new(45.0, 0.15).unwrap(), &g), 3);
        // ratio exactly 1 needs a single step
        assert_eq!(substeps_per_output(&Environment::new(18.0, 0.15).unwrap(), &g), 1);
    }

    #[test]
    fn constant_state_is_preserved() {
        let grid = Grid::new(0.0, 200.0, 2.0, 10.0, 0.1).unwrap();
        let p = PiecewiseConstantProfile::constant(0.0, 200.0, 0.06).unwrap();
        let f = godunov_solve(&p, &Environment::paper(), &grid).unwrap();
        assert!(f.values().iter().all(|&r| (r - 0.06).abs() < 1e-15));
    }

    #[test]
    fn rarefaction_center_close_to_fan_value() {
        let env = Environment::paper();
        let grid = Grid::new(-300.0, 300.0, 2.0, 10.0, 0.1).unwrap();
        let p = PiecewiseConstantProfile::riemann(-300.0, 0.0, 300.0, 0.13, 0.06).unwrap();
        let f = godunov_solve(&p, &env, &grid).unwrap();
        let v = f.get(150, grid.nt() - 1);
        assert!((v - 0.075).abs() <= 0.005, "{v}");
    }

    #[test]
    fn range_is_preserved() {
        let env = Environment::paper();
        let grid = Grid::new(0.0, 1000.0, 4.0, 50.0, 0.2).unwrap();
        let f = godunov_solve(&PiecewiseConstantProfile::paper(), &env, &grid).unwrap();
        assert!(f.min() >= 0.03 - 1e-9 && f.max() <= 0.13 + 1e-9);
    }

    #[test]
    fn agrees_with_lax_hopf_on_coarse_grid() {
        let env = Environment::paper();
        let grid = Grid::new(0.0, 1000.0, 4.0, 50.0, 0.2).unwrap();
        let p = PiecewiseConstantProfile::paper();
        let g = godunov_solve(&p, &env, &grid).unwrap();
        let (_, lh) = lax_hopf_solve(&p, &env, &grid).unwrap();
        let d = g.mean_abs_diff(&lh).unwrap();
        assert!(d < 0.008, "{d}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn solution_stays_in_profile_range(
            values in proptest::collection::vec(0.0f64..=0.15, 1..5),
            v_f in 5.0f64..45.0,
        ) {
            let width = 400.0 / values.len() as f64;
            let breaks: Vec<f64> = (0..=values.len()).map(|k| k as f64 * width).collect();
            let p = PiecewiseConstantProfile::new(breaks, values.clone()).unwrap();
            let grid = Grid::new(0.0, 400.0, 4.0, 20.0, 0.5).unwrap();
            let f = godunov_solve(&p, &Environment::new(v_f, 0.15).unwrap(), &grid).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(f.min() >= lo - 1e-9 && f.max() <= hi + 1e-9);
        }
    }
}

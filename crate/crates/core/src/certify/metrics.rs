//! Field-level error scores.

use crate::error::{Error, Result};
use crate::lwr::{flux_unchecked, DensityField, Environment};

/// `sqrt(sum (rho - rho_hat)^2) / sqrt(sum rho^2)` over all nodes.
pub fn rel_l2_error(predicted: &DensityField, truth: &DensityField) -> Result<f64> {
    rel_l2_error_on(predicted, truth, None)
}

/// [`rel_l2_error`] restricted to the space indices in `rows` when given.
pub fn rel_l2_error_on(predicted: &DensityField, truth: &DensityField, rows: Option<&[usize]>) -> Result<f64> {
    predicted.check_same_grid(truth)?;
    let nt = truth.grid().nt();
    let (mut num, mut den) = (0.0, 0.0);
    let mut add = |range: std::ops::Range<usize>| {
        for (p, t) in predicted.values()[range.clone()].iter().zip(&truth.values()[range]) {
            num += (t - p) * (t - p);
            den += t * t;
        }
    };
    match rows {
        None => add(0..truth.values().len()),
        Some(rows) => {
            for &i in rows {
                add(i * nt..(i + 1) * nt);
            }
        }
    }
    if den == 0.0 {
        return Err(Error::Metric("reference field has zero norm".into()));
    }
    Ok(num.sqrt() / den.sqrt())
}

/// Mean squared discrete residual of `rho_t + Q(rho)_x = 0` under `env`'s
/// flux, with central differences at interior nodes.
pub fn pde_residual_loss(field: &DensityField, env: &Environment) -> Result<f64> {
    pde_residual_loss_on(field, env, None)
}

/// [`pde_residual_loss`] restricted to interior space indices in `rows`.
pub fn pde_residual_loss_on(field: &DensityField, env: &Environment, rows: Option<&[usize]>) -> Result<f64> {
    let g = field.grid();
    let (nx, nt) = (g.nx(), g.nt());
    if nx < 3 || nt < 3 {
        return Err(Error::Metric(format!(
            "residual needs at least 3x3 nodes, grid has {nx}x{nt}"
        )));
    }
    let (inv_2dx, inv_2dt) = (0.5 / g.dx(), 0.5 / g.dt());
    let rho = field.values();
    let residual_row = |i: usize| -> f64 {
        let mut acc = 0.0;
        for n in 1..nt - 1 {
            let dt = (rho[i * nt + n + 1] - rho[i * nt + n - 1]) * inv_2dt;
            let dx =
                (flux_unchecked(rho[(i + 1) * nt + n], env) - flux_unchecked(rho[(i - 1) * nt + n], env)) * inv_2dx;
            let r = dt + dx;
            acc += r * r;
        }
        acc
    };
    let (sum, count) = match rows {
        None => ((1..nx - 1).map(residual_row).sum::<f64>(), (nx - 2) * (nt - 2)),
        Some(rows) => {
            let interior: Vec<usize> = rows.iter().copied().filter(|&i| i >= 1 && i + 1 < nx).collect();
            if interior.is_empty() {
                return Err(Error::Metric("no interior sensor rows".into()));
            }
            (
                interior.iter().map(|&i| residual_row(i)).sum(),
                interior.len() * (nt - 2),
            )
        }
    };
    Ok(sum / count as f64)
}

/// Fraction of nodes with `rho < 0` or `rho > rho_m`.
pub fn bound_violation_rate(predicted: &DensityField, env: &Environment) -> f64 {
    let v = predicted.values();
    let bad = v.iter().filter(|&&r| r < 0.0 || r > env.rho_m()).count();
    bad as f64 / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lwr::{flux_derivative_unchecked, lax_hopf_solve, Grid, PiecewiseConstantProfile};
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(0.0, 20.0, 2.0, 1.0, 0.1).unwrap()
    }

    fn field(f: impl FnMut(f64, f64) -> f64) -> DensityField {
        DensityField::from_fn(grid(), Environment::paper(), f).unwrap()
    }

    #[test]
    fn rel_l2_examples() {
        let truth = field(|x, t| 0.02 + 0.001 * x + 0.01 * t);
        assert_eq!(rel_l2_error(&truth, &truth).unwrap(), 0.0);
        let zero = field(|_, _| 0.0);
        assert!((rel_l2_error(&zero, &truth).unwrap() - 1.0).abs() < 1e-15);
        let double = field(|x, t| 2.0 * (0.02 + 0.001 * x + 0.01 * t));
        assert!((rel_l2_error(&double, &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!(rel_l2_error(&truth, &zero).is_err());
        let other =
            DensityField::constant(Grid::new(0.0, 22.0, 2.0, 1.0, 0.1).unwrap(), Environment::paper(), 0.1).unwrap();
        assert!(rel_l2_error(&other, &truth).is_err());
    }

    #[test]
    fn rel_l2_on_rows() {
        let truth = field(|_, _| 0.1);
        let pred = field(|x, _| if x == 4.0 { 0.2 } else { 0.1 });
        assert_eq!(rel_l2_error_on(&pred, &truth, Some(&[0, 1])).unwrap(), 0.0);
        assert!((rel_l2_error_on(&pred, &truth, Some(&[2])).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_of_constant_is_zero() {
        for v_f in [5.0, 25.0, 45.0] {
            let env = Environment::new(v_f, 0.15).unwrap();
            assert_eq!(pde_residual_loss(&field(|_, _| 0.075), &env).unwrap(), 0.0);
        }
    }

    #[test]
    fn residual_of_linear_ramp_closed_form() {
        let env = Environment::paper();
        let (a, b) = (0.03, 0.004);
        let f = field(|x, _| a + b * x);
        let g = grid();
        let mut expected = 0.0;
        for i in 1..g.nx() - 1 {
            let r = b * flux_derivative_unchecked(a + b * g.x(i), &env);
            expected += r * r * (g.nt() - 2) as f64;
        }
        expected /= ((g.nx() - 2) * (g.nt() - 2)) as f64;
        let got = pde_residual_loss(&f, &env).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    }

    #[test]
    fn residual_needs_three_nodes() {
        let g = Grid::new(0.0, 2.0, 2.0, 1.0, 0.1).unwrap();
        let f = DensityField::constant(g, Environment::paper(), 0.1).unwrap();
        assert!(pde_residual_loss(&f, &Environment::paper()).is_err());
    }

    #[test]
    fn residual_shrinks_with_resolution_on_smooth_solution() {
        // Inside the rarefaction fan the solution is smooth; compare two
        // resolutions over a window that stays inside the fan.
        let env = Environment::paper();
        let profile = PiecewiseConstantProfile::riemann(-400.0, 0.0, 400.0, 0.13, 0.02).unwrap();
        let loss = |dx: f64, dt: f64| {
            let g = Grid::new(-20.0, 20.0, dx, 20.0, dt).unwrap();
            let (_, f) = lax_hopf_solve(&profile, &env, &g).unwrap();
            // drop the first two seconds, while the fan is narrower than the window
            let nt = g.nt();
            let skip = (2.0 / dt).round() as usize;
            let rows: Vec<f64> = (0..g.nx())
                .flat_map(|i| (skip..nt).map(move |n| (i, n)))
                .map(|(i, n)| f.get(i, n))
                .collect();
            let g2 = Grid::new(-20.0, 20.0, dx, g.t(nt - 1) - g.t(skip), dt).unwrap();
            let f2 = DensityField::new(g2, env, rows).unwrap();
            pde_residual_loss(&f2, &env).unwrap()
        };
        let coarse = loss(2.0, 0.2);
        let fine = loss(1.0, 0.1);
        assert!(coarse < 1e-8, "{coarse}");
        assert!(fine < coarse / 3.0, "{fine} vs {coarse}");
    }

    #[test]
    fn bound_violation_examples() {
        let env = Environment::paper();
        let g = Grid::new(0.0, 18.0, 2.0, 0.9, 0.1).unwrap();
        assert_eq!(g.node_count(), 100);
        let one = DensityField::from_fn(g, env, |x, t| if x == 0.0 && t == 0.0 { -0.01 } else { 0.05 }).unwrap();
        assert!((bound_violation_rate(&one, &env) - 0.01).abs() < 1e-15);
        let all = DensityField::constant(g, env, 0.25).unwrap();
        assert_eq!(bound_violation_rate(&all, &env), 1.0);
        let (_, solved) = lax_hopf_solve(
            &PiecewiseConstantProfile::paper(),
            &env,
            &Grid::new(0.0, 1000.0, 10.0, 50.0, 1.0).unwrap(),
        )
        .unwrap();
        assert_eq!(bound_violation_rate(&solved, &env), 0.0);
    }

    proptest! {
        #[test]
        fn rel_l2_invariant_under_joint_scaling(
            vals in proptest::collection::vec(0.001f64..0.15, 11 * 11),
            noise in proptest::collection::vec(-0.01f64..0.01, 11 * 11),
            k in 0.1f64..10.0,
        ) {
            let g = grid();
            let env = Environment::paper();
            let truth = DensityField::new(g, env, vals.clone()).unwrap();
            let pred: Vec<f64> = vals.iter().zip(&noise).map(|(v, n)| v + n).collect();
            let pred = DensityField::new(g, env, pred).unwrap();
            let base = rel_l2_error(&pred, &truth).unwrap();
            let st = DensityField::new(g, env, truth.values().iter().map(|v| v * k).collect()).unwrap();
            let sp = DensityField::new(g, env, pred.values().iter().map(|v| v * k).collect()).unwrap();
            let scaled = rel_l2_error(&sp, &st).unwrap();
            prop_assert!((base - scaled).abs() <= 1e-12 * base.max(1e-300));
            prop_assert!(base >= 0.0);
            prop_assert_eq!(base == 0.0, noise.iter().all(|&n| n == 0.0));
        }
    }
}

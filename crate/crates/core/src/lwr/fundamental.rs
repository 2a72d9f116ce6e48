//! Greenshields fundamental diagram.
//!
//! Speed falls linearly with density, `V(rho) = v_f (1 - rho/rho_m)`, so the
//! flux `Q(rho) = rho V(rho)` is a concave parabola vanishing at 0 and `rho_m`.
//! The checked functions reject densities outside `[0, rho_m]`; the
//! `*_unchecked` forms are used on hot paths and on model output, which may
//! legitimately leave the physical range.

use super::Environment;
use crate::error::{Error, Result};

fn check_density(rho: f64, env: &Environment) -> Result<()> {
    if rho.is_finite() && (0.0..=env.rho_m()).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Domain(format!("density {rho} outside [0, {}]", env.rho_m())))
    }
}

/// Greenshields speed in m/s.
pub fn velocity(rho: f64, env: &Environment) -> Result<f64> {
    check_density(rho, env)?;
    Ok(env.v_f() * (1.0 - rho / env.rho_m()))
}

/// Flow rate in veh/s.
pub fn flux(rho: f64, env: &Environment) -> Result<f64> {
    check_density(rho, env)?;
    Ok(flux_unchecked(rho, env))
}

/// Characteristic speed `Q'(rho)` in m/s.
pub fn flux_derivative(rho: f64, env: &Environment) -> Result<f64> {
    check_density(rho, env)?;
    Ok(flux_derivative_unchecked(rho, env))
}

/// Convex transform of the flux, `Q*(u) = rho_m (v_f - u)^2 / (4 v_f)`,
/// defined for `u` in `[-v_f, v_f]`. This is the running cost in the
/// variational (Lax-Hopf) representation of the solution.
pub fn legendre_dual(u: f64, env: &Environment) -> Result<f64> {
    if !(u.is_finite() && u.abs() <= env.v_f()) {
        return Err(Error::Domain(format!("speed {u} outside [-{0}, {0}]", env.v_f())));
    }
    Ok(legendre_dual_unchecked(u, env))
}

/// Density whose characteristic speed is `u`, i.e. the inverse of `Q'`.
pub fn density_for_speed(u: f64, env: &Environment) -> f64 {
    env.rho_m() * (env.v_f() - u) / (2.0 * env.v_f())
}

#[inline]
pub fn flux_unchecked(rho: f64, env: &Environment) -> f64 {
    rho * env.v_f() * (1.0 - rho / env.rho_m())
}

#[inline]
pub fn flux_derivative_unchecked(rho: f64, env: &Environment) -> f64 {
    env.v_f() * (1.0 - 2.0 * rho / env.rho_m())
}

#[inline]
pub(crate) fn legendre_dual_unchecked(u: f64, env: &Environment) -> f64 {
    let d = env.v_f() - u;
    env.rho_m() * d * d / (4.0 * env.v_f())
}

/// Demand: the most flow a cell at density `a` can send downstream.
#[cfg(test)]
fn demand(a: f64, env: &Environment) -> f64 {
    if a <= env.critical_density() {
        flux_unchecked(a, env)
    } else {
        env.capacity()
    }
}

/// Supply: the most flow a cell at density `b` can accept from upstream.
#[cfg(test)]
fn supply(b: f64, env: &Environment) -> f64 {
    if b <= env.critical_density() {
        env.capacity()
    } else {
        flux_unchecked(b, env)
    }
}

/// Same as `min(demand, supply)` but branch-resolved, so that `F(a, a)` is
/// bitwise `Q(a)` even where rounding puts `Q(a)` an ulp above capacity.
#[inline]
pub(crate) fn godunov_flux_unchecked(rho_left: f64, rho_right: f64, env: &Environment) -> f64 {
    let rho_c = env.critical_density();
    match (rho_left <= rho_c, rho_right <= rho_c) {
        (true, true) => flux_unchecked(rho_left, env),
        (false, false) => flux_unchecked(rho_right, env),
        (true, false) => flux_unchecked(rho_left, env).min(flux_unchecked(rho_right, env)),
        (false, true) => env.capacity(),
    }
}

/// Exact Riemann interface flux for the concave flux, in demand/supply form:
/// `F = min(D(rho_left), S(rho_right))`.
pub fn godunov_flux(rho_left: f64, rho_right: f64, env: &Environment) -> Result<f64> {
    check_density(rho_left, env)?;
    check_density(rho_right, env)?;
    Ok(godunov_flux_unchecked(rho_left, rho_right, env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env() -> Environment {
        Environment::paper()
    }

    #[test]
    fn velocity_examples() {
        assert_eq!(velocity(0.0, &env()).unwrap(), 25.0);
        assert_eq!(velocity(0.15, &env()).unwrap(), 0.0);
        assert!((velocity(0.075, &env()).unwrap() - 12.5).abs() < 1e-12);
        assert!(velocity(-0.01, &env()).is_err());
        assert!(velocity(0.16, &env()).is_err());
    }

    #[test]
    fn flux_examples() {
        assert_eq!(flux(0.0, &env()).unwrap(), 0.0);
        assert!((flux(0.075, &env()).unwrap() - 0.9375).abs() < 1e-12);
        let expected = 0.13 * 25.0 * (1.0 - 0.13 / 0.15);
        assert!((flux(0.13, &env()).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.433_333_333_333).abs() < 1e-9);
        assert!(flux(f64::NAN, &env()).is_err());
    }

    #[test]
    fn flux_derivative_examples() {
        assert!(flux_derivative(0.075, &env()).unwrap().abs() < 1e-12);
        assert!((flux_derivative(0.13, &env()).unwrap() + 18.333_333_333_333).abs() < 1e-9);
        assert!((flux_derivative(0.03, &env()).unwrap() - 15.0).abs() < 1e-12);
        assert!(flux_derivative(0.2, &env()).is_err());
    }

    #[test]
    fn legendre_dual_examples() {
        assert_eq!(legendre_dual(25.0, &env()).unwrap(), 0.0);
        assert!((legendre_dual(0.0, &env()).unwrap() - 0.9375).abs() < 1e-12);
        assert!((legendre_dual(-25.0, &env()).unwrap() - 3.75).abs() < 1e-12);
        assert!(legendre_dual(25.5, &env()).is_err());
        assert!(legendre_dual(-30.0, &env()).is_err());
    }

    #[test]
    fn godunov_flux_examples() {
        assert!((godunov_flux(0.03, 0.03, &env()).unwrap() - 0.6).abs() < 1e-12);
        let q13 = 0.13 * 25.0 * (1.0 - 0.13 / 0.15);
        assert!((godunov_flux(0.03, 0.13, &env()).unwrap() - q13).abs() < 1e-12);
        assert!((godunov_flux(0.13, 0.03, &env()).unwrap() - 0.9375).abs() < 1e-12);
        assert!(godunov_flux(0.03, 0.151, &env()).is_err());
    }

    proptest! {
        #[test]
        fn godunov_flux_is_consistent(a in 0.0f64..=0.15) {
            let e = env();
            prop_assert_eq!(godunov_flux(a, a, &e).unwrap(), flux(a, &e).unwrap());
        }

        #[test]
        fn godunov_flux_matches_demand_supply(a in 0.0f64..=0.15, b in 0.0f64..=0.15) {
            let e = env();
            let reference = demand(a, &e).min(supply(b, &e));
            prop_assert!((godunov_flux(a, b, &e).unwrap() - reference).abs() < 1e-15);
        }

        #[test]
        fn godunov_flux_is_bounded(a in 0.0f64..=0.15, b in 0.0f64..=0.15) {
            let e = env();
            let f = godunov_flux(a, b, &e).unwrap();
            prop_assert!(f >= 0.0 && f <= e.capacity() + 1e-15);
        }

        #[test]
        fn legendre_identity(rho in 0.0f64..=0.15, v_f in 5.0f64..50.0) {
            // Q*(Q'(rho)) + rho Q'(rho) = Q(rho)
            let e = Environment::new(v_f, 0.15).unwrap();
            let u = flux_derivative(rho, &e).unwrap();
            let lhs = legendre_dual(u, &e).unwrap() + rho * u;
            prop_assert!((lhs - flux(rho, &e).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn characteristic_speed_decreasing(a in 0.0f64..0.15, d in 1e-6f64..0.01) {
            let e = env();
            let b = (a + d).min(0.15);
            prop_assume!(b > a);
            prop_assert!(flux_derivative(b, &e).unwrap() < flux_derivative(a, &e).unwrap());
        }

        #[test]
        fn speed_inverse_roundtrip(rho in 0.0f64..=0.15) {
            let e = env();
            let u = flux_derivative_unchecked(rho, &e);
            prop_assert!((density_for_speed(u, &e) - rho).abs() < 1e-15);
        }
    }
}

//! Exact entropy solution via the Lax-Hopf (min-plus) formula.
//!
//! The Moskowitz function satisfies
//!
//! ```text
//! M(x, t) = min_{u in [-v_f, v_f]} { M0(x - t u) + t Q*(u) }
//! ```
//!
//! For piecewise-constant initial density `M0` is piecewise linear, and on
//! each linear piece the objective is a convex parabola in `u`. The minimum is
//! therefore attained at one of finitely many candidates: the stationary point
//! `u = Q'(rho_k)` of piece `k` (if it lands inside that piece), or a kink
//! `u = (x - x_k) / t` of `M0`. Both families are evaluated exactly.

use super::fundamental::{density_for_speed, flux_derivative_unchecked, legendre_dual_unchecked};
use super::{DensityField, Environment, Grid, MoskowitzField, PiecewiseConstantProfile};
use crate::error::Result;

/// Candidates closer than this in `M` are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Initial cumulative count `M0(x) = -int_{x_ref}^{x} rho(y, 0) dy`, piecewise
/// linear with slope `-rho_k` on piece `k` and constant extension outside the
/// profile's breakpoints.
#[derive(Debug, Clone)]
pub struct InitialMoskowitz {
    profile: PiecewiseConstantProfile,
    /// `M0` at each breakpoint.
    at_breakpoints: Vec<f64>,
}

impl InitialMoskowitz {
    /// Anchors `M0(x_ref) = 0`.
    pub fn new(profile: &PiecewiseConstantProfile, x_ref: f64) -> Self {
        let bp = profile.breakpoints();
        let values = profile.values();
        let mut at_breakpoints = Vec::with_capacity(bp.len());
        let mut acc = 0.0;
        at_breakpoints.push(acc);
        for k in 0..values.len() {
            acc -= values[k] * (bp[k + 1] - bp[k]);
            at_breakpoints.push(acc);
        }
        let mut m0 = Self {
            profile: profile.clone(),
            at_breakpoints,
        };
        let shift = m0.eval(x_ref);
        for m in &mut m0.at_breakpoints {
            *m -= shift;
        }
        m0
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.profile.piece_index(x);
        self.eval_on_piece(k, x)
    }

    #[inline]
    fn eval_on_piece(&self, k: usize, x: f64) -> f64 {
        let bp = self.profile.breakpoints();
        self.at_breakpoints[k] - self.profile.values()[k] * (x - bp[k])
    }

    pub fn profile(&self) -> &PiecewiseConstantProfile {
        &self.profile
    }
}

/// `M0` for `profile`, anchored at the grid's left edge.
pub fn initial_moskowitz(
    profile: &PiecewiseConstantProfile,
    env: &Environment,
    grid: &Grid,
) -> Result<InitialMoskowitz> {
    profile.validate_for(env, grid)?;
    Ok(InitialMoskowitz::new(profile, grid.x_min()))
}

/// Value of the Lax-Hopf minimum and the density it implies at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaxHopfPoint {
    pub moskowitz: f64,
    pub density: f64,
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    density: f64,
}

impl Best {
    fn offer(&mut self, value: f64, density: f64) {
        let gap = value - self.value;
        if gap < -TIE_TOLERANCE || (gap <= TIE_TOLERANCE && density > self.density) {
            self.value = value;
            self.density = density;
        }
    }
}

/// Evaluates the solution at a single point with `t > 0`.
pub fn lax_hopf_point(m0: &InitialMoskowitz, env: &Environment, x: f64, t: f64) -> LaxHopfPoint {
    debug_assert!(t > 0.0);
    let profile = m0.profile();
    let bp = profile.breakpoints();
    let values = profile.values();
    let last = values.len() - 1;
    let mut best = Best {
        value: f64::INFINITY,
        density: f64::NEG_INFINITY,
    };

    for (k, &rho) in values.iter().enumerate() {
        let u = flux_derivative_unchecked(rho, env);
        let y = x - t * u;
        let inside_left = k == 0 || y >= bp[k];
        let inside_right = k == last || y <= bp[k + 1];
        if inside_left && inside_right {
            best.offer(m0.eval_on_piece(k, y) + t * legendre_dual_unchecked(u, env), rho);
        }
    }

    // Kinks only at interior breakpoints: the extension is constant beyond
    // the outer ones.
    for k in 1..=last {
        let u = (x - bp[k]) / t;
        if u.abs() > env.v_f() {
            continue;
        }
        let (lo, hi) = if values[k - 1] < values[k] {
            (values[k - 1], values[k])
        } else {
            (values[k], values[k - 1])
        };
        let density = density_for_speed(u, env).clamp(lo, hi);
        best.offer(m0.at_breakpoints[k] + t * legendre_dual_unchecked(u, env), density);
    }

    LaxHopfPoint {
        moskowitz: best.value,
        density: best.density,
    }
}

/// Exact solution on every node of `grid`. The profile is extended
/// constantly beyond its breakpoints (free whole-line evolution); the `t = 0`
/// column is the profile itself.
pub fn lax_hopf_solve(
    profile: &PiecewiseConstantProfile,
    env: &Environment,
    grid: &Grid,
) -> Result<(MoskowitzField, DensityField)> {
    let m0 = initial_moskowitz(profile, env, grid)?;
    let (nx, nt) = (grid.nx(), grid.nt());
    let mut counts = vec![0.0; nx * nt];
    let mut rho = vec![0.0; nx * nt];
    for i in 0..nx {
        let x = grid.x(i);
        let row = i * nt;
        counts[row] = m0.eval(x);
        rho[row] = profile.value_at(x);
        for n in 1..nt {
            let p = lax_hopf_point(&m0, env, x, grid.t(n));
            counts[row + n] = p.moskowitz;
            rho[row + n] = p.density;
        }
    }
    let field = DensityField::new(*grid, *env, rho)?;
    Ok((MoskowitzField::new(*grid, *env, counts), field))
}

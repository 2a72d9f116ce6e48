use crate::error::{Error, Result};

const INTEGRAL_RTOL: f64 = 1e-9;

/// Fundamental-diagram parameters of one operational setting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    v_f: f64,
    rho_m: f64,
}

impl Environment {
    pub fn new(v_f: f64, rho_m: f64) -> Result<Self> {
        if !(v_f.is_finite() && v_f > 0.0) {
            return Err(Error::Domain(format!("free-flow speed must be > 0, got {v_f}")));
        }
        if !(rho_m.is_finite() && rho_m > 0.0) {
            return Err(Error::Domain(format!("jam density must be > 0, got {rho_m}")));
        }
        Ok(Self { v_f, rho_m })
    }

    /// v_f = 25 m/s, rho_m = 0.15 veh/m.
    pub fn paper() -> Self {
        Self { v_f: 25.0, rho_m: 0.15 }
    }

    /// Same jam density, different free-flow speed.
    pub fn with_v_f(&self, v_f: f64) -> Result<Self> {
        Self::new(v_f, self.rho_m)
    }

    pub fn v_f(&self) -> f64 {
        self.v_f
    }

    pub fn rho_m(&self) -> f64 {
        self.rho_m
    }

    /// Density of maximum flow, `rho_m / 2`.
    pub fn critical_density(&self) -> f64 {
        0.5 * self.rho_m
    }

    /// Capacity flow `v_f * rho_m / 4`.
    pub fn capacity(&self) -> f64 {
        0.25 * self.v_f * self.rho_m
    }
}

/// Rectangular space-time lattice. Nodes sit at `x_min + i*dx` and `n*dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    dx: f64,
    t_max: f64,
    dt: f64,
    nx: usize,
    nt: usize,
}

fn integral_count(span: f64, step: f64, what: &str) -> Result<usize> {
    let ratio = span / step;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > INTEGRAL_RTOL * ratio.abs().max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "{what} step does not divide the span ({span} / {step} = {ratio})"
        )));
    }
    Ok(rounded as usize + 1)
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, dx: f64, t_max: f64, dt: f64) -> Result<Self> {
        let all = [x_min, x_max, dx, t_max, dt];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid parameter".into()));
        }
        if x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "x_max ({x_max}) must exceed x_min ({x_min})"
            )));
        }
        if dx <= 0.0 || dt <= 0.0 {
            return Err(Error::InvalidGrid("dx and dt must be positive".into()));
        }
        if t_max <= 0.0 {
            return Err(Error::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        let nx = integral_count(x_max - x_min, dx, "space")?;
        let nt = integral_count(t_max, dt, "time")?;
        if nx < 2 || nt < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2x2 nodes, got {nx}x{nt}")));
        }
        Ok(Self {
            x_min,
            x_max,
            dx,
            t_max,
            dt,
            nx,
            nt,
        })
    }

    /// Default 500 x 500 lattice on the 1000 m / 50 s road segment:
    /// `x = 0, 2, ..., 998` and `t = 0, 0.1, ..., 49.9`.
    pub fn paper() -> Self {
        Self::new(0.0, 998.0, 2.0, 49.9, 0.1).expect("paper grid is valid")
    }

    /// Closed 501 x 501 lattice covering `[0, 1000] x [0, 50]`.
    pub fn paper_closed() -> Self {
        Self::new(0.0, 1000.0, 2.0, 50.0, 0.1).expect("closed paper grid is valid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn t_max(&self) -> f64 {
        self.t_max
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Number of space nodes (X_m).
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Number of time nodes (T_n).
    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.nt
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Flat index of node `(i, n)` in x-major order.
    #[inline]
    pub fn index(&self, i: usize, n: usize) -> usize {
        i * self.nt + n
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        let eps_x = 1e-9 * self.dx;
        let eps_t = 1e-9 * self.dt;
        x >= self.x_min - eps_x && x <= self.x_max + eps_x && t >= -eps_t && t <= self.t_max + eps_t
    }

    /// Same lattice with the space step halved.
    pub fn refined_x(&self) -> Result<Self> {
        Self::new(self.x_min, self.x_max, 0.5 * self.dx, self.t_max, self.dt)
    }
}

/// Piecewise-constant initial density. Piece `k` covers
/// `[breakpoints[k], breakpoints[k+1])`; the last piece also owns its right end.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantProfile {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantProfile {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidProfile("need at least two breakpoints".into()));
        }
        if values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidProfile(format!(
                "{} breakpoints define {} intervals but {} values were given",
                breakpoints.len(),
                breakpoints.len() - 1,
                values.len()
            )));
        }
        if breakpoints.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite breakpoint or value".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile("breakpoints must be strictly ascending".into()));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidProfile("densities must be nonnegative".into()));
        }
        Ok(Self { breakpoints, values })
    }

    /// 0.13 on [0,200], 0.06 on [200,500], 0.03 on [500,1000].
    pub fn paper() -> Self {
        Self::new(vec![0.0, 200.0, 500.0, 1000.0], vec![0.13, 0.06, 0.03]).expect("valid")
    }

    /// Two-state Riemann data with the jump at `x0`, spanning `[x_lo, x_hi]`.
    pub fn riemann(x_lo: f64, x0: f64, x_hi: f64, rho_left: f64, rho_right: f64) -> Result<Self> {
        Self::new(vec![x_lo, x0, x_hi], vec![rho_left, rho_right])
    }

    pub fn constant(x_lo: f64, x_hi: f64, rho: f64) -> Result<Self> {
        Self::new(vec![x_lo, x_hi], vec![rho])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pieces(&self) -> usize {
        self.values.len()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the piece containing `x`, with the first and last pieces
    /// extended to infinity.
    pub fn piece_index(&self, x: f64) -> usize {
        let interior = &self.breakpoints[1..self.breakpoints.len() - 1];
        interior.partition_point(|&b| b <= x)
    }

    /// Density at `x` under constant extension beyond the breakpoints.
    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.piece_index(x)]
    }

    /// Exact mean of the (extended) profile over `[a, b]`.
    pub fn average_over(&self, a: f64, b: f64) -> f64 {
        debug_assert!(b > a);
        let mut total = 0.0;
        let mut left = a;
        let mut k = self.piece_index(a);
        loop {
            let right = if k + 1 < self.values.len() {
                self.breakpoints[k + 1].min(b)
            } else {
                b
            };
            if right > left {
                total += self.values[k] * (right - left);
                left = right;
            }
            if left >= b || k + 1 >= self.values.len() {
                break;
            }
            k += 1;
        }
        total / (b - a)
    }

    /// Checks the density bounds for `env` and that the profile covers `grid`.
    pub fn validate_for(&self, env: &Environment, grid: &Grid) -> Result<()> {
        if let Some(v) = self.values.iter().find(|&&v| v > env.rho_m()) {
            return Err(Error::InvalidProfile(format!(
                "density {v} exceeds jam density {}",
                env.rho_m()
            )));
        }
        let lo = self.breakpoints[0];
        let hi = *self.breakpoints.last().unwrap();
        let tol = 1e-9 * grid.dx();
        if lo > grid.x_min() + tol || hi < grid.x_max() - tol {
            return Err(Error::InvalidProfile(format!(
                "profile [{lo}, {hi}] does not cover grid [{}, {}]",
                grid.x_min(),
                grid.x_max()
            )));
        }
        Ok(())
    }
}

/// Density samples on every node of a grid, stored x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    env: Environment,
    rho: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Grid, env: Environment, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != grid.node_count() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                rho.len()
            )));
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("density field contains non-finite values".into()));
        }
        Ok(Self { grid, env, rho })
    }

    pub fn from_fn(grid: Grid, env: Environment, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut rho = Vec::with_capacity(grid.node_count());
        for i in 0..grid.nx() {
            let x = grid.x(i);
            for n in 0..grid.nt() {
                rho.push(f(x, grid.t(n)));
            }
        }
        Self::new(grid, env, rho)
    }

    pub fn constant(grid: Grid, env: Environment, value: f64) -> Result<Self> {
        Self::new(grid, env, vec![value; grid.node_count()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    pub fn into_values(self) -> Vec<f64> {
        self.rho
    }

    #[inline]
    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.rho[self.grid.index(i, n)]
    }

    /// The same values reinterpreted under another environment.
    pub fn with_env(&self, env: Environment) -> Self {
        Self {
            grid: self.grid,
            env,
            rho: self.rho.clone(),
        }
    }

    pub fn min(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Mean absolute difference over all nodes.
    pub fn mean_abs_diff(&self, other: &DensityField) -> Result<f64> {
        self.check_same_grid(other)?;
        let total: f64 = self.rho.iter().zip(&other.rho).map(|(a, b)| (a - b).abs()).sum();
        Ok(total / self.rho.len() as f64)
    }

    pub(crate) fn check_same_grid(&self, other: &DensityField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{}x{} grid vs {}x{} grid",
                self.grid.nx(),
                self.grid.nt(),
                other.grid.nx(),
                other.grid.nt()
            )));
        }
        Ok(())
    }
}

/// Cumulative vehicle count N(x, t) on the nodes of a grid, x-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MoskowitzField {
    grid: Grid,
    env: Environment,
    counts: Vec<f64>,
}

impl MoskowitzField {
    pub(crate) fn new(grid: Grid, env: Environment, counts: Vec<f64>) -> Self {
        debug_assert_eq!(counts.len(), grid.node_count());
        Self { grid, env, counts }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn values(&self) -> &[f64] {
        &self.counts
    }

    #[inline]
    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.counts[self.grid.index(i, n)]
    }
}

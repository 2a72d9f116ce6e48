//! Adam and L-BFGS over flat parameter vectors.

use std::collections::VecDeque;

/// A differentiable scalar function of a flat vector.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Writes the gradient at `x` into `grad` and returns the value.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates and the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, config: &AdamConfig) {
    assert_eq!(params.len(), grad.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powf(state.step as f64);
    let c2 = 1.0 - b2.powf(state.step as f64);
    for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub max_iterations: usize,
    /// Stored curvature pairs.
    pub memory: usize,
    /// Stop once the gradient's Euclidean norm falls below this.
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub contraction: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    pub max_evaluations_per_iteration: usize,
    /// Pairs with `y.s <= curvature_epsilon * |y| |s|` are discarded.
    pub curvature_epsilon: f64,
    /// Record the objective every this many iterations (0 disables).
    pub history_every: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            memory: 10,
            gradient_tolerance: 1e-9,
            initial_step: 1.0,
            contraction: 0.5,
            armijo_c1: 1e-4,
            max_evaluations_per_iteration: 40,
            curvature_epsilon: 1e-12,
            history_every: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStop {
    IterationLimit,
    GradientTolerance,
    /// No step along the search direction satisfied the Armijo condition.
    LineSearchFailed,
    /// The objective or its gradient was not finite at the current point.
    NonFinite,
}

impl LbfgsStop {
    pub fn as_str(self) -> &'static str {
        match self {
            LbfgsStop::IterationLimit => "iteration limit",
            LbfgsStop::GradientTolerance => "gradient tolerance",
            LbfgsStop::LineSearchFailed => "line search failed",
            LbfgsStop::NonFinite => "non-finite objective",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub iterations: usize,
    pub evaluations: usize,
    pub final_value: f64,
    pub final_gradient_norm: f64,
    pub stop: LbfgsStop,
    /// `(iteration, value)` at the start of sampled iterations and at exit.
    pub history: Vec<(usize, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// `d = -H g` by the two-loop recursion, with `H0 = (s.y / y.y) I` from the
/// newest pair.
fn two_loop(pairs: &VecDeque<Pair>, g: &[f64], d: &mut [f64]) {
    d.iter_mut().zip(g).for_each(|(d, &g)| *d = -g);
    let mut alpha = vec![0.0; pairs.len()];
    for (k, p) in pairs.iter().enumerate().rev() {
        alpha[k] = p.rho * dot(&p.s, d);
        d.iter_mut().zip(&p.y).for_each(|(d, &y)| *d -= alpha[k] * y);
    }
    if let Some(p) = pairs.back() {
        let gamma = dot(&p.s, &p.y) / dot(&p.y, &p.y);
        d.iter_mut().for_each(|d| *d *= gamma);
    }
    for (k, p) in pairs.iter().enumerate() {
        let beta = p.rho * dot(&p.y, d);
        d.iter_mut().zip(&p.s).for_each(|(d, &s)| *d += (alpha[k] - beta) * s);
    }
}

/// Minimizes `f` from `x` in place with backtracking-Armijo L-BFGS.
/// Every accepted step strictly decreases `f`.
pub fn lbfgs_minimize(f: &impl Objective, x: &mut [f64], config: &LbfgsConfig) -> LbfgsOutcome {
    let n = x.len();
    assert_eq!(n, f.dim());
    let mut g = vec![0.0; n];
    let mut value = f.value_and_gradient(x, &mut g);
    let mut evaluations = 1;
    let mut history = Vec::new();
    let mut pairs: VecDeque<Pair> = VecDeque::with_capacity(config.memory);
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;

    let stop = loop {
        let gnorm = norm(&g);
        if !value.is_finite() || !gnorm.is_finite() {
            break LbfgsStop::NonFinite;
        }
        if config.history_every > 0 && iterations % config.history_every == 0 {
            history.push((iterations, value));
        }
        if gnorm < config.gradient_tolerance {
            break LbfgsStop::GradientTolerance;
        }
        if iterations >= config.max_iterations {
            break LbfgsStop::IterationLimit;
        }

        two_loop(&pairs, &g, &mut d);
        let mut slope = dot(&g, &d);
        if slope.is_nan() || slope >= 0.0 {
            pairs.clear();
            d.iter_mut().zip(&g).for_each(|(d, &g)| *d = -g);
            slope = -gnorm * gnorm;
        }

        let mut step = config.initial_step;
        let mut accepted = None;
        for _ in 0..config.max_evaluations_per_iteration {
            for ((xn, &xi), &di) in x_new.iter_mut().zip(x.iter()).zip(&d) {
                *xn = xi + step * di;
            }
            let trial = f.value_and_gradient(&x_new, &mut g_new);
            evaluations += 1;
            if trial.is_finite() && trial <= value + config.armijo_c1 * step * slope && trial < value {
                accepted = Some(trial);
                break;
            }
            step *= config.contraction;
        }
        let Some(trial) = accepted else {
            break LbfgsStop::LineSearchFailed;
        };

        let s: Vec<f64> = x_new.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > config.curvature_epsilon * norm(&s) * norm(&y) && sy > 0.0 {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            if config.memory > 0 {
                pairs.push_back(Pair { s, y, rho: 1.0 / sy });
            }
        } else {
            pairs.clear();
        }

        x.copy_from_slice(&x_new);
        std::mem::swap(&mut g, &mut g_new);
        value = trial;
        iterations += 1;
    };

    if config.history_every > 0 && history.last().map(|h| h.0) != Some(iterations) {
        history.push((iterations, value));
    }
    LbfgsOutcome {
        iterations,
        evaluations,
        final_value: value,
        final_gradient_norm: norm(&g),
        stop,
        history,
    }
}

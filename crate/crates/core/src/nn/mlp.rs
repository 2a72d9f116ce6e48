//! Dense multilayer perceptron `rho_hat(x, t; theta)`.
//!
//! Parameters live in one flat vector, layer by layer, each layer's weight
//! matrix (row-major, `out x in`) followed by its bias vector. Gradients use
//! the same layout, which is also the byte order of the model file.
//!
//! Batched evaluation works on fixed-size chunks of samples stored
//! feature-major (`features x chunk`), so each layer is one GEMM. Chunk
//! results are reduced in chunk order, which keeps losses and gradients
//! bit-identical no matter how many threads run the chunks.

use std::cell::RefCell;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::activation::Activation;
use crate::error::{Error, Result};
use crate::lwr::{DensityField, Environment, Grid};

pub const DEFAULT_HIDDEN_LAYERS: usize = 10;
pub const DEFAULT_HIDDEN_WIDTH: usize = 40;

/// Samples per evaluation chunk.
pub(crate) const CHUNK: usize = 1024;

/// `[2, 40 x 10, 1]`.
pub fn default_layer_sizes() -> Vec<usize> {
    layer_sizes(DEFAULT_HIDDEN_LAYERS, DEFAULT_HIDDEN_WIDTH)
}

/// `[2, width x hidden, 1]`.
pub fn layer_sizes(hidden: usize, width: usize) -> Vec<usize> {
    let mut sizes = vec![2];
    sizes.extend(std::iter::repeat_n(width, hidden));
    sizes.push(1);
    sizes
}

/// Affine map applied to `(x, t)` before the first layer:
/// `x' = x_scale * x + x_offset`, `t' = t_scale * t + t_offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputNormalization {
    pub x_scale: f64,
    pub x_offset: f64,
    pub t_scale: f64,
    pub t_offset: f64,
}

impl InputNormalization {
    pub const IDENTITY: Self = Self {
        x_scale: 1.0,
        x_offset: 0.0,
        t_scale: 1.0,
        t_offset: 0.0,
    };

    /// Maps `[x_min, x_max]` and `[0, t_max]` onto `[-1, 1]`.
    pub fn for_grid(grid: &Grid) -> Self {
        let (a, b) = (grid.x_min(), grid.x_max());
        let t_max = grid.t_max();
        Self {
            x_scale: 2.0 / (b - a),
            x_offset: -(a + b) / (b - a),
            t_scale: 2.0 / t_max,
            t_offset: -1.0,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, t: f64) -> (f64, f64) {
        (self.x_scale * x + self.x_offset, self.t_scale * t + self.t_offset)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_scale, self.x_offset, self.t_scale, self.t_offset]
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) || a[0] == 0.0 || a[2] == 0.0 {
            return Err(Error::InvalidNetwork(format!("degenerate input normalization {a:?}")));
        }
        Ok(Self {
            x_scale: a[0],
            x_offset: a[1],
            t_scale: a[2],
            t_offset: a[3],
        })
    }
}

impl Default for InputNormalization {
    fn default() -> Self {
        Self::IDENTITY
    }
}

pub(crate) fn validate_layer_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidNetwork(
            "need at least an input and an output layer".into(),
        ));
    }
    if sizes[0] != 2 {
        return Err(Error::InvalidNetwork(format!(
            "input width must be 2 (x, t), got {}",
            sizes[0]
        )));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(Error::InvalidNetwork(format!(
            "output width must be 1, got {}",
            sizes.last().unwrap()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidNetwork("zero-width layer".into()));
    }
    Ok(())
}

/// Total number of weights and biases.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Weights and biases of the density estimator, with its activation and
/// input normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    activation: Activation,
    normalization: InputNormalization,
    values: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(layer_sizes: &[usize], activation: Activation, normalization: InputNormalization) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            normalization,
            values: vec![0.0; param_count(layer_sizes)],
        })
    }

    pub fn from_values(
        layer_sizes: &[usize],
        activation: Activation,
        normalization: InputNormalization,
        values: Vec<f64>,
    ) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let expected = param_count(layer_sizes);
        if values.len() != expected {
            return Err(Error::InvalidNetwork(format!(
                "expected {expected} parameters, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite parameter".into()));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            normalization,
            values,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn normalization(&self) -> &InputNormalization {
        &self.normalization
    }

    pub fn set_normalization(&mut self, normalization: InputNormalization) {
        self.normalization = normalization;
    }

    /// Number of affine layers (weight matrices).
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Replaces all parameters; the length must match.
    pub fn set_values(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.values.len(), "parameter length mismatch");
        self.values.copy_from_slice(values);
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Offsets of layer `l`'s weights and biases in the flat vector.
    pub fn layer_offsets(&self, l: usize) -> (usize, usize) {
        layer_offsets(&self.layer_sizes, l)
    }

    /// `(out, in)` shape of layer `l`'s weight matrix.
    pub fn weight_shape(&self, l: usize) -> (usize, usize) {
        (self.layer_sizes[l + 1], self.layer_sizes[l])
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b) = self.layer_offsets(l);
        &self.values[w..b]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (_, b) = self.layer_offsets(l);
        &self.values[b..b + self.layer_sizes[l + 1]]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (w, b) = self.layer_offsets(l);
        &mut self.values[w..b]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        let (_, b) = self.layer_offsets(l);
        let n = self.layer_sizes[l + 1];
        &mut self.values[b..b + n]
    }

    pub(crate) fn shape(&self) -> NetShape<'_> {
        NetShape {
            sizes: &self.layer_sizes,
            activation: self.activation,
        }
    }
}

fn layer_offsets(sizes: &[usize], l: usize) -> (usize, usize) {
    let before: usize = sizes[..=l].windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    (before, before + sizes[l] * sizes[l + 1])
}

/// Glorot-uniform weights, zero biases, tanh hidden layers, identity input
/// map. Deterministic in `seed`.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<MlpParams> {
    init_params_with(layer_sizes, Activation::Tanh, InputNormalization::IDENTITY, seed)
}

pub fn init_params_with(
    layer_sizes: &[usize],
    activation: Activation,
    normalization: InputNormalization,
    seed: u64,
) -> Result<MlpParams> {
    let mut params = MlpParams::zeros(layer_sizes, activation, normalization)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for l in 0..params.num_layers() {
        let (fan_out, fan_in) = params.weight_shape(l);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in params.weights_mut(l) {
            *w = rng.gen_range(-limit..limit);
        }
    }
    Ok(params)
}

#[derive(Clone, Copy)]
pub(crate) struct NetShape<'a> {
    pub sizes: &'a [usize],
    pub activation: Activation,
}

impl NetShape<'_> {
    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn max_width(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(1)
    }
}

/// `C = alpha * A B + beta * C` for row/column-strided matrices.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (a_rs, a_cs): (usize, usize),
    b: &[f64],
    (b_rs, b_cs): (usize, usize),
    beta: f64,
    c: &mut [f64],
    c_rs: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    debug_assert!(k == 0 || (m - 1) * a_rs + (k - 1) * a_cs < a.len());
    debug_assert!(k == 0 || (k - 1) * b_rs + (n - 1) * b_cs < b.len());
    debug_assert!((m - 1) * c_rs + n - 1 < c.len());
    // SAFETY: the asserted bounds keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_rs as isize,
            a_cs as isize,
            b.as_ptr(),
            b_rs as isize,
            b_cs as isize,
            beta,
            c.as_mut_ptr(),
            c_rs as isize,
            1,
        );
    }
}

/// Per-thread buffers for one chunk.
#[derive(Default)]
struct Scratch {
    /// Post-activation outputs of every layer, `width x chunk` each.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Scratch {
    fn prepare(&mut self, shape: NetShape<'_>, b: usize) {
        let layers = shape.layers();
        self.acts.resize_with(layers, Vec::new);
        for (l, buf) in self.acts.iter_mut().enumerate() {
            buf.resize(shape.sizes[l + 1] * b, 0.0);
        }
        let w = shape.max_width() * b;
        self.delta.resize(w, 0.0);
        self.delta_prev.resize(w, 0.0);
    }
}

thread_local! {
    static SCRATCH: RefCell<Scratch> = RefCell::new(Scratch::default());
}

/// Runs the network on `b` normalized inputs laid out as `[x'..., t'...]`.
/// Leaves every layer's output in `scratch.acts`.
fn forward_chunk(shape: NetShape<'_>, values: &[f64], inputs: &[f64], b: usize, scratch: &mut Scratch) {
    let layers = shape.layers();
    let mut offset = 0;
    for l in 0..layers {
        let (n_in, n_out) = (shape.sizes[l], shape.sizes[l + 1]);
        let w = &values[offset..offset + n_out * n_in];
        let bias = &values[offset + n_out * n_in..offset + n_out * n_in + n_out];
        offset += n_out * n_in + n_out;

        let (done, rest) = scratch.acts.split_at_mut(l);
        let z = &mut rest[0][..n_out * b];
        for (row, &bv) in z.chunks_exact_mut(b).zip(bias) {
            row.fill(bv);
        }
        let prev: &[f64] = if l == 0 { inputs } else { &done[l - 1][..n_in * b] };
        gemm(n_out, n_in, b, w, (n_in, 1), prev, (b, 1), 1.0, z, b);
        if l + 1 < layers {
            shape.activation.apply_in_place(z);
        }
    }
}

/// Accumulates the gradient of `scale * sum (pred - target)^2` into `grad`
/// (which must start zeroed) and returns the sum of squared residuals.
fn loss_grad_chunk(
    shape: NetShape<'_>,
    values: &[f64],
    inputs: &[f64],
    targets: &[f64],
    scale: f64,
    grad: &mut [f64],
    scratch: &mut Scratch,
) -> f64 {
    let b = targets.len();
    scratch.prepare(shape, b);
    forward_chunk(shape, values, inputs, b, scratch);
    let layers = shape.layers();

    let mut sse = 0.0;
    {
        let pred = &scratch.acts[layers - 1][..b];
        for ((d, &p), &y) in scratch.delta.iter_mut().zip(pred).zip(targets) {
            let r = p - y;
            sse += r * r;
            *d = 2.0 * scale * r;
        }
    }

    let mut offset = values.len();
    for l in (0..layers).rev() {
        let (n_in, n_out) = (shape.sizes[l], shape.sizes[l + 1]);
        offset -= n_out * n_in + n_out;
        let w_off = offset;
        let b_off = offset + n_out * n_in;
        let delta = &scratch.delta[..n_out * b];
        let prev: &[f64] = if l == 0 {
            inputs
        } else {
            &scratch.acts[l - 1][..n_in * b]
        };

        gemm(
            n_out,
            b,
            n_in,
            delta,
            (b, 1),
            prev,
            (1, b),
            1.0,
            &mut grad[w_off..b_off],
            n_in,
        );
        for (gb, row) in grad[b_off..b_off + n_out].iter_mut().zip(delta.chunks_exact(b)) {
            *gb += row.iter().sum::<f64>();
        }

        if l > 0 {
            let w = &values[w_off..b_off];
            let d_prev = &mut scratch.delta_prev[..n_in * b];
            gemm(n_in, n_out, b, w, (1, n_in), delta, (b, 1), 0.0, d_prev, b);
            shape
                .activation
                .backprop_in_place(&scratch.acts[l - 1][..n_in * b], d_prev);
            std::mem::swap(&mut scratch.delta, &mut scratch.delta_prev);
        }
    }
    sse
}

/// Normalized inputs and targets split into evaluation chunks.
#[derive(Debug, Clone)]
pub(crate) struct PreparedBatch {
    chunks: Vec<(Vec<f64>, Vec<f64>)>,
    len: usize,
}

impl PreparedBatch {
    pub fn new(points: impl ExactSizeIterator<Item = (f64, f64, f64)>, norm: &InputNormalization) -> Self {
        let len = points.len();
        let mut chunks = Vec::with_capacity(len.div_ceil(CHUNK));
        let mut xs = Vec::with_capacity(CHUNK);
        let mut ts = Vec::with_capacity(CHUNK);
        let mut ys = Vec::with_capacity(CHUNK);
        let mut flush = |xs: &mut Vec<f64>, ts: &mut Vec<f64>, ys: &mut Vec<f64>| {
            let mut inputs = std::mem::take(xs);
            inputs.append(ts);
            chunks.push((inputs, std::mem::take(ys)));
        };
        for (x, t, y) in points {
            let (xn, tn) = norm.apply(x, t);
            xs.push(xn);
            ts.push(tn);
            ys.push(y);
            if ys.len() == CHUNK {
                flush(&mut xs, &mut ts, &mut ys);
            }
        }
        if !ys.is_empty() {
            flush(&mut xs, &mut ts, &mut ys);
        }
        Self { chunks, len }
    }

    /// Mean squared error and its gradient with respect to `values`.
    pub fn loss_and_gradient(&self, shape: NetShape<'_>, values: &[f64], grad: &mut [f64]) -> f64 {
        let scale = 1.0 / self.len as f64;
        let per_chunk = |(inputs, targets): &(Vec<f64>, Vec<f64>), g: &mut [f64]| {
            SCRATCH.with(|s| loss_grad_chunk(shape, values, inputs, targets, scale, g, &mut s.borrow_mut()))
        };
        grad.fill(0.0);
        let mut sse = 0.0;
        if rayon::current_num_threads() > 1 && self.chunks.len() > 1 {
            let parts: Vec<(f64, Vec<f64>)> = self
                .chunks
                .par_iter()
                .map(|c| {
                    let mut g = vec![0.0; grad.len()];
                    let s = per_chunk(c, &mut g);
                    (s, g)
                })
                .collect();
            for (s, g) in parts {
                sse += s;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
        } else {
            let mut g = vec![0.0; grad.len()];
            for c in &self.chunks {
                g.fill(0.0);
                sse += per_chunk(c, &mut g);
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
        }
        sse * scale
    }

    /// Mean squared error only.
    pub fn loss(&self, shape: NetShape<'_>, values: &[f64]) -> f64 {
        let sse: Vec<f64> = self
            .chunks
            .par_iter()
            .map(|(inputs, targets)| {
                SCRATCH.with(|s| {
                    let s = &mut *s.borrow_mut();
                    let b = targets.len();
                    s.prepare(shape, b);
                    forward_chunk(shape, values, inputs, b, s);
                    let pred = &s.acts[shape.layers() - 1][..b];
                    pred.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>()
                })
            })
            .collect();
        sse.iter().sum::<f64>() / self.len as f64
    }
}

impl MlpParams {
    /// Predictions for many `(x, t)` points; identical to calling
    /// [`forward`] on each.
    pub fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        if points.iter().any(|(x, t)| !x.is_finite() || !t.is_finite()) {
            return Err(Error::Domain("non-finite network input".into()));
        }
        let shape = self.shape();
        let norm = self.normalization;
        let out: Vec<Vec<f64>> = points
            .par_chunks(CHUNK)
            .map(|chunk| {
                let b = chunk.len();
                let mut inputs = vec![0.0; 2 * b];
                for (s, &(x, t)) in chunk.iter().enumerate() {
                    let (xn, tn) = norm.apply(x, t);
                    inputs[s] = xn;
                    inputs[b + s] = tn;
                }
                SCRATCH.with(|s| {
                    let s = &mut *s.borrow_mut();
                    s.prepare(shape, b);
                    forward_chunk(shape, &self.values, &inputs, b, s);
                    s.acts[shape.layers() - 1][..b].to_vec()
                })
            })
            .collect();
        Ok(out.concat())
    }

    /// Unclamped predictions at every node of `grid`, in storage order.
    pub fn predict_grid(&self, grid: &Grid) -> Result<Vec<f64>> {
        let mut points = Vec::with_capacity(grid.node_count());
        for i in 0..grid.nx() {
            for n in 0..grid.nt() {
                points.push((grid.x(i), grid.t(n)));
            }
        }
        self.predict(&points)
    }

    /// [`MlpParams::predict_grid`] as a field tagged with `env`.
    pub fn evaluate_on_grid(&self, grid: &Grid, env: &Environment) -> Result<DensityField> {
        DensityField::new(*grid, *env, self.predict_grid(grid)?)
    }
}

/// Network output at a single point.
pub fn forward(params: &MlpParams, x: f64, t: f64) -> Result<f64> {
    Ok(params.predict(&[(x, t)])?[0])
}

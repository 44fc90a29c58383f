//! Multilayer perceptrons with hand-written forward and backward passes.
//!
//! Batches are row-major [`Matrix`] values, one sample per row. Layer weights are
//! stored `out × in`, so a layer computes `X·Wᵀ + b`.

pub mod codec;
mod loss;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ndmath::{gemm, Matrix, RngState};

pub use loss::{loss_and_grad, ColumnLoss, LossKind};
pub(crate) use train::gather_rows;
pub use train::{train, Dataset, MlpOptimizer, TrainConfig, TrainOutcome};

pub const LEAKY_SLOPE: f32 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f32) -> f32 {
        match self {
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, pre: f32) -> f32 {
        match self {
            Activation::LeakyRelu => {
                if pre >= 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(pre);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }

    /// Stable id used in model files.
    pub fn id(self) -> u8 {
        match self {
            Activation::LeakyRelu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Identity => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Ok(match id {
            0 => Activation::LeakyRelu,
            1 => Activation::Tanh,
            2 => Activation::Sigmoid,
            3 => Activation::Identity,
            other => return Err(invalid(format!("unknown activation id {other}"))),
        })
    }

    fn init_gain(self) -> f32 {
        match self {
            Activation::LeakyRelu => (2.0 / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE)).sqrt(),
            Activation::Tanh => 5.0 / 3.0,
            Activation::Sigmoid | Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `v / sqrt(mean(v²) + epsilon)`. The zero vector stays zero.
pub fn pixel_normalize(v: &[f32], epsilon: f32) -> Vec<f32> {
    let scale = inv_rms(v, epsilon);
    v.iter().map(|x| x * scale).collect()
}

#[inline]
fn inv_rms(v: &[f32], epsilon: f32) -> f32 {
    let ms = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>() / v.len().max(1) as f64;
    (1.0 / (ms + epsilon as f64).sqrt()) as f32
}

/// Architecture of one perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    /// One per weight layer (`widths.len() - 1`).
    pub activations: Vec<Activation>,
    /// Apply [`pixel_normalize`] to each input row before the first layer.
    pub input_norm: bool,
    pub norm_epsilon: f32,
    /// Dropout probability on hidden-layer outputs; training mode only.
    pub dropout: f32,
}

impl MlpSpec {
    /// Leaky-relu hidden layers and the given output activation.
    pub fn new(widths: Vec<usize>, output: Activation) -> Self {
        let n = widths.len().saturating_sub(1);
        let mut activations = vec![Activation::LeakyRelu; n];
        if let Some(last) = activations.last_mut() {
            *last = output;
        }
        Self {
            widths,
            activations,
            input_norm: false,
            norm_epsilon: 1e-8,
            dropout: 0.0,
        }
    }

    pub fn with_input_norm(mut self, epsilon: f32) -> Self {
        self.input_norm = true;
        self.norm_epsilon = epsilon;
        self
    }

    pub fn with_dropout(mut self, p: f32) -> Self {
        self.dropout = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(invalid("MlpSpec needs at least two widths"));
        }
        if self.widths.contains(&0) {
            return Err(invalid("MlpSpec widths must be positive"));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(invalid(format!(
                "MlpSpec has {} layers but {} activations",
                self.widths.len() - 1,
                self.activations.len()
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid("dropout must lie in [0, 1)"));
        }
        if self.input_norm && !(self.norm_epsilon > 0.0) {
            return Err(invalid("normalization epsilon must be positive"));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// Uniform init with limit `gain·sqrt(3/fan_in)`, zero biases.
    pub fn init(spec: &MlpSpec, rng: &mut RngState) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .widths
            .windows(2)
            .zip(&spec.activations)
            .map(|(w, act)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = act.init_gain() * (3.0 / fan_in as f32).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.uniform_range(-limit, limit))
                    .collect();
                Layer {
                    weight: Matrix::from_raw(fan_out, fan_in, data),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(spec: &MlpSpec) -> Self {
        let layers = spec
            .widths
            .windows(2)
            .map(|w| Layer {
                weight: Matrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Self { layers }
    }

    pub fn check(&self, spec: &MlpSpec) -> Result<()> {
        spec.validate()?;
        if self.layers.len() != spec.num_layers() {
            return Err(invalid("parameter layer count does not match spec"));
        }
        for (i, (l, w)) in self.layers.iter().zip(spec.widths.windows(2)).enumerate() {
            if l.weight.shape() != (w[1], w[0]) || l.bias.len() != w[1] {
                return Err(invalid(format!("layer {i} parameter shape mismatch")));
            }
            if !l.weight.all_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Flattened view order: for each layer, weights then biases.
    pub fn flatten(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(l.weight.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut [f32]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f32]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
    }
}

/// Everything a forward pass produced; consumed by [`backward`] and by traces.
#[derive(Debug, Clone)]
pub struct Activations {
    pub input: Matrix,
    /// Normalized input rows, when the spec normalizes.
    pub normalized: Option<Matrix>,
    pub pre: Vec<Matrix>,
    /// Post-activation outputs as seen by the next layer (after any dropout mask).
    pub post: Vec<Matrix>,
    masks: Vec<Option<Vec<f32>>>,
}

impl Activations {
    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap()
    }

    fn layer_input(&self, i: usize) -> &Matrix {
        if i == 0 {
            self.normalized.as_ref().unwrap_or(&self.input)
        } else {
            &self.post[i - 1]
        }
    }
}

/// Evaluation-mode forward pass (no dropout, deterministic).
pub fn forward(spec: &MlpSpec, params: &MlpParams, input: &Matrix) -> Result<Activations> {
    forward_impl(spec, params, input, None)
}

/// Training-mode forward pass: dropout masks are drawn from `rng`.
pub fn forward_train(spec: &MlpSpec, params: &MlpParams, input: &Matrix, rng: &mut RngState) -> Result<Activations> {
    forward_impl(spec, params, input, Some(rng))
}

/// Forward pass for a single sample, returning only the output row.
pub fn predict_one(spec: &MlpSpec, params: &MlpParams, input: &[f32]) -> Result<Vec<f32>> {
    let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
    Ok(forward(spec, params, &x)?.output().row(0).to_vec())
}

fn forward_impl(
    spec: &MlpSpec,
    params: &MlpParams,
    input: &Matrix,
    mut rng: Option<&mut RngState>,
) -> Result<Activations> {
    if input.cols() != spec.input_dim() {
        return Err(invalid(format!(
            "forward: input width {} but spec expects {}",
            input.cols(),
            spec.input_dim()
        )));
    }
    if params.layers.len() != spec.num_layers() {
        return Err(invalid("forward: parameters do not match spec"));
    }
    let normalized = spec.input_norm.then(|| {
        let mut m = input.clone();
        for r in 0..m.rows() {
            let s = inv_rms(m.row(r), spec.norm_epsilon);
            m.row_mut(r).iter_mut().for_each(|v| *v *= s);
        }
        m
    });
    let n = input.rows();
    let mut acts = Activations {
        input: input.clone(),
        normalized,
        pre: Vec::with_capacity(spec.num_layers()),
        post: Vec::with_capacity(spec.num_layers()),
        masks: Vec::with_capacity(spec.num_layers()),
    };
    for (i, (layer, act)) in params.layers.iter().zip(&spec.activations).enumerate() {
        let x = acts.layer_input(i);
        if layer.weight.cols() != x.cols() {
            return Err(invalid(format!("forward: layer {i} weight shape mismatch")));
        }
        let mut pre = Matrix::zeros(n, layer.weight.rows());
        gemm(x, false, &layer.weight, true, &mut pre, 0.0);
        for r in 0..n {
            pre.row_mut(r).iter_mut().zip(&layer.bias).for_each(|(v, b)| *v += b);
        }
        let mut post = pre.clone();
        post.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        let hidden = i + 1 < spec.num_layers();
        let mask = match rng.as_deref_mut() {
            Some(rng) if hidden && spec.dropout > 0.0 => {
                let keep = 1.0 - spec.dropout;
                let m: Vec<f32> = (0..post.as_slice().len())
                    .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                post.as_mut_slice().iter_mut().zip(&m).for_each(|(v, k)| *v *= k);
                Some(m)
            }
            _ => None,
        };
        acts.pre.push(pre);
        acts.post.push(post);
        acts.masks.push(mask);
    }
    Ok(acts)
}

/// Gradients of a scalar loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: MlpParams,
    /// Gradient with respect to the raw (un-normalized) input rows.
    pub input: Matrix,
}

/// Back-propagates `grad_output` (gradient w.r.t. the final post-activation).
pub fn backward(spec: &MlpSpec, params: &MlpParams, acts: &Activations, grad_output: &Matrix) -> Result<Gradients> {
    let last = spec.num_layers() - 1;
    let pre = &acts.pre[last];
    if grad_output.shape() != pre.shape() {
        return Err(invalid(format!(
            "backward: output gradient {:?} but output is {:?}",
            grad_output.shape(),
            pre.shape()
        )));
    }
    let act = spec.activations[last];
    let mut g = grad_output.clone();
    g.as_mut_slice()
        .iter_mut()
        .zip(pre.as_slice())
        .for_each(|(g, &z)| *g *= act.derivative(z));
    backward_from_pre(spec, params, acts, g)
}

/// Back-propagates a gradient taken w.r.t. the final pre-activation (logits).
pub fn backward_from_pre(
    spec: &MlpSpec,
    params: &MlpParams,
    acts: &Activations,
    grad_pre: Matrix,
) -> Result<Gradients> {
    let nl = spec.num_layers();
    if acts.pre.len() != nl || params.layers.len() != nl {
        return Err(invalid("backward: activations do not match spec"));
    }
    if grad_pre.shape() != acts.pre[nl - 1].shape() {
        return Err(invalid("backward: logit gradient shape mismatch"));
    }
    let mut grads = MlpParams::zeros_like(spec);
    let mut delta = grad_pre;
    let mut grad_in = Matrix::zeros(0, 0);
    for i in (0..nl).rev() {
        let x = acts.layer_input(i);
        let gl = &mut grads.layers[i];
        // dW = δᵀ·X, db = Σ_rows δ
        gemm(&delta, true, x, false, &mut gl.weight, 0.0);
        for r in 0..delta.rows() {
            gl.bias.iter_mut().zip(delta.row(r)).for_each(|(b, d)| *b += d);
        }
        let mut dx = Matrix::zeros(delta.rows(), x.cols());
        gemm(&delta, false, &params.layers[i].weight, false, &mut dx, 0.0);
        if i > 0 {
            let act = spec.activations[i - 1];
            let mask = acts.masks[i - 1].as_deref();
            let pre = acts.pre[i - 1].as_slice();
            for (k, d) in dx.as_mut_slice().iter_mut().enumerate() {
                *d *= act.derivative(pre[k]) * mask.map_or(1.0, |m| m[k]);
            }
            delta = dx;
        } else {
            grad_in = dx;
        }
    }
    if spec.input_norm {
        grad_in = normalize_backward(&acts.input, &grad_in, spec.norm_epsilon);
    }
    Ok(Gradients {
        params: grads,
        input: grad_in,
    })
}

/// Vector-Jacobian product of row-wise pixel normalization.
fn normalize_backward(input: &Matrix, grad: &Matrix, epsilon: f32) -> Matrix {
    let mut out = grad.clone();
    let d = input.cols() as f64;
    for r in 0..input.rows() {
        let v = input.row(r);
        let g = grad.row(r);
        let ms = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>() / d;
        let s = (ms + epsilon as f64).sqrt();
        let gv: f64 = v.iter().zip(g).map(|(a, b)| *a as f64 * *b as f64).sum();
        let coef = gv / (d * s * s * s);
        for ((o, &vi), &gi) in out.row_mut(r).iter_mut().zip(v).zip(g) {
            *o = (gi as f64 / s - vi as f64 * coef) as f32;
        }
    }
    out
}

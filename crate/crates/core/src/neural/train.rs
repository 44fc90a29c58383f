use serde::{Deserialize, Serialize};

use super::{backward_from_pre, forward, forward_train, loss_and_grad, LossKind, MlpParams, MlpSpec};
use crate::error::{invalid, Error, Result};
use crate::ndmath::{adam_update, AdamConfig, AdamState, Matrix, RngState};

/// Supervised training set: one sample per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    /// Optional per-sample loss weights.
    pub weights: Option<Vec<f32>>,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(invalid("dataset inputs and targets differ in length"));
        }
        if inputs.rows() == 0 {
            return Err(invalid("dataset is empty"));
        }
        Ok(Self {
            inputs,
            targets,
            weights: None,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// L2 penalty on weights (not biases).
    pub l2: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 64,
            adam: AdamConfig::default(),
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    /// Full-dataset evaluation loss: entry 0 before training, then one per epoch.
    pub history: Vec<f32>,
}

/// Adam over every parameter block of one network.
#[derive(Debug, Clone)]
pub struct MlpOptimizer {
    states: Vec<AdamState>,
    pub config: AdamConfig,
}

impl MlpOptimizer {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        Self {
            states: params.blocks().map(|b| AdamState::new(b.len())).collect(),
            config,
        }
    }

    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
        for ((p, g), st) in params.blocks_mut().zip(grads.blocks()).zip(self.states.iter_mut()) {
            adam_update(p, g, st, &self.config)?;
        }
        Ok(())
    }
}

pub(crate) fn add_l2(grads: &mut MlpParams, params: &MlpParams, l2: f32) {
    if l2 == 0.0 {
        return;
    }
    for (g, p) in grads.layers.iter_mut().zip(&params.layers) {
        g.weight
            .as_mut_slice()
            .iter_mut()
            .zip(p.weight.as_slice())
            .for_each(|(g, w)| *g += 2.0 * l2 * w);
    }
}

pub(crate) fn gather_rows(m: &Matrix, idx: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(idx.len() * m.cols());
    for &i in idx {
        data.extend_from_slice(m.row(i));
    }
    Matrix::from_raw(idx.len(), m.cols(), data)
}

pub(crate) fn evaluate_loss(spec: &MlpSpec, params: &MlpParams, data: &Dataset, loss: &LossKind) -> Result<f32> {
    let out_act = *spec.activations.last().unwrap();
    let acts = forward(spec, params, &data.inputs)?;
    let (l, _) = loss_and_grad(
        loss,
        out_act,
        acts.pre.last().unwrap(),
        acts.output(),
        &data.targets,
        data.weights.as_deref(),
    )?;
    Ok(l)
}

/// Mini-batch Adam training from a seeded initialization.
pub fn train(
    spec: &MlpSpec,
    data: &Dataset,
    loss: &LossKind,
    config: &TrainConfig,
    rng: &mut RngState,
) -> Result<TrainOutcome> {
    spec.validate()?;
    if data.is_empty() {
        return Err(invalid("train: empty dataset"));
    }
    if data.inputs.cols() != spec.input_dim() || data.targets.cols() != spec.output_dim() {
        return Err(invalid("train: dataset widths do not match the spec"));
    }
    if config.batch_size == 0 {
        return Err(invalid("train: batch size must be positive"));
    }
    let mut params = MlpParams::init(spec, rng)?;
    let mut opt = MlpOptimizer::new(&params, config.adam);
    let out_act = *spec.activations.last().unwrap();
    let mut history = vec![evaluate_loss(spec, &params, data, loss)?];
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(config.batch_size) {
            let x = gather_rows(&data.inputs, chunk);
            let y = gather_rows(&data.targets, chunk);
            let w: Option<Vec<f32>> = data.weights.as_ref().map(|w| chunk.iter().map(|&i| w[i]).collect());
            let acts = forward_train(spec, &params, &x, rng)?;
            let (l, g) = loss_and_grad(loss, out_act, acts.pre.last().unwrap(), acts.output(), &y, w.as_deref())?;
            if !l.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            let mut grads = backward_from_pre(spec, &params, &acts, g)?.params;
            add_l2(&mut grads, &params, config.l2);
            opt.step(&mut params, &grads)?;
        }
        let l = evaluate_loss(spec, &params, data, loss)?;
        if !l.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        history.push(l);
    }
    Ok(TrainOutcome { params, history })
}

use serde::{Deserialize, Serialize};

use super::{mapping_spec, probe_spec, synthesis_spec, GeneratorBundle, TrainingMeta};
use crate::error::{invalid, Error, Result};
use crate::faceworld::{sample_world, Attribute, WorldConfig, WorldDataset, WorldRecord, NUM_ATTRIBUTES};
use crate::ndmath::{AdamConfig, Matrix, RngState};
use crate::neural::{
    backward, backward_from_pre, forward, gather_rows, loss_and_grad, Activation, LossKind, MlpOptimizer, MlpParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorHyper {
    pub samples: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    /// Weight of the W-probe loss in the mapping network's objective.
    pub beta: f32,
    pub w_dim: usize,
    pub mapping_width: usize,
}

impl Default for GeneratorHyper {
    fn default() -> Self {
        Self {
            samples: 20000,
            epochs: 60,
            batch_size: 64,
            learning_rate: 1e-3,
            beta: 0.1,
            w_dim: 16,
            mapping_width: 32,
        }
    }
}

fn standardized_targets(records: &[WorldRecord]) -> Matrix {
    let mut data = Vec::with_capacity(records.len() * NUM_ATTRIBUTES);
    for r in records {
        data.extend_from_slice(&r.attrs.standardized());
    }
    Matrix::from_vec(records.len(), NUM_ATTRIBUTES, data).unwrap()
}

/// Fraction of categorical attributes the probe classifies correctly, the
/// decision point being the midpoint of the two standardized class values.
pub fn probe_accuracy(bundle: &GeneratorBundle, records: &[WorldRecord]) -> Result<f32> {
    if records.is_empty() {
        return Err(invalid("probe accuracy needs samples"));
    }
    let ws = bundle.map_batch(&WorldDataset::latents(records))?;
    let pred = bundle.probe_batch(&ws)?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for (i, r) in records.iter().enumerate() {
        for a in Attribute::ALL.into_iter().filter(|a| a.is_categorical()) {
            let mid = 0.5 * (a.standardize(-1.0) + a.standardize(1.0));
            let guess = pred.get(i, a.index()) > mid;
            correct += (guess == (r.attrs.get(a) > 0.0)) as usize;
            total += 1;
        }
    }
    Ok(correct as f32 / total as f32)
}

fn validation_mse(bundle: &GeneratorBundle, records: &[WorldRecord]) -> Result<f32> {
    let mut total = 0.0f64;
    for chunk in records.chunks(256) {
        let imgs = bundle.generate_batch(&WorldDataset::latents(chunk))?;
        for (img, r) in imgs.iter().zip(chunk) {
            total += img.mse(&r.image) as f64;
        }
    }
    Ok((total / records.len() as f64) as f32)
}

/// Jointly trains mapping, synthesis and probe on a freshly sampled world.
///
/// Loss per batch: `mse(g(f(z)), image) + beta·mse(probe(f(z)), y_std)`. The
/// probe itself always receives the full probe gradient so that its accuracy
/// measures linear decodability of W even when `beta = 0`.
pub fn train_generator(world: &WorldConfig, hyper: &GeneratorHyper, rng: &mut RngState) -> Result<GeneratorBundle> {
    world.validate()?;
    if hyper.samples < 5 || hyper.batch_size == 0 || hyper.w_dim == 0 || hyper.mapping_width == 0 {
        return Err(invalid("generator hyperparameters out of range"));
    }
    if !(hyper.beta >= 0.0) || !(hyper.learning_rate > 0.0) {
        return Err(invalid("beta must be >= 0 and learning rate > 0"));
    }
    let seed = rng.seed();
    let data = sample_world(hyper.samples, &mut rng.split(1), world)?;
    let (train, val) = data.split();
    let zs = WorldDataset::latents(train);
    let imgs = WorldDataset::images(train);
    let ys = standardized_targets(train);

    let mut init_rng = rng.split(2);
    let ms = mapping_spec(world.z_dim, hyper.mapping_width, hyper.w_dim);
    let ss = synthesis_spec(hyper.w_dim);
    let ps = probe_spec(hyper.w_dim);
    let mut bundle = GeneratorBundle {
        world: *world,
        mapping: MlpParams::init(&ms, &mut init_rng)?,
        synthesis: MlpParams::init(&ss, &mut init_rng)?,
        probe: MlpParams::init(&ps, &mut init_rng)?,
        mapping_spec: ms,
        synthesis_spec: ss,
        probe_spec: ps,
        meta: TrainingMeta {
            seed,
            epochs: hyper.epochs as u32,
            samples: hyper.samples as u32,
            beta: hyper.beta,
            final_train_loss: f32::NAN,
            validation_mse: f32::NAN,
            probe_accuracy: f32::NAN,
        },
    };
    let adam = AdamConfig::with_lr(hyper.learning_rate);
    let mut opt_map = MlpOptimizer::new(&bundle.mapping, adam);
    let mut opt_syn = MlpOptimizer::new(&bundle.synthesis, adam);
    let mut opt_probe = MlpOptimizer::new(&bundle.probe, adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffle_rng = rng.split(3);
    let mut last_loss = f32::NAN;

    for epoch in 0..hyper.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0f64;
        for chunk in order.chunks(hyper.batch_size) {
            let z = gather_rows(&zs, chunk);
            let target = gather_rows(&imgs, chunk);
            let y = gather_rows(&ys, chunk);
            let b = &mut bundle;

            let map_acts = forward(&b.mapping_spec, &b.mapping, &z)?;
            let w = map_acts.output();
            let syn_acts = forward(&b.synthesis_spec, &b.synthesis, w)?;
            let (l_rec, g_rec) = loss_and_grad(
                &LossKind::Mse,
                Activation::Sigmoid,
                syn_acts.pre.last().unwrap(),
                syn_acts.output(),
                &target,
                None,
            )?;
            let probe_acts = forward(&b.probe_spec, &b.probe, w)?;
            let (l_probe, g_probe) = loss_and_grad(
                &LossKind::Mse,
                Activation::Identity,
                probe_acts.pre.last().unwrap(),
                probe_acts.output(),
                &y,
                None,
            )?;
            let loss = l_rec + hyper.beta * l_probe;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            epoch_loss += loss as f64 * chunk.len() as f64;

            let syn_grads = backward_from_pre(&b.synthesis_spec, &b.synthesis, &syn_acts, g_rec)?;
            let probe_grads = backward_from_pre(&b.probe_spec, &b.probe, &probe_acts, g_probe)?;
            let mut grad_w = syn_grads.input;
            grad_w
                .as_mut_slice()
                .iter_mut()
                .zip(probe_grads.input.as_slice())
                .for_each(|(g, p)| *g += hyper.beta * p);
            let map_grads = backward(&b.mapping_spec, &b.mapping, &map_acts, &grad_w)?;

            opt_syn.step(&mut b.synthesis, &syn_grads.params)?;
            opt_probe.step(&mut b.probe, &probe_grads.params)?;
            opt_map.step(&mut b.mapping, &map_grads.params)?;
        }
        last_loss = (epoch_loss / train.len() as f64) as f32;
        if !last_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
    }

    let eval = if val.is_empty() { train } else { val };
    bundle.meta.final_train_loss = last_loss;
    bundle.meta.validation_mse = validation_mse(&bundle, eval)?;
    bundle.meta.probe_accuracy = probe_accuracy(&bundle, eval)?;
    Ok(bundle)
}

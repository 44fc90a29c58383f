use crate::error::{invalid, Result};
use crate::faceworld::{oracle_label, AttributeVector};
use crate::generator::{GeneratorBundle, Space};
use crate::ndmath::{Matrix, RngState};

use super::{fit_linear, fit_nonlinear, FeatureModel, LabeledLatents, LinearHyper, ModelKind, NonlinearHyper};

pub const DEFAULT_TRAIN_SAMPLES: usize = 10_000;
pub const DEFAULT_HOLDOUT_SAMPLES: usize = 2_000;

/// Stream tags under a user seed, so training and held-out draws never share
/// a generator.
pub const TRAIN_STREAM: u64 = 0x7261;
pub const HOLDOUT_STREAM: u64 = 0x686f;
pub const FIT_STREAM: u64 = 0x6669;

/// Prior draws `z ~ N(0, I)`, their images `w = f(z)`, and the oracle labels
/// of `g(w)`.
#[derive(Debug, Clone)]
pub struct LatentSample {
    pub z: Matrix,
    pub w: Matrix,
    pub labels: Vec<AttributeVector>,
}

impl LatentSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn latents(&self, space: Space) -> &Matrix {
        match space {
            Space::Z => &self.z,
            Space::W => &self.w,
        }
    }

    pub fn labeled(&self, space: Space) -> Result<LabeledLatents> {
        LabeledLatents::new(space, self.latents(space).clone(), self.labels.clone())
    }
}

pub fn sample_latents(bundle: &GeneratorBundle, count: usize, rng: &mut RngState) -> Result<LatentSample> {
    if count == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let d = bundle.z_dim();
    let mut zs = Vec::with_capacity(count * d);
    for _ in 0..count {
        zs.extend(rng.normal_vec(d));
    }
    let z = Matrix::from_vec(count, d, zs)?;
    let w = bundle.map_batch(&z)?;
    let labels = bundle.synthesize_batch(&w)?.iter().map(oracle_label).collect();
    Ok(LatentSample { z, w, labels })
}

/// Fits one model with default hyperparameters.
pub fn fit_kind(data: &LabeledLatents, kind: ModelKind, rng: &mut RngState) -> Result<FeatureModel> {
    match kind {
        ModelKind::Linear => fit_linear(data, &LinearHyper::default(), rng),
        ModelKind::Nonlinear => fit_nonlinear(data, &NonlinearHyper::default(), rng),
    }
}

/// The `fit` pipeline: `count` labeled draws from the seed's training
/// stream, then a default fit from its fitting stream.
pub fn fit_from_bundle(
    bundle: &GeneratorBundle,
    space: Space,
    kind: ModelKind,
    count: usize,
    seed: u64,
) -> Result<FeatureModel> {
    let root = RngState::new(seed);
    let sample = sample_latents(bundle, count, &mut root.split(TRAIN_STREAM))?;
    fit_kind(&sample.labeled(space)?, kind, &mut root.split(FIT_STREAM))
}

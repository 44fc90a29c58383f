//! Toy two-stage generator: a normalizing mapping network `f: Z → W` and a
//! synthesis network `g: W → Image`.

mod persist;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::faceworld::{Image, WorldConfig, NUM_ATTRIBUTES};
use crate::ndmath::{norm, Matrix};
use crate::neural::{forward, Activation, Activations, MlpParams, MlpSpec};

pub use persist::{MODEL_MAGIC, MODEL_VERSION};
pub use train::{probe_accuracy, train_generator, GeneratorHyper};

pub const NORM_EPSILON: f32 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Z,
    W,
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Space::Z => "z",
            Space::W => "w",
        })
    }
}

impl FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Space::Z),
            "w" => Ok(Space::W),
            _ => Err(invalid(format!("unknown latent space `{s}` (expected z or w)"))),
        }
    }
}

/// A latent point tagged with the space it lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector {
    pub space: Space,
    pub values: Vec<f32>,
}

impl LatentVector {
    pub fn new(space: Space, values: Vec<f32>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("latent entries must be finite"));
        }
        Ok(Self { space, values })
    }

    pub fn z(values: Vec<f32>) -> Result<Self> {
        Self::new(Space::Z, values)
    }

    pub fn w(values: Vec<f32>) -> Result<Self> {
        Self::new(Space::W, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f32 {
        norm(&self.values)
    }

    /// `self + alpha·direction`, keeping the space tag.
    pub fn offset(&self, direction: &[f32], alpha: f32) -> Result<Self> {
        if direction.len() != self.values.len() {
            return Err(invalid("direction length does not match latent"));
        }
        Self::new(
            self.space,
            self.values.iter().zip(direction).map(|(v, d)| v + alpha * d).collect(),
        )
    }
}

/// Run summary stored with a trained bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: u32,
    pub samples: u32,
    pub beta: f32,
    pub final_train_loss: f32,
    pub validation_mse: f32,
    pub probe_accuracy: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorBundle {
    pub world: WorldConfig,
    pub mapping_spec: MlpSpec,
    pub mapping: MlpParams,
    pub synthesis_spec: MlpSpec,
    pub synthesis: MlpParams,
    /// Linear W → standardized attributes readout, used as a training signal.
    pub probe_spec: MlpSpec,
    pub probe: MlpParams,
    pub meta: TrainingMeta,
}

/// Mapping network: 4 leaky-relu layers of width `width`, normalized input, linear output.
pub fn mapping_spec(z_dim: usize, width: usize, w_dim: usize) -> MlpSpec {
    MlpSpec::new(vec![z_dim, width, width, width, w_dim], Activation::Identity).with_input_norm(NORM_EPSILON)
}

pub fn synthesis_spec(w_dim: usize) -> MlpSpec {
    MlpSpec::new(vec![w_dim, 64, 256, crate::faceworld::NUM_PIXELS], Activation::Sigmoid)
}

pub fn probe_spec(w_dim: usize) -> MlpSpec {
    MlpSpec::new(vec![w_dim, NUM_ATTRIBUTES], Activation::Identity)
}

impl GeneratorBundle {
    pub fn z_dim(&self) -> usize {
        self.mapping_spec.input_dim()
    }

    pub fn w_dim(&self) -> usize {
        self.mapping_spec.output_dim()
    }

    pub fn dim_of(&self, space: Space) -> usize {
        match space {
            Space::Z => self.z_dim(),
            Space::W => self.w_dim(),
        }
    }

    fn expect(&self, latent: &LatentVector, space: Space) -> Result<()> {
        if latent.space != space {
            return Err(invalid(format!(
                "expected a {space}-space latent, got {}",
                latent.space
            )));
        }
        if latent.len() != self.dim_of(space) {
            return Err(invalid(format!(
                "{space}-space latent needs {} entries, got {}",
                self.dim_of(space),
                latent.len()
            )));
        }
        Ok(())
    }

    /// Full mapping-network pass over a batch of z rows, with every layer's values.
    pub fn mapping_activations(&self, zs: &Matrix) -> Result<Activations> {
        forward(&self.mapping_spec, &self.mapping, zs)
    }

    pub fn map_batch(&self, zs: &Matrix) -> Result<Matrix> {
        let mut acts = self.mapping_activations(zs)?;
        Ok(acts.post.pop().unwrap())
    }

    pub fn map_latent(&self, z: &LatentVector) -> Result<LatentVector> {
        self.expect(z, Space::Z)?;
        let zs = Matrix::from_vec(1, z.len(), z.values.clone())?;
        LatentVector::w(self.map_batch(&zs)?.row(0).to_vec())
    }

    pub fn synthesize_batch(&self, ws: &Matrix) -> Result<Vec<Image>> {
        let acts = forward(&self.synthesis_spec, &self.synthesis, ws)?;
        let out = acts.output();
        (0..out.rows())
            .map(|r| Image::from_pixels_clamped(out.row(r).to_vec()))
            .collect()
    }

    pub fn synthesize(&self, w: &LatentVector) -> Result<Image> {
        self.expect(w, Space::W)?;
        let ws = Matrix::from_vec(1, w.len(), w.values.clone())?;
        Ok(self.synthesize_batch(&ws)?.pop().unwrap())
    }

    pub fn generate(&self, z: &LatentVector) -> Result<Image> {
        self.synthesize(&self.map_latent(z)?)
    }

    pub fn generate_batch(&self, zs: &Matrix) -> Result<Vec<Image>> {
        self.synthesize_batch(&self.map_batch(zs)?)
    }

    /// Image of a latent in either space (Z goes through the mapping network).
    pub fn image_of(&self, latent: &LatentVector) -> Result<Image> {
        match latent.space {
            Space::Z => self.generate(latent),
            Space::W => self.synthesize(latent),
        }
    }

    /// `‖f(z+Δz) − f(z)‖ / ‖Δz‖`.
    pub fn contraction_ratio(&self, z: &LatentVector, dz: &[f32]) -> Result<f32> {
        let n = norm(dz);
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("contraction ratio needs a nonzero finite step"));
        }
        let w0 = self.map_latent(z)?;
        let w1 = self.map_latent(&z.offset(dz, 1.0)?)?;
        let d: Vec<f32> = w1.values.iter().zip(&w0.values).map(|(a, b)| a - b).collect();
        Ok(norm(&d) / n)
    }

    /// Probe readout of standardized attributes for a batch of w rows.
    pub fn probe_batch(&self, ws: &Matrix) -> Result<Matrix> {
        let mut acts = forward(&self.probe_spec, &self.probe, ws)?;
        Ok(acts.post.pop().unwrap())
    }
}

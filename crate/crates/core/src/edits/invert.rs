use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::faceworld::{FeatureMap, Image, NUM_FEATURES, NUM_PIXELS};
use crate::generator::{GeneratorBundle, LatentVector};
use crate::ndmath::{adam_update, AdamConfig, AdamState, Matrix, RngState};
use crate::neural::{backward, forward};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InversionObjective {
    /// `‖φ(x̂) − φ(x)‖²` over the oracle region statistics.
    Features,
    /// Mean squared pixel error.
    Pixels,
    /// Feature loss plus `gamma` times pixel mse.
    Weighted { gamma: f32 },
}

impl InversionObjective {
    pub const DEFAULT_GAMMA: f32 = 0.1;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvertConfig {
    pub iters: usize,
    pub restarts: usize,
    pub learning_rate: f32,
    pub objective: InversionObjective,
}

impl Default for InvertConfig {
    fn default() -> Self {
        Self {
            iters: 600,
            restarts: 4,
            learning_rate: 0.1,
            // the region statistics alone leave flat directions (clamped
            // darkness) that trap restarts; pixels pin the image down
            objective: InversionObjective::Pixels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub latent: LatentVector,
    pub reconstruction: Image,
    pub loss: f32,
    /// Best loss reached by each restart (infinite when it diverged).
    pub restart_losses: Vec<f32>,
}

/// Loss and pixel gradient of one reconstruction.
fn loss_and_grad(
    objective: InversionObjective,
    fm: &FeatureMap,
    img: &Image,
    target: &Image,
    target_features: &[f32; NUM_FEATURES],
) -> (f32, Vec<f32>) {
    let (feature_weight, pixel_weight) = match objective {
        InversionObjective::Features => (1.0, 0.0),
        InversionObjective::Pixels => (0.0, 1.0),
        InversionObjective::Weighted { gamma } => (1.0, gamma),
    };
    let mut loss = 0.0;
    let mut grad = vec![0.0f32; NUM_PIXELS];
    if feature_weight > 0.0 {
        let f = fm.features(img);
        let diff: [f32; NUM_FEATURES] = std::array::from_fn(|k| f[k] - target_features[k]);
        loss += feature_weight * diff.iter().map(|d| d * d).sum::<f32>();
        let upstream = diff.map(|d| 2.0 * feature_weight * d);
        grad = fm.vjp(img, &upstream);
    }
    if pixel_weight > 0.0 {
        let n = NUM_PIXELS as f32;
        for ((g, a), b) in grad.iter_mut().zip(img.pixels()).zip(target.pixels()) {
            let d = a - b;
            loss += pixel_weight * d * d / n;
            *g += 2.0 * pixel_weight * d / n;
        }
    }
    (loss, grad)
}

/// Finds a w whose synthesis matches `target` under the configured
/// objective. Restarts begin at `f(z)` for seeded `z ~ N(0, I)`, run
/// together as one batch, and the best point seen by any of them is returned.
pub fn invert(
    bundle: &GeneratorBundle,
    target: &Image,
    cfg: &InvertConfig,
    rng: &mut RngState,
) -> Result<InversionResult> {
    if cfg.restarts == 0 || cfg.iters == 0 || !(cfg.learning_rate > 0.0) {
        return Err(invalid("inversion needs restarts > 0, iters > 0 and a positive rate"));
    }
    if let InversionObjective::Weighted { gamma } = cfg.objective {
        if !(gamma >= 0.0) {
            return Err(invalid("pixel weight must be nonnegative"));
        }
    }
    let fm = FeatureMap::new();
    let target_features = fm.features(target);
    let r = cfg.restarts;
    let wd = bundle.w_dim();
    let mut zs = Vec::with_capacity(r * bundle.z_dim());
    for _ in 0..r {
        zs.extend(rng.normal_vec(bundle.z_dim()));
    }
    let mut w = bundle.map_batch(&Matrix::from_vec(r, bundle.z_dim(), zs)?)?;
    let adam = AdamConfig::with_lr(cfg.learning_rate);
    let mut state = AdamState::new(r * wd);
    let mut alive = vec![true; r];
    let mut best: Vec<(f32, Vec<f32>)> = vec![(f32::INFINITY, Vec::new()); r];

    for it in 0..=cfg.iters {
        let acts = forward(&bundle.synthesis_spec, &bundle.synthesis, &w)?;
        let out = acts.output();
        let mut grad_out = Matrix::zeros(r, NUM_PIXELS);
        for k in 0..r {
            if !alive[k] {
                continue;
            }
            let img = Image::from_pixels_clamped(out.row(k).to_vec())?;
            let (loss, g) = loss_and_grad(cfg.objective, &fm, &img, target, &target_features);
            if !loss.is_finite() || !w.row(k).iter().all(|v| v.is_finite()) {
                alive[k] = false;
                continue;
            }
            if loss < best[k].0 {
                best[k] = (loss, w.row(k).to_vec());
            }
            grad_out.row_mut(k).copy_from_slice(&g);
        }
        if it == cfg.iters || !alive.iter().any(|a| *a) {
            break;
        }
        let grads = backward(&bundle.synthesis_spec, &bundle.synthesis, &acts, &grad_out)?;
        adam_update(w.as_mut_slice(), grads.input.as_slice(), &mut state, &adam)?;
    }

    let restart_losses: Vec<f32> = best.iter().map(|b| b.0).collect();
    let Some((loss, values)) = best
        .into_iter()
        .filter(|b| b.0.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
    else {
        return Err(Error::InversionFailed { restarts: r });
    };
    let latent = LatentVector::w(values)?;
    let reconstruction = bundle.synthesize(&latent)?;
    Ok(InversionResult {
        latent,
        reconstruction,
        loss,
        restart_losses,
    })
}

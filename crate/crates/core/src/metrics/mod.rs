//! Separability score, inception score and Fréchet distance over the toy world.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::faceworld::sample_world;
use crate::faceworld::{
    categorical_margins, oracle_label, Attribute, AttributeVector, FeatureMap, Image, NUM_FEATURES,
};
use crate::generator::GeneratorBundle;
use crate::latent::{sample_latents, FeatureModel, HOLDOUT_STREAM};
use crate::ndmath::{frechet_distance, GaussianFit, Matrix, RngState};

/// Temperature that softens the oracle's categorical margins into class
/// probabilities for the inception score.
pub const IS_TEMPERATURE: f32 = 0.1;
/// glasses × beard
pub const IS_CLASSES: usize = 4;

/// `counts[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionTable {
    pub fn new(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(invalid("confusion table must be square and nonempty"));
        }
        Ok(Self { counts })
    }

    /// Binary table from paired class decisions.
    pub fn from_binary(truth: &[bool], predicted: &[bool]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(invalid("truth and prediction lengths differ"));
        }
        let mut counts = vec![vec![0u64; 2]; 2];
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[t as usize][p as usize] += 1;
        }
        Ok(Self { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }
}

/// Entropy of the true label given the predicted label, in nats:
/// `Σ_pred p(pred) Σ_true −p(true|pred) ln p(true|pred)`.
pub fn conditional_entropy(table: &ConfusionTable) -> Result<f64> {
    let total = table.total();
    if total == 0 {
        return Err(invalid("conditional entropy of an empty table"));
    }
    let k = table.classes();
    let mut h = 0.0f64;
    for p in 0..k {
        let col: u64 = (0..k).map(|t| table.counts[t][p]).sum();
        if col == 0 {
            continue;
        }
        for t in 0..k {
            let c = table.counts[t][p];
            if c > 0 {
                let q = c as f64 / col as f64;
                h -= (col as f64 / total as f64) * q * q.ln();
            }
        }
    }
    Ok(h.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSS {
    pub attribute: String,
    pub ss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SSReport {
    pub per_attribute: Vec<AttributeSS>,
    pub overall: f64,
}

/// `exp(H)` per attribute and their product. Minimum 1 (perfect separation).
pub fn separability_score(tables: &[(String, ConfusionTable)]) -> Result<SSReport> {
    if tables.is_empty() {
        return Err(invalid("separability score needs at least one attribute"));
    }
    let mut per_attribute = Vec::with_capacity(tables.len());
    for (name, t) in tables {
        per_attribute.push(AttributeSS {
            attribute: name.clone(),
            ss: conditional_entropy(t)?.exp(),
        });
    }
    let overall = overall_ss(&per_attribute.iter().map(|a| a.ss).collect::<Vec<_>>());
    Ok(SSReport { per_attribute, overall })
}

/// Overall score from per-attribute scores.
pub fn overall_ss(per_attribute: &[f64]) -> f64 {
    per_attribute.iter().product()
}

/// Per-attribute binary confusion tables of a feature model's class
/// decisions against reference labels.
pub fn model_tables(
    model: &FeatureModel,
    latents: &Matrix,
    labels: &[AttributeVector],
) -> Result<Vec<(String, ConfusionTable)>> {
    if latents.rows() != labels.len() {
        return Err(invalid("latent and label counts differ"));
    }
    let pred = model.predict_batch(latents)?;
    Attribute::ALL
        .iter()
        .map(|&a| {
            let truth: Vec<bool> = labels.iter().map(|y| y.classes()[a.index()]).collect();
            let guess: Vec<bool> = pred.iter().map(|y| y.classes()[a.index()]).collect();
            Ok((a.name().to_string(), ConfusionTable::from_binary(&truth, &guess)?))
        })
        .collect()
}

/// `exp(mean_i KL(p_i ‖ p̄))`.
pub fn inception_score(rows: &[Vec<f64>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(invalid("inception score needs at least one row"));
    }
    let k = rows[0].len();
    for r in rows {
        if r.len() != k || r.iter().any(|p| !(*p >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(invalid("inception score rows must be probability distributions"));
        }
    }
    let mut marginal = vec![0.0f64; k];
    for r in rows {
        marginal.iter_mut().zip(r).for_each(|(m, p)| *m += p);
    }
    marginal.iter_mut().for_each(|m| *m /= rows.len() as f64);
    let mut kl = 0.0;
    for r in rows {
        for (p, m) in r.iter().zip(&marginal) {
            if *p > 0.0 {
                kl += p * (p / m).ln();
            }
        }
    }
    Ok((kl / rows.len() as f64).exp())
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Soft glasses × beard class distribution read from the oracle margins.
/// Class index is `2·glasses + beard`.
pub fn class_probabilities(img: &Image, temperature: f32) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(invalid("temperature must be positive"));
    }
    let [g, b] = categorical_margins(img);
    let pg = logistic((g / temperature) as f64);
    let pb = logistic((b / temperature) as f64);
    Ok(vec![(1.0 - pg) * (1.0 - pb), (1.0 - pg) * pb, pg * (1.0 - pb), pg * pb])
}

pub fn image_inception_score(images: &[Image]) -> Result<f64> {
    let rows = images
        .iter()
        .map(|im| class_probabilities(im, IS_TEMPERATURE))
        .collect::<Result<Vec<_>>>()?;
    inception_score(&rows)
}

fn feature_fit(images: &[Image], fm: &FeatureMap) -> Result<GaussianFit> {
    if images.len() < NUM_FEATURES + 1 {
        return Err(invalid(format!(
            "FID needs at least {} images per side, got {}",
            NUM_FEATURES + 1,
            images.len()
        )));
    }
    let rows: Vec<Vec<f32>> = images.iter().map(|im| fm.features(im).to_vec()).collect();
    GaussianFit::fit(&rows)
}

pub fn fid(a: &[Image], b: &[Image], fm: &FeatureMap) -> Result<f64> {
    frechet_distance(&feature_fit(a, fm)?, &feature_fit(b, fm)?)
}

/// Fraction of images whose oracle labels agree with `labels` on every
/// categorical attribute.
pub fn categorical_agreement(images: &[Image], labels: &[AttributeVector]) -> Result<f64> {
    if images.len() != labels.len() || images.is_empty() {
        return Err(invalid("need equally many images and labels"));
    }
    let ok = images
        .iter()
        .zip(labels)
        .filter(|(im, y)| {
            let got = oracle_label(im);
            Attribute::ALL
                .iter()
                .filter(|a| a.is_categorical())
                .all(|&a| got.get(a) == y.get(a))
        })
        .count();
    Ok(ok as f64 / images.len() as f64)
}

/// Output of `tunalab metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_kind: String,
    pub space: String,
    pub separability: SSReport,
    pub inception_score: f64,
    pub fid: f64,
    pub holdout_samples: usize,
    pub image_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub holdout_samples: usize,
    /// Generated images scored by IS and compared with world renders by FID.
    pub image_samples: usize,
    pub seed: u64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            holdout_samples: crate::latent::DEFAULT_HOLDOUT_SAMPLES,
            image_samples: 500,
            seed: 0,
        }
    }
}

const WORLD_STREAM: u64 = 0x776f;

/// Separability of a feature model on held-out draws, plus IS and FID of
/// the bundle's generations against the world they were trained on.
pub fn evaluate(bundle: &GeneratorBundle, model: &FeatureModel, cfg: &MetricsConfig) -> Result<MetricsReport> {
    if cfg.image_samples > cfg.holdout_samples {
        return Err(invalid("image samples cannot exceed holdout samples"));
    }
    let root = RngState::new(cfg.seed);
    let holdout = sample_latents(bundle, cfg.holdout_samples, &mut root.split(HOLDOUT_STREAM))?;
    let tables = model_tables(model, holdout.latents(model.space), &holdout.labels)?;
    let separability = separability_score(&tables)?;
    let m = cfg.image_samples;
    let ws = Matrix::from_vec(m, bundle.w_dim(), holdout.w.as_slice()[..m * bundle.w_dim()].to_vec())?;
    let generated = bundle.synthesize_batch(&ws)?;
    let world = sample_world(m, &mut root.split(WORLD_STREAM), &bundle.world)?;
    let real: Vec<Image> = world.records.iter().map(|r| r.image.clone()).collect();
    Ok(MetricsReport {
        model_kind: model.kind().name().to_string(),
        space: model.space.to_string(),
        separability,
        inception_score: image_inception_score(&generated)?,
        fid: fid(&generated, &real, &FeatureMap::new())?,
        holdout_samples: cfg.holdout_samples,
        image_samples: m,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(c: [[u64; 2]; 2]) -> ConfusionTable {
        ConfusionTable::new(c.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn entropy_reference_values() {
        assert_eq!(conditional_entropy(&table([[50, 0], [0, 50]])).unwrap(), 0.0);
        let h = conditional_entropy(&table([[45, 5], [15, 35]])).unwrap();
        assert!((h - 0.4881).abs() < 1e-3, "{h}");
        let h = conditional_entropy(&table([[25, 25], [25, 25]])).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(conditional_entropy(&table([[0, 0], [0, 0]])).is_err());
        assert!(ConfusionTable::new(vec![vec![1, 2]]).is_err());
    }

    #[test]
    fn ss_is_product_of_attribute_scores() {
        let perfect = separability_score(&[
            ("a".into(), table([[3, 0], [0, 4]])),
            ("b".into(), table([[9, 0], [0, 1]])),
        ])
        .unwrap();
        assert_eq!(perfect.overall, 1.0);
        let random = separability_score(&[("a".into(), table([[25, 25], [25, 25]]))]).unwrap();
        assert!((random.overall - 2.0).abs() < 1e-6);
        assert!(separability_score(&[]).is_err());
    }

    #[test]
    fn inception_score_extremes() {
        let uniform = vec![vec![0.25; 4]; 10];
        assert!((inception_score(&uniform).unwrap() - 1.0).abs() < 1e-12);
        let spread: Vec<Vec<f64>> = (0..8)
            .map(|i| (0..4).map(|k| (k == i % 4) as u8 as f64).collect())
            .collect();
        assert!((inception_score(&spread).unwrap() - 4.0).abs() < 1e-6);
        let same = vec![vec![0.0, 1.0, 0.0, 0.0]; 5];
        assert!((inception_score(&same).unwrap() - 1.0).abs() < 1e-12);
        assert!(inception_score(&[vec![0.5, 0.6]]).is_err());
    }

    #[test]
    fn class_probabilities_follow_oracle() {
        use crate::faceworld::render;
        let y = AttributeVector::new(1.0, -1.0, 0.0, 0.5, 0.75).unwrap();
        let p = class_probabilities(&render(&y, &[0.0; 11]).unwrap(), IS_TEMPERATURE).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p[2] > 0.9, "{p:?}");
    }

    #[test]
    fn fid_of_identical_sets_is_zero() {
        use crate::faceworld::{sample_world, WorldConfig};
        use crate::ndmath::RngState;
        let d = sample_world(60, &mut RngState::new(4), &WorldConfig::default()).unwrap();
        let imgs: Vec<Image> = d.records.iter().map(|r| r.image.clone()).collect();
        let fm = FeatureMap::new();
        assert!(fid(&imgs, &imgs, &fm).unwrap().abs() < 1e-6);
        let (a, b) = imgs.split_at(30);
        assert!((fid(a, b, &fm).unwrap() - fid(b, a, &fm).unwrap()).abs() < 1e-6);
        assert!(fid(&imgs[..5], &imgs, &fm).is_err());
    }
}

//! Maps from a latent space to attributes: per-attribute linear heads and a
//! small multi-output network, plus edit-direction extraction.

mod data;
mod persist;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::faceworld::{Attribute, AttributeVector, NUM_ATTRIBUTES};
use crate::generator::{LatentVector, Space};
use crate::ndmath::{AdamConfig, Matrix, RngState};
use crate::neural::{
    backward_from_pre, forward, train, Activation, ColumnLoss, Dataset, LossKind, MlpParams, MlpSpec, TrainConfig,
};

pub use data::{
    fit_from_bundle, fit_kind, sample_latents, LatentSample, DEFAULT_HOLDOUT_SAMPLES, DEFAULT_TRAIN_SAMPLES,
    FIT_STREAM, HOLDOUT_STREAM, TRAIN_STREAM,
};
pub use persist::{FEATURE_MODEL_MAGIC, FEATURE_MODEL_VERSION};

/// Loss used by a linear head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Logistic,
    Regression,
    Hinge,
}

impl HeadKind {
    fn id(self) -> u8 {
        match self {
            HeadKind::Logistic => 0,
            HeadKind::Regression => 1,
            HeadKind::Hinge => 2,
        }
    }

    fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(HeadKind::Logistic),
            1 => Ok(HeadKind::Regression),
            2 => Ok(HeadKind::Hinge),
            _ => Err(Error::Format(format!("unknown head kind {id}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Nonlinear,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Nonlinear => "nonlinear",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "nonlinear" => Ok(ModelKind::Nonlinear),
            _ => Err(invalid(format!("unknown model kind `{s}`"))),
        }
    }
}

/// One attribute's affine score `w·u + b` on standardized inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead {
    pub attribute: Attribute,
    pub kind: HeadKind,
    pub weight: Vec<f32>,
    pub bias: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Linear(Vec<LinearHead>),
    /// Output column j is a logit for categorical attributes and a
    /// standardized value for numeric ones.
    Nonlinear {
        spec: MlpSpec,
        params: MlpParams,
    },
}

/// Held-out quality per attribute: accuracy for categorical, R² for numeric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub train_samples: u32,
    pub holdout_samples: u32,
    pub scores: [f32; NUM_ATTRIBUTES],
}

impl FitReport {
    pub fn categorical_accuracy(&self) -> f32 {
        let cats: Vec<f32> = Attribute::ALL
            .iter()
            .filter(|a| a.is_categorical())
            .map(|a| self.scores[a.index()])
            .collect();
        cats.iter().sum::<f32>() / cats.len() as f32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub space: Space,
    /// Inputs are standardized as `(x - input_mean) / input_scale` before the body.
    pub input_mean: Vec<f32>,
    pub input_scale: Vec<f32>,
    pub body: ModelBody,
    pub report: FitReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearHyper {
    /// Loss for categorical attributes; numeric attributes always use regression.
    pub categorical_head: HeadKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub l2: f32,
    /// Inverse class-frequency sample weights for categorical heads.
    pub balance: bool,
    pub holdout_fraction: f32,
}

impl Default for LinearHyper {
    fn default() -> Self {
        Self {
            categorical_head: HeadKind::Logistic,
            epochs: 60,
            batch_size: 64,
            learning_rate: 0.01,
            l2: 1e-4,
            balance: false,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearHyper {
    pub hidden: Vec<usize>,
    pub dropout: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub l2: f32,
    pub balance: bool,
    pub holdout_fraction: f32,
}

impl Default for NonlinearHyper {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            dropout: 0.3,
            epochs: 40,
            batch_size: 64,
            learning_rate: 3e-3,
            l2: 1e-4,
            balance: false,
            holdout_fraction: 0.2,
        }
    }
}

/// Latents with their attribute labels, one row per sample.
#[derive(Debug, Clone)]
pub struct LabeledLatents {
    pub space: Space,
    pub latents: Matrix,
    pub labels: Vec<AttributeVector>,
}

impl LabeledLatents {
    pub fn new(space: Space, latents: Matrix, labels: Vec<AttributeVector>) -> Result<Self> {
        if latents.rows() != labels.len() {
            return Err(invalid("latents and labels differ in length"));
        }
        if !latents.all_finite() {
            return Err(invalid("latents must be finite"));
        }
        Ok(Self { space, latents, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn split(&self, holdout: f32) -> Result<(Matrix, Vec<AttributeVector>, Matrix, Vec<AttributeVector>)> {
        if !(0.0..1.0).contains(&holdout) {
            return Err(invalid("holdout fraction must lie in [0, 1)"));
        }
        let n = self.len();
        let n_hold = ((n as f32) * holdout).round() as usize;
        let n_train = n - n_hold;
        let idx_train: Vec<usize> = (0..n_train).collect();
        let idx_hold: Vec<usize> = (n_train..n).collect();
        Ok((
            crate::neural::gather_rows(&self.latents, &idx_train),
            self.labels[..n_train].to_vec(),
            crate::neural::gather_rows(&self.latents, &idx_hold),
            self.labels[n_train..].to_vec(),
        ))
    }
}

const MIN_SAMPLES: usize = 100;

fn check_labels(labels: &[AttributeVector]) -> Result<()> {
    for a in Attribute::ALL {
        let first = labels[0].get(a);
        let varies = if a.is_categorical() {
            labels.iter().any(|y| y.get(a) != first)
        } else {
            labels.iter().any(|y| (y.get(a) - first).abs() > 1e-6)
        };
        if !varies {
            return Err(Error::DegenerateLabels {
                attribute: a.name().to_string(),
            });
        }
    }
    Ok(())
}

fn input_stats(x: &Matrix) -> (Vec<f32>, Vec<f32>) {
    let (n, d) = x.shape();
    let mut mean = vec![0.0f64; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += *v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0f64; d];
    for r in 0..n {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (*v as f64 - m).powi(2);
        }
    }
    let scale = var.iter().map(|s| ((s / n as f64).sqrt() as f32).max(1e-6)).collect();
    (mean.iter().map(|&m| m as f32).collect(), scale)
}

fn standardize_rows(x: &Matrix, mean: &[f32], scale: &[f32]) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        for ((v, m), s) in out.row_mut(r).iter_mut().zip(mean).zip(scale) {
            *v = (*v - m) / s;
        }
    }
    out
}

/// Per-sample weights making both classes of `attr` carry equal total weight.
fn balance_weights(labels: &[AttributeVector], attr: Attribute) -> Vec<f32> {
    let pos = labels.iter().filter(|y| y.get(attr) > 0.0).count() as f32;
    let neg = labels.len() as f32 - pos;
    let n = labels.len() as f32;
    labels
        .iter()
        .map(|y| {
            if y.get(attr) > 0.0 {
                0.5 * n / pos
            } else {
                0.5 * n / neg
            }
        })
        .collect()
}

fn r_squared(pred: &[f32], truth: &[f32]) -> f32 {
    let m = truth.iter().sum::<f32>() / truth.len() as f32;
    let ss_tot: f32 = truth.iter().map(|t| (t - m).powi(2)).sum();
    let ss_res: f32 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    if ss_tot <= 0.0 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

impl FeatureModel {
    pub fn kind(&self) -> ModelKind {
        match self.body {
            ModelBody::Linear(_) => ModelKind::Linear,
            ModelBody::Nonlinear { .. } => ModelKind::Nonlinear,
        }
    }

    pub fn dim(&self) -> usize {
        self.input_mean.len()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(invalid(format!(
                "feature model expects {} latent entries, got {}",
                self.dim(),
                x.cols()
            )));
        }
        Ok(())
    }

    fn expect(&self, latent: &LatentVector) -> Result<Matrix> {
        if latent.space != self.space {
            return Err(invalid(format!(
                "feature model works in {} space, latent is in {}",
                self.space, latent.space
            )));
        }
        let x = Matrix::from_vec(1, latent.len(), latent.values.clone())?;
        self.check_input(&x)?;
        Ok(x)
    }

    /// Raw output scores per attribute: logits or margins for categorical
    /// heads, standardized values for numeric ones.
    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let u = standardize_rows(x, &self.input_mean, &self.input_scale);
        match &self.body {
            ModelBody::Linear(heads) => {
                let mut out = Matrix::zeros(u.rows(), NUM_ATTRIBUTES);
                for h in heads {
                    for r in 0..u.rows() {
                        let s = crate::ndmath::dot(u.row(r), &h.weight) + h.bias;
                        out.set(r, h.attribute.index(), s);
                    }
                }
                Ok(out)
            }
            ModelBody::Nonlinear { spec, params } => Ok(forward(spec, params, &u)?.pre.pop().unwrap()),
        }
    }

    /// Categorical decision: positive score means class +1 (probability above
    /// one half); ties go to the negative class.
    fn label_from_scores(scores: &[f32]) -> AttributeVector {
        let mut arr = [0.0; NUM_ATTRIBUTES];
        for a in Attribute::ALL {
            let s = scores[a.index()];
            arr[a.index()] = if a.is_categorical() {
                if s > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            } else {
                let (lo, hi) = a.range();
                a.destandardize(s).clamp(lo, hi)
            };
        }
        AttributeVector::from_array(arr)
    }

    pub fn predict(&self, latent: &LatentVector) -> Result<AttributeVector> {
        let s = self.scores(&self.expect(latent)?)?;
        Ok(Self::label_from_scores(s.row(0)))
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<AttributeVector>> {
        let s = self.scores(x)?;
        Ok((0..s.rows()).map(|r| Self::label_from_scores(s.row(r))).collect())
    }

    /// Readout in label units: `2σ(logit) - 1` for logistic and network
    /// categorical heads (raw margin for hinge), standardized value for numerics.
    pub fn readout(&self, latent: &[f32]) -> Result<[f32; NUM_ATTRIBUTES]> {
        Ok(self.readout_with_vjp(latent, None)?.0)
    }

    /// Readout plus, when `grad` is given, the latent gradient of `grad · readout`.
    pub fn readout_with_vjp(
        &self,
        latent: &[f32],
        grad: Option<&[f32; NUM_ATTRIBUTES]>,
    ) -> Result<([f32; NUM_ATTRIBUTES], Vec<f32>)> {
        let (s, _) = self.scores_with_vjp(latent, None)?;
        let mut out = [0.0; NUM_ATTRIBUTES];
        let mut chain = [0.0; NUM_ATTRIBUTES];
        for a in Attribute::ALL {
            let j = a.index();
            let (v, dv) = if self.squashes(a) {
                let p = crate::neural::sigmoid(s[j]);
                (2.0 * p - 1.0, 2.0 * p * (1.0 - p))
            } else {
                (s[j], 1.0)
            };
            out[j] = v;
            chain[j] = grad.map_or(0.0, |g| g[j] * dv);
        }
        if grad.is_none() {
            return Ok((out, vec![0.0; self.dim()]));
        }
        let (_, dx) = self.scores_with_vjp(latent, Some(&chain))?;
        Ok((out, dx))
    }

    /// Whether the readout of `a` is `2σ(score) - 1` rather than the raw score.
    fn squashes(&self, a: Attribute) -> bool {
        match &self.body {
            ModelBody::Linear(heads) => heads.iter().any(|h| h.attribute == a && h.kind == HeadKind::Logistic),
            ModelBody::Nonlinear { .. } => a.is_categorical(),
        }
    }

    /// Raw scores (see [`FeatureModel::scores`]) of one latent plus, when
    /// `grad` is given, the latent gradient of `grad · scores`.
    pub fn scores_with_vjp(
        &self,
        latent: &[f32],
        grad: Option<&[f32; NUM_ATTRIBUTES]>,
    ) -> Result<([f32; NUM_ATTRIBUTES], Vec<f32>)> {
        let x = Matrix::from_vec(1, latent.len(), latent.to_vec())?;
        self.check_input(&x)?;
        let u = standardize_rows(&x, &self.input_mean, &self.input_scale);
        let mut out = [0.0; NUM_ATTRIBUTES];
        let mut du = vec![0.0f32; self.dim()];
        match &self.body {
            ModelBody::Linear(heads) => {
                for h in heads {
                    let j = h.attribute.index();
                    out[j] = crate::ndmath::dot(u.row(0), &h.weight) + h.bias;
                    if let Some(g) = grad {
                        for (d, w) in du.iter_mut().zip(&h.weight) {
                            *d += g[j] * w;
                        }
                    }
                }
            }
            ModelBody::Nonlinear { spec, params } => {
                let acts = forward(spec, params, &u)?;
                out.copy_from_slice(acts.pre.last().unwrap().row(0));
                if let Some(g) = grad {
                    let gpre = Matrix::from_vec(1, NUM_ATTRIBUTES, g.to_vec())?;
                    du = backward_from_pre(spec, params, &acts, gpre)?.input.row(0).to_vec();
                }
            }
        }
        let dx = du.iter().zip(&self.input_scale).map(|(d, s)| d / s).collect();
        Ok((out, dx))
    }

    /// Unit edit direction of a linear head, in the model's latent coordinates.
    pub fn direction(&self, attr: Attribute) -> Result<LatentVector> {
        let ModelBody::Linear(heads) = &self.body else {
            return Err(Error::UnsupportedForKind {
                operation: "direction",
                kind: "nonlinear",
            });
        };
        let h = heads
            .iter()
            .find(|h| h.attribute == attr)
            .ok_or_else(|| invalid(format!("model has no head for {attr}")))?;
        let raw: Vec<f32> = h.weight.iter().zip(&self.input_scale).map(|(w, s)| w / s).collect();
        let n = crate::ndmath::norm(&raw);
        if !(n > 0.0) {
            return Err(Error::NumericDomain(format!("{attr} head has zero weight")));
        }
        LatentVector::new(self.space, raw.iter().map(|v| v / n).collect())
    }
}

fn holdout_scores(model: &FeatureModel, x: &Matrix, labels: &[AttributeVector]) -> Result<[f32; NUM_ATTRIBUTES]> {
    let mut scores = [0.0; NUM_ATTRIBUTES];
    if labels.is_empty() {
        return Ok(scores);
    }
    let raw = model.scores(x)?;
    for a in Attribute::ALL {
        let j = a.index();
        if a.is_categorical() {
            let correct = (0..labels.len())
                .filter(|&r| (raw.get(r, j) > 0.0) == (labels[r].get(a) > 0.0))
                .count();
            scores[j] = correct as f32 / labels.len() as f32;
        } else {
            let pred: Vec<f32> = (0..labels.len()).map(|r| raw.get(r, j)).collect();
            let truth: Vec<f32> = labels.iter().map(|y| a.standardize(y.get(a))).collect();
            scores[j] = r_squared(&pred, &truth);
        }
    }
    Ok(scores)
}

fn validate_data(data: &LabeledLatents) -> Result<()> {
    if data.len() < MIN_SAMPLES {
        return Err(invalid(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            data.len()
        )));
    }
    check_labels(&data.labels)
}

/// Fits one linear head per attribute by mini-batch gradient descent with an
/// L2 penalty. The last `holdout_fraction` of the rows is held out for the report.
pub fn fit_linear(data: &LabeledLatents, hyper: &LinearHyper, rng: &mut RngState) -> Result<FeatureModel> {
    validate_data(data)?;
    let (xt, yt, xh, yh) = data.split(hyper.holdout_fraction)?;
    check_labels(&yt)?;
    let (mean, scale) = input_stats(&xt);
    let u = standardize_rows(&xt, &mean, &scale);
    let dim = u.cols();
    let cfg = TrainConfig {
        epochs: hyper.epochs,
        batch_size: hyper.batch_size,
        adam: AdamConfig::with_lr(hyper.learning_rate),
        l2: hyper.l2,
    };
    let mut heads = Vec::with_capacity(NUM_ATTRIBUTES);
    for a in Attribute::ALL {
        let kind = if a.is_categorical() {
            hyper.categorical_head
        } else {
            HeadKind::Regression
        };
        let (act, loss, targets): (Activation, LossKind, Vec<f32>) = match kind {
            HeadKind::Logistic => (
                Activation::Sigmoid,
                LossKind::BinaryCrossEntropy,
                yt.iter().map(|y| if y.get(a) > 0.0 { 1.0 } else { 0.0 }).collect(),
            ),
            HeadKind::Hinge => (
                Activation::Identity,
                LossKind::Hinge,
                yt.iter().map(|y| if y.get(a) > 0.0 { 1.0 } else { -1.0 }).collect(),
            ),
            HeadKind::Regression => (
                Activation::Identity,
                LossKind::Mse,
                yt.iter()
                    .map(|y| {
                        if a.is_categorical() {
                            y.get(a)
                        } else {
                            a.standardize(y.get(a))
                        }
                    })
                    .collect(),
            ),
        };
        let mut ds = Dataset::new(u.clone(), Matrix::from_vec(yt.len(), 1, targets)?)?;
        if hyper.balance && a.is_categorical() {
            ds.weights = Some(balance_weights(&yt, a));
        }
        let spec = MlpSpec::new(vec![dim, 1], act);
        let out = train(&spec, &ds, &loss, &cfg, &mut rng.split(a.index() as u64))?;
        let layer = &out.params.layers[0];
        heads.push(LinearHead {
            attribute: a,
            kind,
            weight: layer.weight.row(0).to_vec(),
            bias: layer.bias[0],
        });
    }
    let mut model = FeatureModel {
        space: data.space,
        input_mean: mean,
        input_scale: scale,
        body: ModelBody::Linear(heads),
        report: FitReport {
            train_samples: yt.len() as u32,
            holdout_samples: yh.len() as u32,
            scores: [0.0; NUM_ATTRIBUTES],
        },
    };
    model.report.scores = holdout_scores(&model, &xh, &yh)?;
    Ok(model)
}

/// Fits the multi-output network: leaky-relu hidden layers with dropout,
/// logit cross-entropy on categorical outputs and squared error on
/// standardized numeric outputs, all attributes weighted equally.
pub fn fit_nonlinear(data: &LabeledLatents, hyper: &NonlinearHyper, rng: &mut RngState) -> Result<FeatureModel> {
    validate_data(data)?;
    if hyper.hidden.is_empty() || hyper.hidden.contains(&0) {
        return Err(invalid("nonlinear model needs nonempty hidden widths"));
    }
    let (xt, yt, xh, yh) = data.split(hyper.holdout_fraction)?;
    check_labels(&yt)?;
    let (mean, scale) = input_stats(&xt);
    let u = standardize_rows(&xt, &mean, &scale);
    let mut widths = vec![u.cols()];
    widths.extend_from_slice(&hyper.hidden);
    widths.push(NUM_ATTRIBUTES);
    let spec = MlpSpec::new(widths, Activation::Identity).with_dropout(hyper.dropout);
    let mut targets = Vec::with_capacity(yt.len() * NUM_ATTRIBUTES);
    for y in &yt {
        for a in Attribute::ALL {
            targets.push(if a.is_categorical() {
                if y.get(a) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                a.standardize(y.get(a))
            });
        }
    }
    let mut ds = Dataset::new(u, Matrix::from_vec(yt.len(), NUM_ATTRIBUTES, targets)?)?;
    if hyper.balance {
        // average of the per-attribute balancing weights over categorical attributes
        let cats: Vec<Vec<f32>> = Attribute::ALL
            .into_iter()
            .filter(|a| a.is_categorical())
            .map(|a| balance_weights(&yt, a))
            .collect();
        ds.weights = Some(
            (0..yt.len())
                .map(|i| cats.iter().map(|w| w[i]).sum::<f32>() / cats.len() as f32)
                .collect(),
        );
    }
    let loss = LossKind::Composite(
        Attribute::ALL
            .iter()
            .map(|a| {
                if a.is_categorical() {
                    ColumnLoss::LogitCrossEntropy
                } else {
                    ColumnLoss::Mse
                }
            })
            .collect(),
    );
    let cfg = TrainConfig {
        epochs: hyper.epochs,
        batch_size: hyper.batch_size,
        adam: AdamConfig::with_lr(hyper.learning_rate),
        l2: hyper.l2,
    };
    let out = train(&spec, &ds, &loss, &cfg, rng)?;
    let mut model = FeatureModel {
        space: data.space,
        input_mean: mean,
        input_scale: scale,
        body: ModelBody::Nonlinear {
            spec,
            params: out.params,
        },
        report: FitReport {
            train_samples: yt.len() as u32,
            holdout_samples: yh.len() as u32,
            scores: [0.0; NUM_ATTRIBUTES],
        },
    };
    model.report.scores = holdout_scores(&model, &xh, &yh)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndmath::cosine;

    /// Labels driven by the sign of chosen latent coordinates.
    fn axis_data(n: usize, seed: u64, scale: f32) -> LabeledLatents {
        let mut rng = RngState::new(seed);
        let mut xs = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let x = rng.normal_vec(6);
            labels.push(AttributeVector {
                glasses: if x[0] > 0.0 { 1.0 } else { -1.0 },
                beard: if x[1] + 0.5 * x[2] > 0.3 { 1.0 } else { -1.0 },
                smile: (0.5 * x[3]).clamp(-1.0, 1.0),
                hair_length: (0.5 + 0.2 * x[4]).clamp(0.0, 1.0),
                face_width: (0.75 + 0.1 * x[5]).clamp(0.5, 1.0),
            });
            xs.extend(x.iter().map(|v| v * scale));
        }
        LabeledLatents::new(Space::Z, Matrix::from_vec(n, 6, xs).unwrap(), labels).unwrap()
    }

    #[test]
    fn linear_direction_finds_the_axis() {
        let data = axis_data(1000, 1, 1.0);
        let m = fit_linear(&data, &LinearHyper::default(), &mut RngState::new(2)).unwrap();
        let d = m.direction(Attribute::Glasses).unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-6);
        assert!(d.values[0] >= 0.99, "{:?}", d.values);
        assert!(m.report.scores[0] >= 0.95, "{:?}", m.report);
        assert!(m.report.scores[Attribute::Smile.index()] > 0.9);
    }

    #[test]
    fn direction_survives_rescaled_latents() {
        let a = fit_linear(&axis_data(1000, 3, 1.0), &LinearHyper::default(), &mut RngState::new(4)).unwrap();
        let b = fit_linear(&axis_data(1000, 3, 2.0), &LinearHyper::default(), &mut RngState::new(4)).unwrap();
        for attr in Attribute::ALL {
            let c = cosine(&a.direction(attr).unwrap().values, &b.direction(attr).unwrap().values);
            assert!(c >= 0.999, "{attr}: {c}");
        }
    }

    #[test]
    fn hinge_and_logistic_agree() {
        let data = axis_data(1000, 5, 1.0);
        let lg = fit_linear(&data, &LinearHyper::default(), &mut RngState::new(6)).unwrap();
        let hyper = LinearHyper {
            categorical_head: HeadKind::Hinge,
            ..LinearHyper::default()
        };
        let hg = fit_linear(&data, &hyper, &mut RngState::new(6)).unwrap();
        for attr in [Attribute::Glasses, Attribute::Beard] {
            let c = cosine(&lg.direction(attr).unwrap().values, &hg.direction(attr).unwrap().values);
            assert!(c >= 0.95, "{attr}: {c}");
        }
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let mut data = axis_data(200, 7, 1.0);
        data.labels.iter_mut().for_each(|y| y.glasses = 1.0);
        let err = fit_linear(&data, &LinearHyper::default(), &mut RngState::new(1)).unwrap_err();
        assert!(matches!(err, Error::DegenerateLabels { ref attribute } if attribute == "glasses"));
        let small = axis_data(50, 7, 1.0);
        assert!(fit_linear(&small, &LinearHyper::default(), &mut RngState::new(1)).is_err());
    }

    #[test]
    fn linear_decision_is_the_hyperplane_sign() {
        let data = axis_data(500, 8, 1.0);
        let m = fit_linear(&data, &LinearHyper::default(), &mut RngState::new(9)).unwrap();
        let ModelBody::Linear(heads) = &m.body else { panic!() };
        let h = &heads[0];
        let mut rng = RngState::new(10);
        for _ in 0..200 {
            let x = rng.normal_vec(6);
            let u: Vec<f32> = x
                .iter()
                .zip(&m.input_mean)
                .zip(&m.input_scale)
                .map(|((v, mu), s)| (v - mu) / s)
                .collect();
            let s = crate::ndmath::dot(&u, &h.weight) + h.bias;
            let y = m.predict(&LatentVector::z(x).unwrap()).unwrap();
            assert_eq!(y.glasses, if s > 0.0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn nonlinear_fits_and_refuses_direction() {
        let data = axis_data(2000, 11, 1.0);
        let m = fit_nonlinear(&data, &NonlinearHyper::default(), &mut RngState::new(12)).unwrap();
        assert!(m.report.categorical_accuracy() > 0.95, "{:?}", m.report);
        assert!(matches!(
            m.direction(Attribute::Glasses),
            Err(Error::UnsupportedForKind { .. })
        ));
        let x = LatentVector::z(vec![0.3; 6]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), m.predict(&x).unwrap());
        assert!(m.predict(&LatentVector::w(vec![0.3; 6]).unwrap()).is_err());
    }

    #[test]
    fn readout_gradient_matches_finite_differences() {
        let data = axis_data(500, 13, 1.0);
        let hyper = NonlinearHyper {
            epochs: 5,
            hidden: vec![16],
            ..NonlinearHyper::default()
        };
        let nl = fit_nonlinear(&data, &hyper, &mut RngState::new(14)).unwrap();
        let lin = fit_linear(
            &data,
            &LinearHyper {
                epochs: 5,
                ..LinearHyper::default()
            },
            &mut RngState::new(15),
        )
        .unwrap();
        let mut rng = RngState::new(16);
        for m in [&nl, &lin] {
            for _ in 0..5 {
                let x: Vec<f32> = rng.normal_vec(6);
                let g: [f32; NUM_ATTRIBUTES] = std::array::from_fn(|_| rng.normal());
                let raw = |v: &[f32]| m.scores_with_vjp(v, None).unwrap().0;
                let squashed = |v: &[f32]| m.readout(v).unwrap();
                let (_, via_readout) = m.readout_with_vjp(&x, Some(&g)).unwrap();
                let (_, via_scores) = m.scores_with_vjp(&x, Some(&g)).unwrap();
                type Readout<'a> = &'a dyn Fn(&[f32]) -> [f32; NUM_ATTRIBUTES];
                let checks: [(Readout, Vec<f32>); 2] = [(&squashed, via_readout), (&raw, via_scores)];
                for (out, analytic) in checks {
                    let f = |v: &[f32]| -> f64 { out(v).iter().zip(&g).map(|(a, b)| (*a as f64) * (*b as f64)).sum() };
                    for k in 0..6 {
                        let h = 1e-3;
                        let mut up = x.clone();
                        let mut dn = x.clone();
                        up[k] += h;
                        dn[k] -= h;
                        let numeric = (f(&up) - f(&dn)) / (2.0 * h as f64);
                        let a = analytic[k] as f64;
                        assert!(
                            (a - numeric).abs() <= 1e-2 * a.abs().max(numeric.abs()).max(0.1),
                            "{a} vs {numeric}"
                        );
                    }
                }
            }
        }
    }
}

//! Latent editing: linear and model-guided traversal, inversion of images
//! into W, interpolation, and the end-to-end edit request.

mod invert;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::faceworld::{oracle_label, Attribute, AttributeVector, Image, NUM_ATTRIBUTES};
use crate::generator::{GeneratorBundle, LatentVector, Space};
use crate::latent::{FeatureModel, ModelKind};
use crate::ndmath::{norm, RngState};

pub use invert::{invert, InversionObjective, InversionResult, InvertConfig};

/// A traversal: one latent, image and oracle readout per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub space: Space,
    pub latents: Vec<LatentVector>,
    /// α for linear traversal, iteration index for descent.
    pub coefficients: Vec<f32>,
    pub images: Vec<Image>,
    pub readouts: Vec<AttributeVector>,
    /// Whether a descent reached its target; always true for linear traversal.
    pub converged: bool,
}

impl Trajectory {
    fn new(space: Space) -> Self {
        Self {
            space,
            latents: Vec::new(),
            coefficients: Vec::new(),
            images: Vec::new(),
            readouts: Vec::new(),
            converged: true,
        }
    }

    fn push(&mut self, latent: LatentVector, coefficient: f32, image: Image) {
        self.readouts.push(oracle_label(&image));
        self.latents.push(latent);
        self.coefficients.push(coefficient);
        self.images.push(image);
    }

    pub fn len(&self) -> usize {
        self.latents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latents.is_empty()
    }

    pub fn final_latent(&self) -> &LatentVector {
        self.latents.last().expect("trajectory is never empty")
    }

    pub fn final_image(&self) -> &Image {
        self.images.last().expect("trajectory is never empty")
    }

    pub fn final_readout(&self) -> &AttributeVector {
        self.readouts.last().expect("trajectory is never empty")
    }

    /// Pixel L2 distance from the previous step's image (0 for the first step).
    pub fn displacements(&self) -> Vec<f32> {
        let mut out = vec![0.0];
        out.extend(self.images.windows(2).map(|p| p[0].l2_distance(&p[1])));
        out
    }

    /// Euclidean distance between the first and last latent.
    pub fn latent_displacement(&self) -> f32 {
        let a = &self.latents[0].values;
        let b = &self.final_latent().values;
        norm(&a.iter().zip(b).map(|(x, y)| y - x).collect::<Vec<_>>())
    }

    /// CSV with columns `step, alpha_or_iter, <space>0.., <attributes>.., displacement`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.latents.first().map_or(0, |l| l.len());
        let mut header = vec!["step".to_string(), "alpha_or_iter".to_string()];
        header.extend((0..dim).map(|i| format!("{}{i}", self.space)));
        header.extend(Attribute::ALL.iter().map(|a| a.name().to_string()));
        header.push("displacement".into());
        w.write_record(&header).map_err(csv_error)?;
        for (i, d) in self.displacements().into_iter().enumerate() {
            let mut row = vec![i.to_string(), self.coefficients[i].to_string()];
            row.extend(self.latents[i].values.iter().map(|v| v.to_string()));
            row.extend(self.readouts[i].to_array().iter().map(|v| v.to_string()));
            row.push(d.to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn check_unit(direction: &LatentVector) -> Result<()> {
    let n = direction.norm();
    if (n - 1.0).abs() > 1e-3 {
        return Err(invalid(format!("direction must be unit norm, got norm {n}")));
    }
    Ok(())
}

/// Images of `start + α·direction` for each α in the grid.
pub fn linear_traverse(
    bundle: &GeneratorBundle,
    start: &LatentVector,
    direction: &LatentVector,
    alphas: &[f32],
) -> Result<Trajectory> {
    if start.space != direction.space {
        return Err(invalid(format!(
            "start is in {} space but direction is in {}",
            start.space, direction.space
        )));
    }
    if alphas.is_empty() {
        return Err(invalid("alpha grid is empty"));
    }
    check_unit(direction)?;
    let mut traj = Trajectory::new(start.space);
    for &a in alphas {
        let v = start.offset(&direction.values, a)?;
        let img = bundle.image_of(&v)?;
        traj.push(v, a, img);
    }
    Ok(traj)
}

/// Descent settings for model-guided traversal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub steps: usize,
    pub rate: f32,
    /// Weight of `‖v − v₀‖²`.
    pub anchor: f32,
    /// Stop once every residual is within this distance of zero.
    pub tolerance: f32,
    /// Logit a categorical attribute must clear on its target side when the
    /// target asks for full confidence.
    pub margin: f32,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            rate: 0.01,
            anchor: 0.1,
            tolerance: 0.05,
            margin: 8.0,
        }
    }
}

impl DescentConfig {
    fn validate(&self) -> Result<()> {
        if self.steps == 0
            || !(self.rate > 0.0)
            || !(self.anchor >= 0.0)
            || !(self.tolerance >= 0.0)
            || !(self.margin > 0.0)
        {
            return Err(invalid(
                "descent needs steps > 0, rate > 0, margin > 0, anchor >= 0, tolerance >= 0",
            ));
        }
        Ok(())
    }
}

/// Target of a descent. Categorical entries are signed class confidences in
/// [-1, 1] (the logit must reach `margin·|c|` on the side of `sign(c)`,
/// and 0 leaves the attribute free); numeric entries are standardized values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentTarget(pub [f32; NUM_ATTRIBUTES]);

impl DescentTarget {
    /// Target that keeps every attribute where the scores currently put it.
    pub fn hold(scores: &[f32; NUM_ATTRIBUTES], margin: f32) -> Self {
        let mut t = *scores;
        for a in Attribute::ALL.into_iter().filter(|a| a.is_categorical()) {
            t[a.index()] = (scores[a.index()] / margin).clamp(-1.0, 1.0);
        }
        Self(t)
    }

    /// Requested change from the current scores. Categorical deltas are in
    /// class units (+1 moves from confidently absent to confidently present);
    /// numeric deltas are in standardized units, clamped to the attribute range.
    pub fn shifted(scores: &[f32; NUM_ATTRIBUTES], deltas: &[f32; NUM_ATTRIBUTES], margin: f32) -> Self {
        let mut t = Self::hold(scores, margin).0;
        for a in Attribute::ALL {
            let j = a.index();
            if deltas[j] == 0.0 {
                continue;
            }
            t[j] = if a.is_categorical() {
                (t[j] + 2.0 * deltas[j]).clamp(-1.0, 1.0)
            } else {
                let (lo, hi) = a.range();
                (t[j] + deltas[j]).clamp(a.standardize(lo), a.standardize(hi))
            };
        }
        Self(t)
    }

    /// Target matching oracle labels.
    pub fn of_labels(y: &AttributeVector) -> Self {
        let mut t = [0.0; NUM_ATTRIBUTES];
        for a in Attribute::ALL {
            let v = y.get(a);
            t[a.index()] = if a.is_categorical() {
                v.clamp(-1.0, 1.0)
            } else {
                a.standardize(v)
            };
        }
        Self(t)
    }

    /// Per-attribute residuals whose squares make up the fit term. Categorical
    /// residuals are hinge shortfalls, zero once the margin is met.
    fn residuals(&self, scores: &[f32; NUM_ATTRIBUTES], margin: f32) -> [f32; NUM_ATTRIBUTES] {
        std::array::from_fn(|j| {
            let a = Attribute::ALL[j];
            let t = self.0[j];
            if a.is_categorical() {
                if t == 0.0 {
                    0.0
                } else {
                    let side = t.signum();
                    // negative residual = shortfall on the target side
                    side * (side * scores[j] - margin * t.abs()).min(0.0)
                }
            } else {
                scores[j] - t
            }
        })
    }
}

fn descent_loss(res: &[f32; NUM_ATTRIBUTES], v: &[f32], v0: &[f32], anchor: f32) -> f32 {
    let fit: f32 = res.iter().map(|r| r * r).sum();
    let drift: f32 = v.iter().zip(v0).map(|(a, b)| (a - b) * (a - b)).sum();
    fit + anchor * drift
}

/// Gradient descent on `L(v) = Σ r_j(f(v))² + λ‖v − v₀‖²` with the model
/// frozen, `r` being the residuals against `target`. A step that would raise
/// L is retried at half the rate. Returns the trajectory and the loss at
/// every recorded step.
pub fn descend_to_target(
    bundle: &GeneratorBundle,
    model: &FeatureModel,
    start: &LatentVector,
    target: &DescentTarget,
    cfg: &DescentConfig,
) -> Result<(Trajectory, Vec<f32>)> {
    cfg.validate()?;
    if model.space != start.space {
        return Err(invalid(format!(
            "model works in {} space, start is in {}",
            model.space, start.space
        )));
    }
    let v0 = start.values.clone();
    let mut v = v0.clone();
    let mut traj = Trajectory::new(start.space);
    traj.push(start.clone(), 0.0, bundle.image_of(start)?);
    let mut res = target.residuals(&model.scores_with_vjp(&v, None)?.0, cfg.margin);
    let mut loss = descent_loss(&res, &v, &v0, cfg.anchor);
    let mut losses = vec![loss];
    let reached = |r: &[f32; NUM_ATTRIBUTES]| r.iter().all(|x| x.abs() <= cfg.tolerance);
    traj.converged = reached(&res);
    let mut step = 0;
    while step < cfg.steps && !traj.converged {
        step += 1;
        let g: [f32; NUM_ATTRIBUTES] = res.map(|r| 2.0 * r);
        let (_, gv) = model.scores_with_vjp(&v, Some(&g))?;
        let grad: Vec<f32> = gv
            .iter()
            .zip(v.iter().zip(&v0))
            .map(|(d, (a, b))| d + 2.0 * cfg.anchor * (a - b))
            .collect();
        if grad.iter().any(|x| !x.is_finite()) {
            return Err(Error::TraversalDiverged { step });
        }
        let mut rate = cfg.rate;
        let mut accepted = None;
        for _ in 0..20 {
            let cand: Vec<f32> = v.iter().zip(&grad).map(|(a, d)| a - rate * d).collect();
            let rc = target.residuals(&model.scores_with_vjp(&cand, None)?.0, cfg.margin);
            let lc = descent_loss(&rc, &cand, &v0, cfg.anchor);
            if !lc.is_finite() {
                return Err(Error::TraversalDiverged { step });
            }
            if lc <= loss {
                accepted = Some((cand, rc, lc));
                break;
            }
            rate *= 0.5;
        }
        // no decreasing step at any rate: a stationary point
        let Some((cand, rc, lc)) = accepted else { break };
        v = cand;
        res = rc;
        loss = lc;
        losses.push(loss);
        let lv = LatentVector::new(start.space, v.clone())?;
        let img = bundle.image_of(&lv)?;
        traj.push(lv, step as f32, img);
        traj.converged = reached(&res);
    }
    Ok((traj, losses))
}

/// Model-guided traversal by `Δy` from the start (see [`DescentTarget::shifted`]).
pub fn nonlinear_traverse(
    bundle: &GeneratorBundle,
    model: &FeatureModel,
    start: &LatentVector,
    deltas: &[f32; NUM_ATTRIBUTES],
    cfg: &DescentConfig,
) -> Result<Trajectory> {
    if model.space != start.space {
        return Err(invalid(format!(
            "model works in {} space, start is in {}",
            model.space, start.space
        )));
    }
    let s0 = model.scores_with_vjp(&start.values, None)?.0;
    let target = DescentTarget::shifted(&s0, deltas, cfg.margin);
    Ok(descend_to_target(bundle, model, start, &target, cfg)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationMode {
    Latent,
    Feature,
}

/// Images along a path between two latents. Latent mode blends the latents;
/// feature mode blends the endpoints' oracle labels and realizes each
/// waypoint by descent from the nearer endpoint.
pub fn interpolate(
    bundle: &GeneratorBundle,
    a: &LatentVector,
    b: &LatentVector,
    ts: &[f32],
    mode: InterpolationMode,
    model: Option<&FeatureModel>,
    cfg: &DescentConfig,
) -> Result<Vec<(LatentVector, Image)>> {
    if a.space != b.space || a.len() != b.len() {
        return Err(invalid("interpolation endpoints must share a space and dimension"));
    }
    if ts.is_empty() {
        return Err(invalid("t grid is empty"));
    }
    match mode {
        InterpolationMode::Latent => ts
            .iter()
            .map(|&t| {
                let v = LatentVector::new(
                    a.space,
                    a.values
                        .iter()
                        .zip(&b.values)
                        .map(|(x, y)| (1.0 - t) * x + t * y)
                        .collect(),
                )?;
                let img = bundle.image_of(&v)?;
                Ok((v, img))
            })
            .collect(),
        InterpolationMode::Feature => {
            let model = model.ok_or_else(|| invalid("feature-mode interpolation needs a feature model"))?;
            let ya = DescentTarget::of_labels(&oracle_label(&bundle.image_of(a)?)).0;
            let yb = DescentTarget::of_labels(&oracle_label(&bundle.image_of(b)?)).0;
            ts.iter()
                .map(|&t| {
                    let target = DescentTarget(std::array::from_fn(|j| (1.0 - t) * ya[j] + t * yb[j]));
                    let from = if t <= 0.5 { a } else { b };
                    let (traj, _) = descend_to_target(bundle, model, from, &target, cfg)?;
                    Ok((traj.final_latent().clone(), traj.final_image().clone()))
                })
                .collect()
        }
    }
}

/// Feature models for each (kind, space) pair that has one.
#[derive(Debug, Clone, Default)]
pub struct ModelSet {
    pub models: Vec<FeatureModel>,
}

impl ModelSet {
    pub fn new(models: Vec<FeatureModel>) -> Self {
        Self { models }
    }

    pub fn get(&self, kind: ModelKind, space: Space) -> Option<&FeatureModel> {
        self.models.iter().find(|m| m.kind() == kind && m.space == space)
    }

    pub fn require(&self, kind: ModelKind, space: Space) -> Result<&FeatureModel> {
        self.get(kind, space)
            .ok_or_else(|| invalid(format!("no {kind} feature model loaded for {space} space")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EditSource {
    /// `z ~ N(0, I)` drawn from the seed.
    Seed(u64),
    Latent(LatentVector),
    Image(Image),
}

/// z for a sampling seed.
pub fn seed_latent(bundle: &GeneratorBundle, seed: u64) -> LatentVector {
    LatentVector {
        space: Space::Z,
        values: RngState::new(seed).normal_vec(bundle.z_dim()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditRequest {
    pub source: EditSource,
    pub deltas: Vec<(Attribute, f32)>,
    pub space: Space,
    pub method: ModelKind,
    /// Linear step scale: the latent moves `alpha · Σ δ_a d_a`.
    pub alpha: f32,
    pub steps: usize,
    pub descent: DescentConfig,
    pub invert: InvertConfig,
    pub seed: u64,
}

impl EditRequest {
    pub fn new(source: EditSource, deltas: Vec<(Attribute, f32)>, space: Space, method: ModelKind) -> Self {
        Self {
            source,
            deltas,
            space,
            method,
            alpha: 3.0,
            steps: 16,
            descent: DescentConfig::default(),
            invert: InvertConfig::default(),
            seed: 0,
        }
    }

    pub fn delta_array(&self) -> Result<[f32; NUM_ATTRIBUTES]> {
        let mut d = [0.0; NUM_ATTRIBUTES];
        for &(a, v) in &self.deltas {
            if !v.is_finite() {
                return Err(invalid(format!("delta for {a} must be finite")));
            }
            d[a.index()] += v;
        }
        Ok(d)
    }
}

/// Starting latent of a request in the requested space.
pub fn resolve_source(bundle: &GeneratorBundle, req: &EditRequest) -> Result<LatentVector> {
    let latent = match &req.source {
        EditSource::Seed(s) => seed_latent(bundle, *s),
        EditSource::Latent(l) => l.clone(),
        EditSource::Image(img) => {
            if req.space == Space::Z {
                return Err(invalid("image sources invert into w space; request space w"));
            }
            let mut rng = RngState::new(req.seed);
            return Ok(invert(bundle, img, &req.invert, &mut rng)?.latent);
        }
    };
    match (latent.space, req.space) {
        (Space::Z, Space::W) => bundle.map_latent(&latent),
        (Space::W, Space::Z) => Err(invalid("a w-space latent cannot be edited in z space")),
        _ => {
            if latent.len() != bundle.dim_of(req.space) {
                return Err(invalid(format!(
                    "{} latent needs {} entries, got {}",
                    req.space,
                    bundle.dim_of(req.space),
                    latent.len()
                )));
            }
            Ok(latent)
        }
    }
}

/// End-to-end edit. All-zero deltas return the unedited generation.
pub fn edit_image(bundle: &GeneratorBundle, models: &ModelSet, req: &EditRequest) -> Result<Trajectory> {
    let deltas = req.delta_array()?;
    let start = resolve_source(bundle, req)?;
    if deltas.iter().all(|d| *d == 0.0) {
        let mut t = Trajectory::new(start.space);
        let img = bundle.image_of(&start)?;
        t.push(start, 0.0, img);
        return Ok(t);
    }
    let model = models.require(req.method, req.space)?;
    match req.method {
        ModelKind::Linear => {
            if req.steps == 0 || !req.alpha.is_finite() {
                return Err(invalid("linear edits need steps > 0 and a finite alpha"));
            }
            let mut combined = vec![0.0f32; start.len()];
            for a in Attribute::ALL {
                let d = deltas[a.index()];
                if d != 0.0 {
                    let dir = model.direction(a)?;
                    combined.iter_mut().zip(&dir.values).for_each(|(c, v)| *c += d * v);
                }
            }
            let n = norm(&combined);
            if !(n > 0.0) {
                return Err(Error::NumericDomain("requested deltas cancel out".into()));
            }
            let dir = LatentVector::new(start.space, combined.iter().map(|c| c / n).collect())?;
            let alphas: Vec<f32> = (0..=req.steps)
                .map(|k| req.alpha * n * k as f32 / req.steps as f32)
                .collect();
            linear_traverse(bundle, &start, &dir, &alphas)
        }
        ModelKind::Nonlinear => nonlinear_traverse(bundle, model, &start, &deltas, &req.descent),
    }
}

//! Traversal collapse near the origin of Z: traces of latents and
//! mapping-network activations along a linear traversal, and the statistics
//! that separate collapsing starts from healthy ones.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::edits::{csv_error, linear_traverse, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::faceworld::{sample_world, Attribute};
use crate::generator::{GeneratorBundle, LatentVector, Space};
use crate::ndmath::{dft_magnitude, Matrix, RngState};

/// First-step displacement ratio at or above which a start is flagged as collapsing.
pub const COLLAPSE_THRESHOLD: f32 = 5.0;
pub const DEFAULT_STEPS: usize = 64;
pub const MIN_STEPS: usize = 8;
/// Gaussian(σ=1) starts averaged into the baseline.
pub const BASELINE_STARTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "lowercase")]
pub enum StartKind {
    Zero,
    /// `ε·g`, `g ~ N(0, I)`.
    Perturbed(f32),
    /// Every entry equal to `c`.
    Uniform(f32),
    /// `σ·g`, `g ~ N(0, I)`.
    Gaussian(f32),
    /// The latent of a face-world sample.
    Sample,
}

impl fmt::Display for StartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StartKind::Zero => f.write_str("zero"),
            StartKind::Perturbed(e) => write!(f, "perturbed={e}"),
            StartKind::Uniform(c) => write!(f, "uniform={c}"),
            StartKind::Gaussian(s) => write!(f, "gaussian={s}"),
            StartKind::Sample => f.write_str("sample"),
        }
    }
}

impl FromStr for StartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once('=') {
            Some((n, p)) => {
                let v: f32 = p
                    .parse()
                    .map_err(|_| invalid(format!("start parameter `{p}` is not a number")))?;
                if !v.is_finite() {
                    return Err(invalid("start parameter must be finite"));
                }
                (n, Some(v))
            }
            None => (s, None),
        };
        match (name, param) {
            ("zero", None) => Ok(StartKind::Zero),
            ("sample", None) => Ok(StartKind::Sample),
            ("perturbed", Some(v)) => Ok(StartKind::Perturbed(v)),
            ("uniform", Some(v)) => Ok(StartKind::Uniform(v)),
            ("gaussian", Some(v)) if v >= 0.0 => Ok(StartKind::Gaussian(v)),
            _ => Err(invalid(format!(
                "unknown start `{s}` (expected zero, perturbed=EPS, uniform=C, gaussian=SIGMA or sample)"
            ))),
        }
    }
}

impl StartKind {
    /// Starting latent in `space`. Samples in W are the mapped world latents.
    pub fn latent(&self, bundle: &GeneratorBundle, space: Space, rng: &mut RngState) -> Result<LatentVector> {
        let dim = bundle.dim_of(space);
        let values = match *self {
            StartKind::Zero => vec![0.0; dim],
            StartKind::Perturbed(e) | StartKind::Gaussian(e) => {
                rng.normal_vec(dim).into_iter().map(|g| e * g).collect()
            }
            StartKind::Uniform(c) => vec![c; dim],
            StartKind::Sample => {
                let d = sample_world(1, rng, &bundle.world)?;
                let z = LatentVector::z(d.records[0].z.clone())?;
                return match space {
                    Space::Z => Ok(z),
                    Space::W => bundle.map_latent(&z),
                };
            }
        };
        LatentVector::new(space, values)
    }
}

/// A traversal with every mapping-network layer recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTrace {
    pub start: StartKind,
    pub step_size: f32,
    pub trajectory: Trajectory,
    /// steps × channels per layer: the normalized input, then each layer's
    /// output. Empty for W traversals, which skip the mapping network.
    pub activations: Vec<Matrix>,
}

impl TrajectoryTrace {
    pub fn steps(&self) -> usize {
        self.trajectory.len()
    }

    /// Latent entries as a steps × dim matrix.
    pub fn latent_matrix(&self) -> Matrix {
        let rows: Vec<Vec<f32>> = self.trajectory.latents.iter().map(|l| l.values.clone()).collect();
        Matrix::from_rows(&rows).expect("trajectory latents share a dimension")
    }

    /// Per-step series the statistics run over: every activation channel,
    /// or the latent entries when no activations were traced.
    pub fn channels(&self) -> Vec<Vec<f32>> {
        let mats: Vec<Matrix> = if self.activations.is_empty() {
            vec![self.latent_matrix()]
        } else {
            self.activations.clone()
        };
        mats.iter().flat_map(|m| (0..m.cols()).map(|c| m.column(c))).collect()
    }

    /// Pixel displacement of the first step.
    pub fn first_step_displacement(&self) -> f32 {
        self.trajectory.displacements()[1]
    }
}

/// Linear traversal `start + k·step_size·direction`, `k = 0..steps`, with
/// full traces.
pub fn run_collapse_experiment(
    bundle: &GeneratorBundle,
    direction: &LatentVector,
    start: StartKind,
    steps: usize,
    step_size: f32,
    rng: &mut RngState,
) -> Result<TrajectoryTrace> {
    if steps < MIN_STEPS {
        return Err(invalid(format!("collapse experiments need at least {MIN_STEPS} steps")));
    }
    if !(step_size > 0.0) || !step_size.is_finite() {
        return Err(invalid("step size must be positive and finite"));
    }
    let origin = start.latent(bundle, direction.space, rng)?;
    let alphas: Vec<f32> = (0..steps).map(|k| k as f32 * step_size).collect();
    let trajectory = linear_traverse(bundle, &origin, direction, &alphas)?;
    let mut activations = Vec::new();
    if direction.space == Space::Z {
        let zs = Matrix::from_rows(&trajectory.latents.iter().map(|l| l.values.clone()).collect::<Vec<_>>())?;
        let acts = bundle.mapping_activations(&zs)?;
        activations.extend(acts.normalized);
        activations.extend(acts.post);
    }
    Ok(TrajectoryTrace {
        start,
        step_size,
        trajectory,
        activations,
    })
}

/// Fraction of (channel, step) values within `band·range` of that channel's
/// minimum or maximum. A constant channel counts as fully saturated.
pub fn saturation_stat(trace: &TrajectoryTrace, band: f32) -> Result<f32> {
    if !(band > 0.0 && band < 0.5) {
        return Err(invalid("saturation band must lie in (0, 0.5)"));
    }
    series_saturation(&trace.channels(), band)
}

pub fn series_saturation(channels: &[Vec<f32>], band: f32) -> Result<f32> {
    let total: usize = channels.iter().map(|c| c.len()).sum();
    if total == 0 {
        return Err(invalid("empty trace"));
    }
    let mut hits = 0usize;
    for ch in channels {
        let lo = ch.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = ch.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let tol = band * (hi - lo);
        hits += ch.iter().filter(|&&v| v - lo <= tol || hi - v <= tol).count();
    }
    Ok(hits as f32 / total as f32)
}

/// Sign changes of the step-to-step differences; flat steps are skipped.
pub fn oscillation_index(readouts: &[f32]) -> Result<usize> {
    if readouts.len() < 3 {
        return Err(invalid("oscillation index needs at least 3 steps"));
    }
    let mut last = 0.0f32;
    let mut flips = 0;
    for w in readouts.windows(2) {
        let d = w[1] - w[0];
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && d.signum() != last.signum() {
            flips += 1;
        }
        last = d;
    }
    Ok(flips)
}

/// Share of one channel's non-DC spectral energy above `cutoff·Nyquist`,
/// with interior bins counted twice for the mirrored half. 0 when the
/// channel is constant.
pub fn channel_hf_ratio(series: &[f32], cutoff: f32) -> Result<f32> {
    let n = series.len();
    let mags = dft_magnitude(series)?;
    let nyquist = n as f32 / 2.0;
    let (mut hf, mut all) = (0.0f64, 0.0f64);
    for (k, m) in mags.iter().enumerate().skip(1) {
        let mirrored = if 2 * k == n { 1.0 } else { 2.0 };
        let e = mirrored * (*m as f64).powi(2);
        all += e;
        if k as f32 > cutoff * nyquist {
            hf += e;
        }
    }
    // energy below float noise of the DC bin counts as constant
    let scale = (mags[0] as f64).powi(2) * 1e-12;
    Ok(if all <= scale { 0.0 } else { (hf / all) as f32 })
}

/// Mean over channels of [`channel_hf_ratio`].
pub fn hf_energy_ratio(trace: &TrajectoryTrace, cutoff: f32) -> Result<f32> {
    if trace.steps() < MIN_STEPS {
        return Err(invalid(format!("spectra need at least {MIN_STEPS} steps")));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(invalid("cutoff must lie in (0, 1)"));
    }
    let chans = trace.channels();
    let mut total = 0.0;
    for c in &chans {
        total += channel_hf_ratio(c, cutoff)?;
    }
    Ok(total / chans.len() as f32)
}

/// Mean DFT magnitude per bin over all channels.
pub fn mean_spectrum(trace: &TrajectoryTrace) -> Result<Vec<f32>> {
    let chans = trace.channels();
    let mut acc = vec![0.0f32; trace.steps() / 2 + 1];
    for c in &chans {
        acc.iter_mut().zip(dft_magnitude(c)?).for_each(|(a, m)| *a += m);
    }
    acc.iter_mut().for_each(|a| *a /= chans.len() as f32);
    Ok(acc)
}

pub fn write_spectrum_csv<W: Write>(spectrum: &[f32], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "mean_magnitude"]).map_err(csv_error)?;
    for (k, m) in spectrum.iter().enumerate() {
        w.write_record([k.to_string(), m.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn median(mut v: Vec<f32>) -> f32 {
    v.sort_by(f32::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median first-step displacement over `count` starts of one kind.
pub fn median_first_step(
    bundle: &GeneratorBundle,
    direction: &LatentVector,
    start: StartKind,
    count: usize,
    step_size: f32,
    rng: &mut RngState,
) -> Result<f32> {
    if count == 0 {
        return Err(invalid("need at least one start"));
    }
    let mut firsts = Vec::with_capacity(count);
    for _ in 0..count {
        let origin = start.latent(bundle, direction.space, rng)?;
        let t = linear_traverse(bundle, &origin, direction, &[0.0, step_size])?;
        firsts.push(t.displacements()[1]);
    }
    Ok(median(firsts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub space: Space,
    pub start: StartKind,
    pub steps: usize,
    pub step_size: f32,
    pub displacements: Vec<f32>,
    pub first_step_displacement: f32,
    /// Median first-step displacement over gaussian(σ=1) starts.
    pub baseline_displacement: f32,
    pub displacement_ratio: f32,
    pub saturation: f32,
    pub saturation_band: f32,
    pub oscillation_index: usize,
    pub oscillation_attribute: Attribute,
    pub hf_energy_ratio: f32,
    pub hf_cutoff: f32,
    /// Largest step over the median step, a smoothness check.
    pub max_over_median_step: f32,
    pub collapse_threshold: f32,
    pub collapsed: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseConfig {
    pub steps: usize,
    pub step_size: f32,
    pub saturation_band: f32,
    pub hf_cutoff: f32,
    pub baseline_starts: usize,
    pub oscillation_attribute: Attribute,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            step_size: 0.01,
            saturation_band: 0.1,
            hf_cutoff: 0.5,
            baseline_starts: BASELINE_STARTS,
            oscillation_attribute: Attribute::FaceWidth,
        }
    }
}

/// Runs one experiment plus its gaussian(σ=1) baseline and summarizes both.
/// The trace comes from `rng.split(1)`, the baseline from `rng.split(2)`.
pub fn diagnose(
    bundle: &GeneratorBundle,
    direction: &LatentVector,
    start: StartKind,
    cfg: &DiagnoseConfig,
    rng: &RngState,
) -> Result<(TrajectoryTrace, CollapseReport)> {
    let trace = run_collapse_experiment(bundle, direction, start, cfg.steps, cfg.step_size, &mut rng.split(1))?;
    let baseline = median_first_step(
        bundle,
        direction,
        StartKind::Gaussian(1.0),
        cfg.baseline_starts,
        cfg.step_size,
        &mut rng.split(2),
    )?;
    let displacements = trace.trajectory.displacements();
    let first = displacements[1];
    let ratio = if baseline > 0.0 {
        first / baseline
    } else {
        f32::INFINITY
    };
    let steps_only = displacements[1..].to_vec();
    let med = median(steps_only.clone());
    let max = steps_only.iter().copied().fold(0.0, f32::max);
    let readout: Vec<f32> = trace
        .trajectory
        .readouts
        .iter()
        .map(|y| y.get(cfg.oscillation_attribute))
        .collect();
    let report = CollapseReport {
        space: direction.space,
        start,
        steps: cfg.steps,
        step_size: cfg.step_size,
        first_step_displacement: first,
        baseline_displacement: baseline,
        displacement_ratio: ratio,
        saturation: saturation_stat(&trace, cfg.saturation_band)?,
        saturation_band: cfg.saturation_band,
        oscillation_index: oscillation_index(&readout)?,
        oscillation_attribute: cfg.oscillation_attribute,
        hf_energy_ratio: hf_energy_ratio(&trace, cfg.hf_cutoff)?,
        hf_cutoff: cfg.hf_cutoff,
        max_over_median_step: if med > 0.0 {
            max / med
        } else if max > 0.0 {
            f32::INFINITY
        } else {
            1.0
        },
        collapse_threshold: COLLAPSE_THRESHOLD,
        collapsed: ratio >= COLLAPSE_THRESHOLD,
        seed: rng.seed(),
        displacements,
    };
    Ok((trace, report))
}

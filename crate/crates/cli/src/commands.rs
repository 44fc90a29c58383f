use std::fs;
use std::path::Path;

use serde::Serialize;
use tunalab::collapse::{diagnose, mean_spectrum, write_spectrum_csv, DiagnoseConfig, StartKind};
use tunalab::edits::{
    edit_image, interpolate, invert, seed_latent, DescentConfig, EditRequest, EditSource, InterpolationMode,
    InversionObjective, InvertConfig,
};
use tunalab::faceworld::{oracle_label, Attribute, AttributeVector, Image, WorldConfig};
use tunalab::generator::{train_generator, GeneratorHyper, LatentVector, Space};
use tunalab::latent::{fit_from_bundle, ModelKind};
use tunalab::metrics::{evaluate, MetricsConfig};
use tunalab::ndmath::RngState;

use crate::args::*;
use crate::config::{bundle_path, load_bundle, load_feature_model, load_model_set};
use crate::CliError;

fn usage<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Usage(e.to_string()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    write(path, text.as_bytes())
}

pub fn read_image(path: &Path) -> Result<Image, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let img = if bytes.starts_with(b"P5") {
        Image::from_pgm(&bytes)
    } else {
        Image::from_png(&bytes)
    };
    img.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// `name=value` with an optional sign on the value.
pub fn parse_delta(s: &str) -> Result<(Attribute, f32), CliError> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("delta `{s}` is not name=value")))?;
    let attr: Attribute = usage(name.trim().parse())?;
    let v: f32 = value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("delta `{s}` has a non-numeric value")))?;
    if !v.is_finite() {
        return Err(CliError::Usage(format!("delta `{s}` must be finite")));
    }
    Ok((attr, v))
}

fn labels_line(y: &AttributeVector) -> String {
    Attribute::ALL
        .iter()
        .map(|a| format!("{a}={:.3}", y.get(*a)))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let hyper = GeneratorHyper {
        epochs: a.epochs,
        beta: a.beta,
        samples: a.samples,
        ..GeneratorHyper::default()
    };
    let bundle = train_generator(&WorldConfig::default(), &hyper, &mut RngState::new(a.seed))?;
    write(&a.out, &bundle.to_bytes()?)?;
    if let Some(r) = &a.report {
        write_json(r, &bundle.meta)?;
    }
    println!(
        "validation mse {:.5}, probe accuracy {:.3}; wrote {}",
        bundle.meta.validation_mse,
        bundle.meta.probe_accuracy,
        a.out.display()
    );
    Ok(())
}

pub fn fit(a: &FitArgs) -> Result<(), CliError> {
    let space: Space = usage(a.space.parse())?;
    let kind: ModelKind = usage(a.kind.parse())?;
    let bundle = load_bundle(&bundle_path(&a.model.model)?)?;
    let model = fit_from_bundle(&bundle, space, kind, a.samples, a.seed)?;
    write(&a.out, &model.to_bytes()?)?;
    let scores: Vec<String> = Attribute::ALL
        .iter()
        .map(|at| format!("{at}={:.3}", model.report.scores[at.index()]))
        .collect();
    println!(
        "{kind} {space}: holdout {}; wrote {}",
        scores.join(" "),
        a.out.display()
    );
    Ok(())
}

pub fn edit(a: &EditArgs) -> Result<(), CliError> {
    let space: Space = usage(a.space.parse())?;
    let method: ModelKind = usage(a.method.parse())?;
    let deltas = a.deltas.iter().map(|d| parse_delta(d)).collect::<Result<Vec<_>, _>>()?;
    let bundle = load_bundle(&bundle_path(&a.model.model)?)?;
    let models = load_model_set(&a.fm)?;
    let source = if let Some(p) = &a.image {
        EditSource::Image(read_image(p)?)
    } else if let Some(p) = &a.latent {
        let text = fs::read_to_string(p).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", p.display())))?;
        let l: LatentVector =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad latent file: {e}")))?;
        EditSource::Latent(l)
    } else {
        EditSource::Seed(a.seed)
    };
    let mut req = EditRequest::new(source, deltas, space, method);
    req.alpha = a.alpha;
    req.steps = a.steps;
    req.seed = a.seed;
    let traj = edit_image(&bundle, &models, &req)?;
    write(&a.out, &traj.final_image().to_png()?)?;
    if let Some(t) = &a.trace {
        write(t, &traj.to_csv()?)?;
    }
    println!(
        "{} steps{}; readout {}",
        traj.len(),
        if traj.converged { "" } else { " (target not reached)" },
        labels_line(traj.final_readout())
    );
    Ok(())
}

#[derive(Serialize)]
struct InvertReport {
    latent: LatentVector,
    loss: f32,
    restart_losses: Vec<f32>,
    target_labels: AttributeVector,
    reconstruction_labels: AttributeVector,
}

pub fn parse_objective(name: &str, gamma: f32) -> Result<InversionObjective, CliError> {
    match name {
        "features" => Ok(InversionObjective::Features),
        "pixels" => Ok(InversionObjective::Pixels),
        "weighted" => Ok(InversionObjective::Weighted { gamma }),
        _ => Err(CliError::Usage(format!(
            "unknown objective `{name}` (features, pixels or weighted)"
        ))),
    }
}

pub fn invert_cmd(a: &InvertArgs) -> Result<(), CliError> {
    let cfg = InvertConfig {
        iters: a.iters,
        restarts: a.restarts,
        learning_rate: a.learning_rate,
        objective: parse_objective(&a.objective, a.gamma)?,
    };
    let bundle = load_bundle(&bundle_path(&a.model.model)?)?;
    let target = read_image(&a.image)?;
    let r = invert(&bundle, &target, &cfg, &mut RngState::new(a.seed))?;
    write(&a.out, &r.reconstruction.to_png()?)?;
    let report = InvertReport {
        latent: r.latent.clone(),
        loss: r.loss,
        restart_losses: r.restart_losses.clone(),
        target_labels: oracle_label(&target),
        reconstruction_labels: oracle_label(&r.reconstruction),
    };
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    println!(
        "loss {:.6}; reconstruction {}",
        r.loss,
        labels_line(&report.reconstruction_labels)
    );
    Ok(())
}

pub fn interpolate_cmd(a: &InterpolateArgs) -> Result<(), CliError> {
    let space: Space = usage(a.space.parse())?;
    let mode = match a.mode.as_str() {
        "latent" => InterpolationMode::Latent,
        "feature" => InterpolationMode::Feature,
        m => return Err(CliError::Usage(format!("unknown mode `{m}` (latent or feature)"))),
    };
    if a.frames < 2 {
        return Err(CliError::Usage("--frames must be at least 2".into()));
    }
    let bundle = load_bundle(&bundle_path(&a.model.model)?)?;
    let models = match mode {
        InterpolationMode::Feature => Some(load_model_set(&a.fm)?),
        InterpolationMode::Latent => None,
    };
    let model = match &models {
        Some(set) => Some(set.require(ModelKind::Nonlinear, space)?),
        None => None,
    };
    let endpoint = |seed| -> Result<LatentVector, CliError> {
        let z = seed_latent(&bundle, seed);
        Ok(match space {
            Space::Z => z,
            Space::W => bundle.map_latent(&z)?,
        })
    };
    let (from, to) = (endpoint(a.from_seed)?, endpoint(a.to_seed)?);
    let ts: Vec<f32> = (0..a.frames).map(|k| k as f32 / (a.frames - 1) as f32).collect();
    let seq = interpolate(&bundle, &from, &to, &ts, mode, model, &DescentConfig::default())?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["frame".to_string(), "t".to_string()];
    header.extend((0..from.len()).map(|i| format!("{space}{i}")));
    header.extend(Attribute::ALL.iter().map(|at| at.name().to_string()));
    header.push("displacement".into());
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    csv.write_record(&header).map_err(csv_err)?;
    for (k, (latent, img)) in seq.iter().enumerate() {
        write(&a.out_dir.join(format!("frame_{k:03}.png")), &img.to_png()?)?;
        let d = if k == 0 { 0.0 } else { seq[k - 1].1.l2_distance(img) };
        let mut row = vec![k.to_string(), ts[k].to_string()];
        row.extend(latent.values.iter().map(|v| v.to_string()));
        row.extend(oracle_label(img).to_array().iter().map(|v| v.to_string()));
        row.push(d.to_string());
        csv.write_record(&row).map_err(csv_err)?;
    }
    if let Some(t) = &a.trace {
        let bytes = csv.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
        write(t, &bytes)?;
    }
    println!("wrote {} frames to {}", seq.len(), a.out_dir.display());
    Ok(())
}

pub fn metrics_cmd(a: &MetricsArgs) -> Result<(), CliError> {
    let fm =
        a.fm.as_ref()
            .ok_or_else(|| CliError::Usage("missing required flag --fm".into()))?;
    let bundle = load_bundle(&bundle_path(&a.model.model)?)?;
    let model = load_feature_model(fm)?;
    let cfg = MetricsConfig {
        holdout_samples: a.holdout,
        image_samples: a.images,
        seed: a.seed,
    };
    let report = evaluate(&bundle, &model, &cfg)?;
    write_json(&a.out, &report)?;
    println!(
        "SS {:.4}, IS {:.4}, FID {:.4}; wrote {}",
        report.separability.overall,
        report.inception_score,
        report.fid,
        a.out.display()
    );
    Ok(())
}

pub fn diagnose_cmd(a: &DiagnoseArgs) -> Result<(), CliError> {
    let fm =
        a.fm.as_ref()
            .ok_or_else(|| CliError::Usage("missing required flag --fm".into()))?;
    let start: StartKind = usage(a.start.parse())?;
    let attribute: Attribute = usage(a.attribute.parse())?;
    let bundle = load_bundle(&bundle_path(&a.model.model)?)?;
    let model = load_feature_model(fm)?;
    let direction = model.direction(attribute)?;
    let cfg = DiagnoseConfig {
        steps: a.steps,
        step_size: a.step_size,
        saturation_band: a.band,
        hf_cutoff: a.cutoff,
        oscillation_attribute: attribute,
        ..DiagnoseConfig::default()
    };
    let (trace, report) = diagnose(&bundle, &direction, start, &cfg, &RngState::new(a.seed))?;
    write_json(&a.out, &report)?;
    if let Some(t) = &a.trace {
        write(t, &trace.trajectory.to_csv()?)?;
    }
    if let Some(s) = &a.spectrum {
        let mut buf = Vec::new();
        write_spectrum_csv(&mean_spectrum(&trace)?, &mut buf)?;
        write(s, &buf)?;
    }
    println!(
        "{} start in {}: displacement ratio {:.2}{}",
        start,
        direction.space,
        report.displacement_ratio,
        if report.collapsed { " (collapse)" } else { "" }
    );
    Ok(())
}

//! Separability scores of the four latent models, plus the image metrics of
//! the generator (inception score and FID against the world).
//!
//! cargo run --example separability -- [generator.tuna]

use tunalab::generator::Space;
use tunalab::latent::{fit_kind, sample_latents, ModelKind};
use tunalab::metrics::{evaluate, model_tables, separability_score, MetricsConfig};
use tunalab::ndmath::RngState;

mod common;

fn main() -> tunalab::Result<()> {
    let bundle = common::generator()?;
    let train = sample_latents(&bundle, 6000, &mut RngState::new(1))?;
    let holdout = sample_latents(&bundle, 2000, &mut RngState::new(2))?;
    let mut nonlinear_w = None;
    for space in [Space::Z, Space::W] {
        for kind in [ModelKind::Linear, ModelKind::Nonlinear] {
            let model = fit_kind(&train.labeled(space)?, kind, &mut RngState::new(3))?;
            let report = separability_score(&model_tables(&model, holdout.latents(space), &holdout.labels)?)?;
            let per: Vec<String> = report
                .per_attribute
                .iter()
                .map(|a| format!("{} {:.3}", a.attribute, a.ss))
                .collect();
            println!("SS({kind}, {space}) = {:.4}  [{}]", report.overall, per.join(", "));
            if kind == ModelKind::Nonlinear && space == Space::W {
                nonlinear_w = Some(model);
            }
        }
    }
    let cfg = MetricsConfig {
        holdout_samples: 1000,
        image_samples: 300,
        seed: 0,
    };
    let m = evaluate(&bundle, &nonlinear_w.unwrap(), &cfg)?;
    println!("IS {:.3}  FID {:.4}", m.inception_score, m.fid);
    Ok(())
}

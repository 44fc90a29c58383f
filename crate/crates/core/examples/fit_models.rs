//! Fits the four latent attribute models (linear and nonlinear, in Z and
//! W) to oracle-labeled samples of a generator and saves them.
//!
//! cargo run --example fit_models -- [generator.tuna]

use tunalab::faceworld::Attribute;
use tunalab::generator::Space;
use tunalab::latent::{fit_kind, sample_latents, ModelKind};
use tunalab::ndmath::RngState;

mod common;

fn main() -> tunalab::Result<()> {
    let bundle = common::generator()?;
    let data = sample_latents(&bundle, 4000, &mut RngState::new(1))?;
    let dir = common::out_dir("fit_models");
    for space in [Space::Z, Space::W] {
        for kind in [ModelKind::Linear, ModelKind::Nonlinear] {
            let model = fit_kind(&data.labeled(space)?, kind, &mut RngState::new(2))?;
            let scores: Vec<String> = Attribute::ALL
                .iter()
                .zip(model.report.scores)
                .map(|(a, s)| format!("{a} {s:.3}"))
                .collect();
            println!("{kind} {space}: {}", scores.join(", "));
            model.save(&dir.join(format!("fm_{kind}_{space}.tuna")))?;
        }
    }
    println!("categorical scores are held-out accuracy, numeric ones R²");
    println!("wrote {}", dir.display());
    Ok(())
}

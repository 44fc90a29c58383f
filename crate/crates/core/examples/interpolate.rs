//! Morphs between two generated faces, once along the straight W segment
//! and once by moving attributes linearly and descending onto them.
//!
//! cargo run --example interpolate -- [generator.tuna]

use tunalab::edits::{interpolate, seed_latent, DescentConfig, InterpolationMode};
use tunalab::faceworld::oracle_label;
use tunalab::generator::Space;
use tunalab::latent::{fit_kind, sample_latents, ModelKind};
use tunalab::ndmath::RngState;

mod common;

fn main() -> tunalab::Result<()> {
    let bundle = common::generator()?;
    let data = sample_latents(&bundle, 4000, &mut RngState::new(1))?;
    let model = fit_kind(&data.labeled(Space::W)?, ModelKind::Nonlinear, &mut RngState::new(2))?;
    let a = bundle.map_latent(&seed_latent(&bundle, 1))?;
    let b = bundle.map_latent(&seed_latent(&bundle, 2))?;
    let ts: Vec<f32> = (0..=6).map(|k| k as f32 / 6.0).collect();
    let dir = common::out_dir("interpolate");
    for mode in [InterpolationMode::Latent, InterpolationMode::Feature] {
        let frames = interpolate(&bundle, &a, &b, &ts, mode, Some(&model), &DescentConfig::default())?;
        let smiles: Vec<String> = frames
            .iter()
            .map(|(_, img)| format!("{:+.2}", oracle_label(img).smile))
            .collect();
        println!("{mode:?}: smile along the path {}", smiles.join(" "));
        for (k, (_, img)) in frames.iter().enumerate() {
            img.write_png(&dir.join(format!("{mode:?}_{k}.png").to_lowercase()))?;
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

//! Traversal collapse: steps along a Z direction from the zero latent and
//! from ordinary starts, then repeats the zero start in W.
//!
//! cargo run --example diagnose -- [generator.tuna]

use tunalab::collapse::{diagnose, DiagnoseConfig, StartKind};
use tunalab::faceworld::Attribute;
use tunalab::generator::Space;
use tunalab::latent::{fit_kind, sample_latents, ModelKind};
use tunalab::ndmath::RngState;

mod common;

fn main() -> tunalab::Result<()> {
    let bundle = common::generator()?;
    let data = sample_latents(&bundle, 3000, &mut RngState::new(1))?;
    let cfg = DiagnoseConfig::default();
    for space in [Space::Z, Space::W] {
        let model = fit_kind(&data.labeled(space)?, ModelKind::Linear, &mut RngState::new(2))?;
        let direction = model.direction(Attribute::FaceWidth)?;
        let starts: &[StartKind] = match space {
            Space::Z => &[
                StartKind::Zero,
                StartKind::Perturbed(1e-3),
                StartKind::Gaussian(1.0),
                StartKind::Sample,
            ],
            Space::W => &[StartKind::Zero],
        };
        for &start in starts {
            let (_, r) = diagnose(&bundle, &direction, start, &cfg, &RngState::new(5))?;
            println!(
                "{space} {:<15} ratio {:>7.2}  saturation {:.2}  hf {:.3}  oscillations {:>2}  collapsed {}",
                start.to_string(),
                r.displacement_ratio,
                r.saturation,
                r.hf_energy_ratio,
                r.oscillation_index,
                r.collapsed
            );
        }
    }
    Ok(())
}

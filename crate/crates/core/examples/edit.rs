//! Adds glasses to a generated face by descending a frozen nonlinear W
//! model, then compares with the linear direction edit.
//!
//! cargo run --example edit -- [generator.tuna]

use tunalab::edits::{edit_image, EditRequest, EditSource, ModelSet};
use tunalab::faceworld::Attribute;
use tunalab::generator::Space;
use tunalab::latent::{fit_kind, sample_latents, ModelKind};
use tunalab::ndmath::RngState;

mod common;

fn main() -> tunalab::Result<()> {
    let bundle = common::generator()?;
    let data = sample_latents(&bundle, 4000, &mut RngState::new(1))?;
    let models = ModelSet::new(vec![
        fit_kind(&data.labeled(Space::W)?, ModelKind::Nonlinear, &mut RngState::new(2))?,
        fit_kind(&data.labeled(Space::W)?, ModelKind::Linear, &mut RngState::new(2))?,
    ]);
    let dir = common::out_dir("edit");
    for method in [ModelKind::Nonlinear, ModelKind::Linear] {
        let req = EditRequest::new(EditSource::Seed(4), vec![(Attribute::Glasses, 1.0)], Space::W, method);
        let tr = edit_image(&bundle, &models, &req)?;
        let (y0, y1) = (&tr.readouts[0], tr.final_readout());
        println!(
            "{method}: glasses {:+} -> {:+}, smile {:+.2} -> {:+.2}, beard {:+} -> {:+}, moved {:.3} in {} steps",
            y0.glasses,
            y1.glasses,
            y0.smile,
            y1.smile,
            y0.beard,
            y1.beard,
            tr.latent_displacement(),
            tr.len() - 1
        );
        tr.images[0].write_png(&dir.join("source.png"))?;
        tr.final_image().write_png(&dir.join(format!("{method}.png")))?;
        std::fs::write(dir.join(format!("{method}.csv")), tr.to_csv()?)?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}

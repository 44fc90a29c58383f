//! Recovers a W latent for a face rendered straight from the world (never
//! seen by the generator) and reports how well the attributes survive.
//!
//! cargo run --example invert -- [generator.tuna]

use tunalab::edits::{invert, InvertConfig};
use tunalab::faceworld::{oracle_label, sample_world, WorldConfig};
use tunalab::ndmath::RngState;

mod common;

fn main() -> tunalab::Result<()> {
    let bundle = common::generator()?;
    let world = sample_world(3, &mut RngState::new(21), &WorldConfig::default())?;
    let dir = common::out_dir("invert");
    for (i, r) in world.records.iter().enumerate() {
        let res = invert(
            &bundle,
            &r.image,
            &InvertConfig::default(),
            &mut RngState::new(i as u64),
        )?;
        let y = oracle_label(&res.reconstruction);
        println!(
            "target {i}: loss {:.5}, glasses {:+}/{:+} beard {:+}/{:+} smile {:+.2}/{:+.2}",
            res.loss, r.attrs.glasses, y.glasses, r.attrs.beard, y.beard, r.attrs.smile, y.smile
        );
        r.image.write_png(&dir.join(format!("target_{i}.png")))?;
        res.reconstruction
            .write_png(&dir.join(format!("reconstruction_{i}.png")))?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}

//! Samples a few faces from the synthetic world, writes them as PNG and
//! compares the oracle's reading with the true attributes.
//!
//! cargo run --example sample_world

use tunalab::faceworld::{oracle_label, sample_world, Entangler, WorldConfig};
use tunalab::ndmath::RngState;

mod common;

fn main() -> tunalab::Result<()> {
    let cfg = WorldConfig::default();
    let world = sample_world(8, &mut RngState::new(7), &cfg)?;
    let dir = common::out_dir("sample_world");
    for (i, r) in world.records.iter().enumerate() {
        let seen = oracle_label(&r.image);
        println!(
            "face {i}: glasses {:+} beard {:+} smile {:+.2} hair {:.2} width {:.2} | oracle smile {:+.2} width {:.2}",
            r.attrs.glasses,
            r.attrs.beard,
            r.attrs.smile,
            r.attrs.hair_length,
            r.attrs.face_width,
            seen.smile,
            seen.face_width
        );
        r.image.write_png(&dir.join(format!("face_{i}.png")))?;
    }

    // the entangler is orthogonal: z gives back the standardized attributes
    let ent = Entangler::new(cfg)?;
    let worst = world
        .records
        .iter()
        .map(|r| {
            let (attrs, _) = ent.disentangle(&r.z)?;
            Ok(attrs
                .iter()
                .zip(r.attrs.standardized())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max))
        })
        .collect::<tunalab::Result<Vec<f32>>>()?
        .into_iter()
        .fold(0.0f32, f32::max);
    println!("largest standardized attribute error after disentangling z: {worst:.2e}");
    println!("wrote {}", dir.display());
    Ok(())
}

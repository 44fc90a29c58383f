//! Trains a generator on a freshly sampled face world and saves it.
//!
//! cargo run --example train_generator -- [epochs] [seed] [out]

use std::time::Instant;

use tunalab::faceworld::WorldConfig;
use tunalab::generator::{train_generator, GeneratorHyper};
use tunalab::ndmath::RngState;

fn main() -> tunalab::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let out = args.get(3).cloned().unwrap_or_else(|| "generator.tuna".into());
    let hyper = GeneratorHyper {
        epochs,
        ..GeneratorHyper::default()
    };
    let start = Instant::now();
    let bundle = train_generator(&WorldConfig::default(), &hyper, &mut RngState::new(seed))?;
    println!(
        "trained in {:.1}s: validation mse {:.5}, probe accuracy {:.3}, final loss {:.5}",
        start.elapsed().as_secs_f32(),
        bundle.meta.validation_mse,
        bundle.meta.probe_accuracy,
        bundle.meta.final_train_loss
    );
    bundle.save(std::path::Path::new(&out))?;
    println!("saved {out}");
    Ok(())
}

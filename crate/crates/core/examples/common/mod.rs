#![allow(dead_code)]

use std::path::Path;

use tunalab::faceworld::WorldConfig;
use tunalab::generator::{train_generator, GeneratorBundle, GeneratorHyper};
use tunalab::ndmath::RngState;

/// Loads the generator named by the first argument, or trains a small one
/// (a few seconds) when none is given.
pub fn generator() -> tunalab::Result<GeneratorBundle> {
    if let Some(p) = std::env::args().nth(1) {
        return GeneratorBundle::load(Path::new(&p));
    }
    eprintln!("no generator given, training a small one");
    let hyper = GeneratorHyper {
        samples: 8000,
        epochs: 10,
        ..GeneratorHyper::default()
    };
    train_generator(&WorldConfig::default(), &hyper, &mut RngState::new(3))
}

/// Output directory for example artifacts.
pub fn out_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("tunalab-examples").join(name);
    std::fs::create_dir_all(&dir).expect("create output directory");
    dir
}

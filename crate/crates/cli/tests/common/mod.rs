#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tunalab::edits::ModelSet;
use tunalab::faceworld::WorldConfig;
use tunalab::generator::{train_generator, GeneratorBundle, GeneratorHyper, Space};
use tunalab::latent::{fit_from_bundle, ModelKind};
use tunalab::ndmath::RngState;

pub const BIN: &str = env!("CARGO_BIN_EXE_tunalab");

pub fn tunalab(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("TUNALAB_MODEL_DIR")
        .output()
        .expect("binary runs")
}

pub fn small_bundle() -> &'static GeneratorBundle {
    static B: OnceLock<GeneratorBundle> = OnceLock::new();
    B.get_or_init(|| {
        let hyper = GeneratorHyper {
            samples: 8000,
            epochs: 10,
            ..GeneratorHyper::default()
        };
        train_generator(&WorldConfig::default(), &hyper, &mut RngState::new(3)).unwrap()
    })
}

pub fn small_models() -> &'static ModelSet {
    static M: OnceLock<ModelSet> = OnceLock::new();
    M.get_or_init(|| {
        let mut out = Vec::new();
        for space in [Space::Z, Space::W] {
            for kind in [ModelKind::Linear, ModelKind::Nonlinear] {
                out.push(fit_from_bundle(small_bundle(), space, kind, 3000, 0).unwrap());
            }
        }
        ModelSet::new(out)
    })
}

/// Writes the small bundle and its four feature models into `dir`.
pub fn write_models(dir: &Path) -> (PathBuf, Vec<PathBuf>) {
    let g = dir.join("generator.tuna");
    small_bundle().save(&g).unwrap();
    let fms = small_models()
        .models
        .iter()
        .map(|m| {
            let p = dir.join(format!("fm_{}_{}.tuna", m.kind(), m.space));
            m.save(&p).unwrap();
            p
        })
        .collect();
    (g, fms)
}

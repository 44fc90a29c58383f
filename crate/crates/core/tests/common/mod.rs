#![allow(dead_code)]

use std::sync::OnceLock;

use tunalab::edits::ModelSet;
use tunalab::faceworld::WorldConfig;
use tunalab::generator::{train_generator, GeneratorBundle, GeneratorHyper, Space};
use tunalab::latent::{fit_kind, sample_latents, FeatureModel, LatentSample, ModelKind};
use tunalab::ndmath::RngState;

/// A reduced generator: enough to draw recognizable faces, cheap enough to
/// train once per test binary.
pub fn bundle() -> &'static GeneratorBundle {
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

pub fn sample() -> &'static LatentSample {
    static S: OnceLock<LatentSample> = OnceLock::new();
    S.get_or_init(|| sample_latents(bundle(), 3000, &mut RngState::new(17)).unwrap())
}

pub fn models() -> &'static ModelSet {
    static M: OnceLock<ModelSet> = OnceLock::new();
    M.get_or_init(|| {
        let mut out = Vec::new();
        for (i, space) in [Space::Z, Space::W].into_iter().enumerate() {
            let data = sample().labeled(space).unwrap();
            for (j, kind) in [ModelKind::Linear, ModelKind::Nonlinear].into_iter().enumerate() {
                out.push(fit_kind(&data, kind, &mut RngState::new(100 + 10 * i as u64 + j as u64)).unwrap());
            }
        }
        ModelSet::new(out)
    })
}

pub fn model(kind: ModelKind, space: Space) -> &'static FeatureModel {
    models().require(kind, space).unwrap()
}

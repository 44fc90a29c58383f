//! Deterministic numeric kernels shared by every other module.

mod dft;
mod gaussian;
pub mod linalg;
mod matrix;
mod optim;
mod rng;

pub use dft::dft_magnitude;
pub use gaussian::{frechet_distance, GaussianFit};
pub use linalg::{random_orthogonal, SquareF64};
pub(crate) use matrix::gemm;
pub use matrix::{cosine, dot, norm, Matrix};
pub use optim::{adam_update, AdamConfig, AdamState};
pub use rng::RngState;

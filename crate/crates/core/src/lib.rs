// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod collapse;
pub mod edits;
pub mod error;
pub mod faceworld;
pub mod generator;
pub mod latent;
pub mod metrics;
pub mod ndmath;
pub mod neural;

pub use error::{Error, Result};

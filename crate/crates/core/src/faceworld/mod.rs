//! Synthetic face world: attribute prior, renderer, oracle labeler and the
//! orthogonal entangler that defines the ground-truth Z directions.

mod attrs;
mod image;
mod oracle;
mod render;
mod world;

pub use attrs::{Attribute, AttributeKind, AttributeVector, NUM_ATTRIBUTES, PRIOR_BEARD_RATE, PRIOR_GLASSES_RATE};
pub use image::{Image, NUM_PIXELS, SIDE};
pub use oracle::{
    categorical_margins, estimate_background, estimate_center_row, is_face, oracle_array, oracle_label, FeatureMap,
    BEARD_THRESHOLD, FACE_CONTRAST_MIN, FACE_TONE_TOLERANCE, GLASSES_THRESHOLD, NUM_FEATURES,
};
pub use render::{background_level, frame_ring_mask, mouth_row, render, vertical_shift};
pub use world::{
    read_dataset, sample_attributes, sample_world, write_dataset, Entangler, WorldConfig, WorldDataset, WorldRecord,
    DATASET_MAGIC, DATASET_VERSION,
};

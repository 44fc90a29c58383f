//! Rule-based attribute labeler and a differentiable feature map.
//!
//! The labeler first locates the face vertically from the eye darkness
//! centroid, then reads each attribute from a region that no other feature
//! touches at that offset:
//!
//! | attribute   | region                                   | statistic                      |
//! |-------------|------------------------------------------|--------------------------------|
//! | glasses     | frame side bars at the eye row           | mean darkness > `GLASSES_THRESHOLD` |
//! | beard       | chin band, central columns               | mean horizontal contrast > `BEARD_THRESHOLD` |
//! | smile       | mouth rows                               | centre minus corner darkness centroid |
//! | hair_length | outer margin columns, top rows           | summed darkness = band thickness |
//! | face_width  | rows just above the mouth                | summed face coverage = ellipse width |
//!
//! On clean renders the categorical labels are exact and numeric labels are
//! exact up to float rounding.

use super::attrs::{AttributeVector, NUM_ATTRIBUTES};
use super::image::{Image, NUM_PIXELS, SIDE};
use super::render::*;

pub const GLASSES_THRESHOLD: f32 = 0.4;
pub const BEARD_THRESHOLD: f32 = 0.12;
/// Minimum gap between background and face interior for a face to be detected.
pub const FACE_CONTRAST_MIN: f32 = 0.1;
/// Face interior must lie within this distance of the skin tone.
pub const FACE_TONE_TOLERANCE: f32 = 0.15;

const LEFT_EYE_COL: usize = 11;
const RIGHT_EYE_COL: usize = 20;
const MARGIN_COLS: [usize; 6] = [0, 1, 2, 29, 30, 31];
const CORNER_COLS: [usize; 4] = [0, 1, 30, 31];
const CORNER_ROWS: std::ops::RangeInclusive<usize> = 28..=31;

#[inline]
fn center(i: usize) -> f32 {
    i as f32 + 0.5
}

fn rows_between(lo: f32, hi: f32) -> impl Iterator<Item = usize> {
    (0..SIDE).filter(move |&r| center(r) >= lo && center(r) <= hi)
}

/// Background gray read from the bottom corners.
pub fn estimate_background(img: &Image) -> f32 {
    let mut s = 0.0;
    let mut k = 0;
    for r in CORNER_ROWS {
        for &c in &CORNER_COLS {
            s += img.at(r, c);
            k += 1;
        }
    }
    s / k as f32
}

/// Darkness relative to skin: 0 at skin or brighter, 1 at ink.
#[inline]
fn skin_darkness(p: f32) -> f32 {
    ((FACE_VALUE - p) / (FACE_VALUE - INK_VALUE)).clamp(0.0, 1.0)
}

/// Face centre row, from the darkness centroid of both eye boxes.
pub fn estimate_center_row(img: &Image) -> f32 {
    let (mut num, mut den) = (0.0f32, 0.0f32);
    for r in 5..=15 {
        for c in (LEFT_EYE_COL - 1..=LEFT_EYE_COL + 1).chain(RIGHT_EYE_COL - 1..=RIGHT_EYE_COL + 1) {
            let d = skin_darkness(img.at(r, c));
            num += d * center(r);
            den += d;
        }
    }
    if den < 1e-3 {
        return CENTER_Y;
    }
    (num / den - EYE_DY).clamp(CENTER_Y - MAX_SHIFT, CENTER_Y + MAX_SHIFT)
}

fn glasses_score(img: &Image, cy: f32) -> f32 {
    let eye_row = cy + EYE_DY;
    let mut s = 0.0;
    let mut k = 0;
    for r in rows_between(eye_row - 1.0, eye_row + 1.0) {
        for c in [LEFT_EYE_COL - 2, LEFT_EYE_COL + 2, RIGHT_EYE_COL - 2, RIGHT_EYE_COL + 2] {
            s += skin_darkness(img.at(r, c));
            k += 1;
        }
    }
    if k == 0 {
        0.0
    } else {
        s / k as f32
    }
}

fn beard_score(img: &Image, cy: f32) -> f32 {
    let mut s = 0.0;
    let mut k = 0;
    for r in rows_between(cy + BEARD_TOP + 1.0, cy + BEARD_BOTTOM - 1.0) {
        for c in 14..17 {
            s += (img.at(r, c) - img.at(r, c + 1)).abs();
            k += 1;
        }
    }
    if k == 0 {
        0.0
    } else {
        s / k as f32 / (FACE_VALUE - INK_VALUE)
    }
}

fn column_centroid(img: &Image, c: usize, rows: &[usize]) -> Option<f32> {
    let (mut num, mut den) = (0.0f32, 0.0f32);
    for &r in rows {
        let d = skin_darkness(img.at(r, c));
        num += d * center(r);
        den += d;
    }
    (den > 1e-3).then(|| num / den)
}

fn smile_score(img: &Image, cy: f32) -> f32 {
    let rows: Vec<usize> = rows_between(cy + 1.0, cy + 8.0).collect();
    let mean_of = |cols: [usize; 2]| -> Option<f32> {
        let a = column_centroid(img, cols[0], &rows)?;
        let b = column_centroid(img, cols[1], &rows)?;
        Some(0.5 * (a + b))
    };
    let (Some(mid), Some(corner)) = (mean_of([15, 16]), mean_of([11, 20])) else {
        return 0.0;
    };
    // arc profile 1 - 2u² at u = 0.1 and u = 0.9
    let span = MOUTH_AMPLITUDE * (0.98 + 0.62);
    ((mid - corner) / span).clamp(-1.0, 1.0)
}

fn hair_score(img: &Image, bg: f32) -> f32 {
    let denom = (bg - INK_VALUE).max(1e-3);
    let mut total = 0.0;
    for &c in &MARGIN_COLS {
        for r in 0..10 {
            total += ((bg - img.at(r, c)) / denom).clamp(0.0, 1.0);
        }
    }
    let thickness = total / MARGIN_COLS.len() as f32;
    ((thickness - HAIR_MIN) / HAIR_SPAN).clamp(0.0, 1.0)
}

fn width_score(img: &Image, bg: f32, cy: f32) -> f32 {
    let denom = bg - FACE_VALUE;
    if denom < 0.05 {
        return 0.75;
    }
    let mut est = 0.0;
    let mut k = 0;
    for r in rows_between(cy - 1.8, cy + 1.0) {
        let covered: f32 = (0..SIDE).map(|c| ((bg - img.at(r, c)) / denom).clamp(0.0, 1.0)).sum();
        let dy = center(r) - cy;
        let shape = (1.0 - (dy / FACE_RADIUS_Y).powi(2)).sqrt();
        est += 0.5 * covered / shape;
        k += 1;
    }
    if k == 0 {
        return 0.75;
    }
    (est / k as f32 / FACE_RADIUS_X).clamp(0.5, 1.0)
}

/// Recovers the attributes of an image. Never fails; degraded images get
/// best-effort labels clamped into the valid ranges.
pub fn oracle_label(img: &Image) -> AttributeVector {
    let bg = estimate_background(img);
    let cy = estimate_center_row(img);
    AttributeVector {
        glasses: if glasses_score(img, cy) > GLASSES_THRESHOLD {
            1.0
        } else {
            -1.0
        },
        beard: if beard_score(img, cy) > BEARD_THRESHOLD {
            1.0
        } else {
            -1.0
        },
        smile: smile_score(img, cy),
        hair_length: hair_score(img, bg),
        face_width: width_score(img, bg, cy),
    }
}

/// Signed distance of the glasses and beard statistics from their decision
/// thresholds, in units of the threshold; positive means present.
pub fn categorical_margins(img: &Image) -> [f32; 2] {
    let cy = estimate_center_row(img);
    [
        glasses_score(img, cy) / GLASSES_THRESHOLD - 1.0,
        beard_score(img, cy) / BEARD_THRESHOLD - 1.0,
    ]
}

/// Face detector: the face interior is near skin tone and clearly darker
/// than the background corners.
pub fn is_face(img: &Image) -> bool {
    let bg = estimate_background(img);
    let cy = estimate_center_row(img);
    let mut s = 0.0;
    let mut k = 0;
    for r in rows_between(cy - 1.5, cy + 1.0) {
        for c in 13..19 {
            s += img.at(r, c);
            k += 1;
        }
    }
    let interior = s / k.max(1) as f32;
    (interior - FACE_VALUE).abs() <= FACE_TONE_TOLERANCE && bg - interior >= FACE_CONTRAST_MIN
}

pub const NUM_FEATURES: usize = 8;

/// Rough per-feature spread over the world, used to put features on a common scale.
const FEATURE_SCALE: [f32; NUM_FEATURES] = [0.091, 0.026, 1.8, 0.142, 0.115, 0.094, 1.27, 0.062];

const EYE_BOX_ROWS: std::ops::RangeInclusive<usize> = 5..=15;
const MOUTH_BOX_ROWS: std::ops::RangeInclusive<usize> = 15..=24;
const SOFT_EPS: f32 = 1e-3;

/// Darkness used by the feature centroids: `relu(skin - p)`.
#[inline]
fn soft_dark(p: f32) -> (f32, f32) {
    if p < FACE_VALUE {
        (FACE_VALUE - p, -1.0)
    } else {
        (0.0, 0.0)
    }
}

struct Centroid {
    cells: Vec<(usize, f32)>,
}

impl Centroid {
    fn new(rows: std::ops::RangeInclusive<usize>, cols: &[usize]) -> Self {
        let mut cells = Vec::new();
        for r in rows {
            for &c in cols {
                cells.push((r * SIDE + c, center(r)));
            }
        }
        Self { cells }
    }

    fn value(&self, px: &[f32]) -> f32 {
        let (mut num, mut den) = (0.0, SOFT_EPS);
        for &(i, y) in &self.cells {
            let (d, _) = soft_dark(px[i]);
            num += d * y;
            den += d;
        }
        num / den
    }

    fn vjp(&self, px: &[f32], g: f32, out: &mut [f32]) {
        let (mut num, mut den) = (0.0, SOFT_EPS);
        for &(i, y) in &self.cells {
            let (d, _) = soft_dark(px[i]);
            num += d * y;
            den += d;
        }
        let com = num / den;
        for &(i, y) in &self.cells {
            let (_, dd) = soft_dark(px[i]);
            out[i] += g * dd * (y - com) / den;
        }
    }
}

/// Mean over a fixed pixel set.
struct RegionMean {
    cells: Vec<usize>,
}

impl RegionMean {
    fn new(rows: std::ops::RangeInclusive<usize>, cols: &[usize]) -> Self {
        let mut cells = Vec::new();
        for r in rows {
            for &c in cols {
                cells.push(r * SIDE + c);
            }
        }
        Self { cells }
    }

    fn value(&self, px: &[f32]) -> f32 {
        self.cells.iter().map(|&i| px[i]).sum::<f32>() / self.cells.len() as f32
    }

    fn vjp(&self, g: f32, out: &mut [f32]) {
        let w = g / self.cells.len() as f32;
        for &i in &self.cells {
            out[i] += w;
        }
    }
}

/// Differentiable 8-dimensional summary of an image built from fixed-region
/// statistics: frame-bar mean, chin texture, mouth curvature, hair band,
/// face edge, background, eye row and global mean. Used as the comparison
/// space for inversion and distribution distances.
pub struct FeatureMap {
    frames: RegionMean,
    chin_rows: std::ops::RangeInclusive<usize>,
    mouth_mid: [Centroid; 2],
    mouth_corner: [Centroid; 2],
    hair: RegionMean,
    edges: RegionMean,
    corners: RegionMean,
    eyes: Centroid,
}

impl Default for FeatureMap {
    fn default() -> Self {
        Self::new()
    }
}

impl FeatureMap {
    pub fn new() -> Self {
        let eye_cols: Vec<usize> = (10..=12).chain(19..=21).collect();
        let edge_cols: Vec<usize> = (3..=7).chain(24..=28).collect();
        Self {
            frames: RegionMean::new(6..=15, &[9, 13, 18, 22]),
            chin_rows: 23..=29,
            mouth_mid: [
                Centroid::new(MOUTH_BOX_ROWS, &[15]),
                Centroid::new(MOUTH_BOX_ROWS, &[16]),
            ],
            mouth_corner: [
                Centroid::new(MOUTH_BOX_ROWS, &[11]),
                Centroid::new(MOUTH_BOX_ROWS, &[20]),
            ],
            hair: RegionMean::new(0..=5, &MARGIN_COLS),
            edges: RegionMean::new(12..=20, &edge_cols),
            corners: RegionMean::new(CORNER_ROWS, &CORNER_COLS),
            eyes: Centroid::new(EYE_BOX_ROWS, &eye_cols),
        }
    }

    pub fn features(&self, img: &Image) -> [f32; NUM_FEATURES] {
        let px = img.pixels();
        let mut chin = 0.0;
        let mut k = 0;
        for r in self.chin_rows.clone() {
            for c in 13..18 {
                let d = px[r * SIDE + c] - px[r * SIDE + c + 1];
                chin += d * d;
                k += 1;
            }
        }
        let mid = 0.5 * (self.mouth_mid[0].value(px) + self.mouth_mid[1].value(px));
        let corner = 0.5 * (self.mouth_corner[0].value(px) + self.mouth_corner[1].value(px));
        let raw = [
            self.frames.value(px),
            chin / k as f32,
            mid - corner,
            self.hair.value(px),
            self.edges.value(px),
            self.corners.value(px),
            self.eyes.value(px),
            img.mean(),
        ];
        let mut out = [0.0; NUM_FEATURES];
        for i in 0..NUM_FEATURES {
            out[i] = raw[i] / FEATURE_SCALE[i];
        }
        out
    }

    /// Vector-Jacobian product: pixel gradient of `grad · features(img)`.
    pub fn vjp(&self, img: &Image, grad: &[f32; NUM_FEATURES]) -> Vec<f32> {
        let px = img.pixels();
        let g: Vec<f32> = (0..NUM_FEATURES).map(|i| grad[i] / FEATURE_SCALE[i]).collect();
        let mut out = vec![0.0; NUM_PIXELS];
        self.frames.vjp(g[0], &mut out);
        let n_chin = (self.chin_rows.clone().count() * 5) as f32;
        for r in self.chin_rows.clone() {
            for c in 13..18 {
                let i = r * SIDE + c;
                let d = px[i] - px[i + 1];
                let w = g[1] * 2.0 * d / n_chin;
                out[i] += w;
                out[i + 1] -= w;
            }
        }
        for m in &self.mouth_mid {
            m.vjp(px, 0.5 * g[2], &mut out);
        }
        for m in &self.mouth_corner {
            m.vjp(px, -0.5 * g[2], &mut out);
        }
        self.hair.vjp(g[3], &mut out);
        self.edges.vjp(g[4], &mut out);
        self.corners.vjp(g[5], &mut out);
        self.eyes.vjp(px, g[6], &mut out);
        let w = g[7] / NUM_PIXELS as f32;
        out.iter_mut().for_each(|o| *o += w);
        out
    }
}

/// Attribute readout as an array, for callers that index by attribute.
pub fn oracle_array(img: &Image) -> [f32; NUM_ATTRIBUTES] {
    oracle_label(img).to_array()
}

//! Parametric face renderer.
//!
//! Every shape is antialiased through a coverage value in [0, 1] that varies
//! continuously with the attributes and the vertical shift, so the image is
//! continuous in every numeric input. Layers are composited front to back in
//! the order background, face, beard, mouth, eyes, frames, hair.

use super::attrs::AttributeVector;
use super::image::{Image, NUM_PIXELS, SIDE};
use crate::error::{invalid, Result};

pub const FACE_VALUE: f32 = 0.4;
pub const INK_VALUE: f32 = 0.05;

pub const CENTER_X: f32 = 16.0;
pub const CENTER_Y: f32 = 16.0;
pub const MAX_SHIFT: f32 = 2.0;
pub const FACE_RADIUS_Y: f32 = 13.0;
/// Horizontal radius at `face_width = 1`.
pub const FACE_RADIUS_X: f32 = 12.0;

pub const EYE_DX: f32 = 4.5;
pub const EYE_DY: f32 = -5.0;
pub const EYE_RADIUS: f32 = 1.4;

pub const FRAME_HALF_W: f32 = 2.8;
pub const FRAME_HALF_H: f32 = 2.2;
pub const FRAME_THICKNESS: f32 = 1.2;

/// Mouth baseline below the face centre, arc amplitude at |smile| = 1, half-width.
pub const MOUTH_DY: f32 = 4.5;
pub const MOUTH_AMPLITUDE: f32 = 2.0;
pub const MOUTH_HALF_W: f32 = 5.0;

pub const BEARD_TOP: f32 = 9.0;
pub const BEARD_BOTTOM: f32 = 12.5;
pub const BEARD_HALF_W: f32 = 7.0;

/// Hair band thickness is `HAIR_MIN + HAIR_SPAN * hair_length` rows.
pub const HAIR_MIN: f32 = 1.0;
pub const HAIR_SPAN: f32 = 4.0;

pub const BACKGROUND_MID: f32 = 0.75;
pub const BACKGROUND_SPREAD: f32 = 0.15;

/// Background gray from the first nuisance entry, in (0.6, 0.9).
pub fn background_level(nuisance: &[f32]) -> f32 {
    BACKGROUND_MID + BACKGROUND_SPREAD * nuisance.first().copied().unwrap_or(0.0).tanh()
}

/// Vertical face shift from the second nuisance entry, in (-2, 2).
pub fn vertical_shift(nuisance: &[f32]) -> f32 {
    MAX_SHIFT * nuisance.get(1).copied().unwrap_or(0.0).tanh()
}

#[inline]
fn clamp01(v: f32) -> f32 {
    v.clamp(0.0, 1.0)
}

/// Horizontal half-extent of the face ellipse at vertical offset `dy`.
pub(crate) fn face_half_width(rx: f32, dy: f32) -> f32 {
    let t = dy / FACE_RADIUS_Y;
    if t.abs() >= 1.0 {
        0.0
    } else {
        rx * (1.0 - t * t).sqrt()
    }
}

/// Row-wise antialiased face coverage. Summed across a row it equals twice the
/// half-width exactly, since `cx` sits on a pixel boundary.
fn face_coverage(rx: f32, dx: f32, dy: f32) -> f32 {
    let h = face_half_width(rx, dy);
    if h <= 0.0 {
        0.0
    } else {
        clamp01(h - dx.abs() + 0.5)
    }
}

fn box_sdf(dx: f32, dy: f32, hw: f32, hh: f32) -> f32 {
    (dx.abs() - hw).max(dy.abs() - hh)
}

fn frame_coverage(dx: f32, dy: f32) -> f32 {
    let outer = clamp01(0.5 - box_sdf(dx, dy, FRAME_HALF_W, FRAME_HALF_H));
    let inner = clamp01(0.5 - box_sdf(dx, dy, FRAME_HALF_W - FRAME_THICKNESS, FRAME_HALF_H - FRAME_THICKNESS));
    outer - inner
}

fn disk_coverage(dx: f32, dy: f32, r: f32) -> f32 {
    clamp01(r - (dx * dx + dy * dy).sqrt() + 0.5)
}

/// Overlap of pixel row `[row, row+1)` with the interval `[a, b]`.
fn row_overlap(row: usize, a: f32, b: f32) -> f32 {
    let lo = (row as f32).max(a);
    let hi = (row as f32 + 1.0).min(b);
    (hi - lo).max(0.0)
}

/// Mouth centre-line row at horizontal offset `dx`.
pub fn mouth_row(cy: f32, smile: f32, dx: f32) -> f32 {
    let u = (dx / MOUTH_HALF_W).clamp(-1.0, 1.0);
    cy + MOUTH_DY + MOUTH_AMPLITUDE * smile * (1.0 - 2.0 * u * u)
}

#[inline]
fn over(p: &mut f32, value: f32, coverage: f32) {
    if coverage > 0.0 {
        *p = *p * (1.0 - coverage) + value * coverage;
    }
}

/// Renders a face. Nuisance entries beyond the first two are ignored.
pub fn render(attrs: &AttributeVector, nuisance: &[f32]) -> Result<Image> {
    attrs.validate()?;
    if nuisance.iter().any(|v| !v.is_finite()) {
        return Err(invalid("nuisance entries must be finite"));
    }
    let bg = background_level(nuisance);
    let cy = CENTER_Y + vertical_shift(nuisance);
    let rx = FACE_RADIUS_X * attrs.face_width;
    let hair = HAIR_MIN + HAIR_SPAN * attrs.hair_length;
    let glasses = attrs.glasses > 0.0;
    let beard = attrs.beard > 0.0;

    let mut px = vec![bg; NUM_PIXELS];
    for r in 0..SIDE {
        let yc = r as f32 + 0.5;
        let dy = yc - cy;
        let beard_rows = if beard {
            row_overlap(r, cy + BEARD_TOP, cy + BEARD_BOTTOM)
        } else {
            0.0
        };
        for c in 0..SIDE {
            let xc = c as f32 + 0.5;
            let dx = xc - CENTER_X;
            let p = &mut px[r * SIDE + c];

            let face = face_coverage(rx, dx, dy);
            over(p, FACE_VALUE, face);

            if beard_rows > 0.0 && c % 2 == 0 && dx.abs() <= BEARD_HALF_W {
                over(p, INK_VALUE, beard_rows * face);
            }

            let col_w = clamp01(MOUTH_HALF_W + 0.5 - dx.abs());
            if col_w > 0.0 {
                let m = mouth_row(cy, attrs.smile, dx);
                over(p, INK_VALUE, col_w * (1.0 - (yc - m).abs()).max(0.0));
            }

            for side in [-1.0f32, 1.0] {
                let ex = dx - side * EYE_DX;
                let ey = dy - EYE_DY;
                over(p, INK_VALUE, disk_coverage(ex, ey, EYE_RADIUS));
                if glasses {
                    over(p, INK_VALUE, frame_coverage(ex, ey));
                }
            }

            over(p, INK_VALUE, clamp01(hair - r as f32));
        }
    }
    Ok(Image::from_raw(px))
}

/// Pixel mask of the eye-frame rings (coverage above one half).
pub fn frame_ring_mask(nuisance: &[f32]) -> Vec<bool> {
    let cy = CENTER_Y + vertical_shift(nuisance);
    let mut mask = vec![false; NUM_PIXELS];
    for r in 0..SIDE {
        for c in 0..SIDE {
            let dx = c as f32 + 0.5 - CENTER_X;
            let dy = r as f32 + 0.5 - cy - EYE_DY;
            mask[r * SIDE + c] = [-1.0f32, 1.0].iter().any(|s| frame_coverage(dx - s * EYE_DX, dy) > 0.5);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(glasses: f32, smile: f32) -> AttributeVector {
        AttributeVector::new(glasses, -1.0, smile, 0.5, 0.8).unwrap()
    }

    #[test]
    fn deterministic() {
        let a = attrs(1.0, 0.3);
        let n = [0.2, -0.4, 1.0];
        assert_eq!(render(&a, &n).unwrap(), render(&a, &n).unwrap());
    }

    #[test]
    fn rejects_invalid_attributes() {
        let mut a = attrs(1.0, 0.0);
        a.smile = 3.0;
        assert!(render(&a, &[0.0, 0.0]).is_err());
        assert!(render(&attrs(1.0, 0.0), &[f32::NAN]).is_err());
    }

    #[test]
    fn glasses_darken_frame_ring() {
        let n = [0.3, 0.5];
        let on = render(&attrs(1.0, 0.0), &n).unwrap();
        let off = render(&attrs(-1.0, 0.0), &n).unwrap();
        let mask = frame_ring_mask(&n);
        let mean = |img: &Image| {
            let (s, k) = img
                .pixels()
                .iter()
                .zip(&mask)
                .filter(|(_, m)| **m)
                .fold((0.0, 0), |(s, k), (p, _)| (s + p, k + 1));
            s / k as f32
        };
        assert!(mean(&off) - mean(&on) > 0.15, "{} {}", mean(&off), mean(&on));
    }

    #[test]
    fn smile_moves_mouth_centroid() {
        let n = [0.0, 0.0];
        let centroid = |img: &Image| {
            let (mut num, mut den) = (0.0, 0.0);
            for r in 17..25 {
                for c in 10..22 {
                    let d = (FACE_VALUE - img.at(r, c)).max(0.0);
                    num += d * (r as f32 + 0.5);
                    den += d;
                }
            }
            num / den
        };
        let up = centroid(&render(&attrs(-1.0, 1.0), &n).unwrap());
        let down = centroid(&render(&attrs(-1.0, -1.0), &n).unwrap());
        assert!((up - down).abs() >= 1.0, "{up} {down}");
    }

    #[test]
    fn background_follows_first_nuisance() {
        for v in [-5.0, -0.5, 0.0, 0.7, 5.0] {
            let img = render(&attrs(-1.0, 0.0), &[v, 0.0]).unwrap();
            let bg = img.at(31, 0);
            assert!((0.6..=0.9).contains(&bg));
            assert!((bg - background_level(&[v])).abs() < 1e-6);
        }
    }

    #[test]
    fn smile_is_lipschitz() {
        // measured bound on the pixel L2 change per unit of smile
        let n = [0.1, 0.3];
        let mut worst = 0.0f32;
        let mut s = -1.0f32;
        while s < 0.99 {
            let a = render(&attrs(-1.0, s), &n).unwrap();
            let b = render(&attrs(-1.0, s + 0.01), &n).unwrap();
            worst = worst.max(a.l2_distance(&b) / 0.01);
            s += 0.01;
        }
        assert!(worst < 10.0, "{worst}");
    }
}

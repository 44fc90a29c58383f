use std::io::Write;

use crate::error::{invalid, Error, Result};

pub const SIDE: usize = 32;
pub const NUM_PIXELS: usize = SIDE * SIDE;

/// 32×32 grayscale image, row-major, values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f32>,
}

impl Image {
    pub fn filled(value: f32) -> Self {
        Self {
            pixels: vec![value.clamp(0.0, 1.0); NUM_PIXELS],
        }
    }

    pub fn from_pixels(pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != NUM_PIXELS {
            return Err(invalid(format!(
                "image needs {NUM_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(invalid(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Self { pixels })
    }

    /// Clamps into [0, 1]; non-finite values become 0.
    pub fn from_pixels_clamped(mut pixels: Vec<f32>) -> Result<Self> {
        for p in &mut pixels {
            *p = if p.is_finite() { p.clamp(0.0, 1.0) } else { 0.0 };
        }
        Self::from_pixels(pixels)
    }

    pub(crate) fn from_raw(pixels: Vec<f32>) -> Self {
        debug_assert_eq!(pixels.len(), NUM_PIXELS);
        Self { pixels }
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * SIDE + col]
    }

    pub fn mean(&self) -> f32 {
        self.pixels.iter().sum::<f32>() / NUM_PIXELS as f32
    }

    pub fn l2_distance(&self, other: &Image) -> f32 {
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f32>()
            .sqrt()
    }

    pub fn mse(&self, other: &Image) -> f32 {
        self.l2_distance(other).powi(2) / NUM_PIXELS as f32
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != NUM_PIXELS {
            return Err(invalid("image byte buffer must hold 1024 pixels"));
        }
        Ok(Self::from_raw(bytes.iter().map(|&b| b as f32 / 255.0).collect()))
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{SIDE} {SIDE}\n255\n").into_bytes();
        out.extend(self.to_bytes());
        out
    }

    pub fn from_pgm(data: &[u8]) -> Result<Self> {
        // header: magic, width, height, maxval separated by whitespace; comments skipped
        let mut tokens = Vec::new();
        let mut i = 0;
        while tokens.len() < 4 {
            while i < data.len() && data[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < data.len() && data[i] == b'#' {
                while i < data.len() && data[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            let start = i;
            while i < data.len() && !data[i].is_ascii_whitespace() {
                i += 1;
            }
            if start == i {
                return Err(Error::Format("truncated PGM header".into()));
            }
            tokens.push(std::str::from_utf8(&data[start..i]).unwrap_or("").to_string());
        }
        if tokens[0] != "P5" {
            return Err(Error::Format("not a binary PGM".into()));
        }
        let dims: Vec<usize> = tokens[1..]
            .iter()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad PGM field `{t}`"))))
            .collect::<Result<_>>()?;
        if dims[0] != SIDE || dims[1] != SIDE || dims[2] != 255 {
            return Err(Error::Format("PGM must be 32x32 with maxval 255".into()));
        }
        let body = data.get(i + 1..).unwrap_or(&[]);
        if body.len() < NUM_PIXELS {
            return Err(Error::Format("truncated PGM body".into()));
        }
        Self::from_bytes(&body[..NUM_PIXELS])
    }

    /// 8-bit grayscale PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, SIDE as u32, SIDE as u32);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().map_err(|e| Error::Format(format!("png: {e}")))?;
            writer
                .write_image_data(&self.to_bytes())
                .map_err(|e| Error::Format(format!("png: {e}")))?;
        }
        Ok(out)
    }

    /// Decodes a 32×32 PNG; color inputs are reduced to luma.
    pub fn from_png(data: &[u8]) -> Result<Self> {
        let mut decoder = png::Decoder::new(std::io::Cursor::new(data));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::Format(format!("png: {e}")))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::Format("png: image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Format(format!("png: {e}")))?;
        if info.width as usize != SIDE || info.height as usize != SIDE {
            return Err(Error::Format(format!(
                "png must be {SIDE}x{SIDE}, got {}x{}",
                info.width, info.height
            )));
        }
        let channels = info.color_type.samples();
        let bytes = &buf[..info.buffer_size()];
        let stride = info.line_size;
        let mut gray = Vec::with_capacity(NUM_PIXELS);
        for r in 0..SIDE {
            let line = &bytes[r * stride..];
            for c in 0..SIDE {
                let px = &line[c * channels..(c + 1) * channels];
                let v = match channels {
                    1 | 2 => px[0] as f32,
                    _ => 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32,
                };
                gray.push((v / 255.0).clamp(0.0, 1.0));
            }
        }
        Ok(Self::from_raw(gray))
    }

    pub fn write_png(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_png()?)?;
        Ok(())
    }

    pub fn write_pgm(&self, path: &std::path::Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient() -> Image {
        Image::from_raw((0..NUM_PIXELS).map(|i| (i % 256) as f32 / 255.0).collect())
    }

    #[test]
    fn rejects_bad_pixels() {
        assert!(Image::from_pixels(vec![0.5; 10]).is_err());
        let mut p = vec![0.5; NUM_PIXELS];
        p[3] = 1.5;
        assert!(Image::from_pixels(p.clone()).is_err());
        assert_eq!(Image::from_pixels_clamped(p).unwrap().at(0, 3), 1.0);
    }

    #[test]
    fn pgm_round_trip() {
        let img = gradient();
        let back = Image::from_pgm(&img.to_pgm()).unwrap();
        assert_eq!(back, img);
        assert!(Image::from_pgm(b"P2\n32 32\n255\n").is_err());
    }

    #[test]
    fn png_round_trip() {
        let img = gradient();
        let bytes = img.to_png().unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
        assert_eq!(Image::from_png(&bytes).unwrap(), img);
        assert!(Image::from_png(b"nope").is_err());
    }
}

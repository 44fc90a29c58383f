use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::attrs::{Attribute, AttributeVector, NUM_ATTRIBUTES, PRIOR_BEARD_RATE, PRIOR_GLASSES_RATE};
use super::image::{Image, NUM_PIXELS};
use super::render::render;
use crate::error::{invalid, Error, Result};
use crate::ndmath::{random_orthogonal, Matrix, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub z_dim: usize,
    pub entangler_seed: u64,
    /// Gaussian-copula correlation between beard and face width.
    pub rho: f32,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            z_dim: 16,
            entangler_seed: 0x7e57,
            rho: 0.3,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.z_dim < NUM_ATTRIBUTES + 1 {
            return Err(invalid(format!("z dimension must be at least 6, got {}", self.z_dim)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        Ok(())
    }

    pub fn nuisance_dim(&self) -> usize {
        self.z_dim - NUM_ATTRIBUTES
    }
}

/// Fixed orthogonal map from `[standardized attributes; nuisance]` to z.
#[derive(Debug, Clone)]
pub struct Entangler {
    config: WorldConfig,
    q: Matrix,
}

impl Entangler {
    pub fn new(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let q = random_orthogonal(config.z_dim, &mut RngState::new(config.entangler_seed))?;
        Ok(Self { config, q })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn entangle(&self, attrs: &AttributeVector, nuisance: &[f32]) -> Result<Vec<f32>> {
        attrs.validate()?;
        if nuisance.len() != self.config.nuisance_dim() {
            return Err(invalid(format!(
                "nuisance length {} but world expects {}",
                nuisance.len(),
                self.config.nuisance_dim()
            )));
        }
        let mut code = attrs.standardized().to_vec();
        code.extend_from_slice(nuisance);
        self.q.mul_vec(&code)
    }

    /// Inverse of [`entangle`](Self::entangle): standardized attributes and nuisance.
    pub fn disentangle(&self, z: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
        if z.len() != self.config.z_dim {
            return Err(invalid("latent length does not match the world"));
        }
        let mut code = self.q.t_mul_vec(z)?;
        let nuisance = code.split_off(NUM_ATTRIBUTES);
        Ok((code, nuisance))
    }

    /// Unit Z-space direction along which the attribute's standardized value grows.
    pub fn true_direction(&self, a: Attribute) -> Vec<f32> {
        self.q.column(a.index())
    }
}

/// Standard normal CDF (Abramowitz and Stegun 7.1.26, |error| < 1.5e-7).
pub(crate) fn normal_cdf(x: f64) -> f64 {
    let t = 1.0 / (1.0 + 0.3275911 * x.abs() / std::f64::consts::SQRT_2);
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-(x * x) / 2.0).exp();
    if x >= 0.0 {
        0.5 * (1.0 + erf)
    } else {
        0.5 * (1.0 - erf)
    }
}

/// Draws attributes from the prior. Beard and face width share a Gaussian
/// copula with correlation `rho`.
pub fn sample_attributes(config: &WorldConfig, rng: &mut RngState) -> AttributeVector {
    let glasses = if rng.bernoulli(PRIOR_GLASSES_RATE) { 1.0 } else { -1.0 };
    let g_beard = rng.normal() as f64;
    let g_width = config.rho as f64 * g_beard + (1.0 - (config.rho as f64).powi(2)).sqrt() * rng.normal() as f64;
    let beard = if normal_cdf(g_beard) > 1.0 - PRIOR_BEARD_RATE as f64 {
        1.0
    } else {
        -1.0
    };
    let face_width = (0.5 + 0.5 * normal_cdf(g_width)) as f32;
    let smile = rng.uniform_range(-1.0, 1.0);
    let hair_length = rng.uniform();
    AttributeVector {
        glasses,
        beard,
        smile,
        hair_length,
        face_width: face_width.clamp(0.5, 1.0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldRecord {
    pub z: Vec<f32>,
    pub attrs: AttributeVector,
    pub image: Image,
}

#[derive(Debug, Clone)]
pub struct WorldDataset {
    pub config: WorldConfig,
    pub records: Vec<WorldRecord>,
}

impl WorldDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// 80% training, 20% validation, in sample order.
    pub fn split(&self) -> (&[WorldRecord], &[WorldRecord]) {
        let n_train = (self.records.len() * 4).div_ceil(5);
        self.records.split_at(n_train)
    }

    pub fn latents(records: &[WorldRecord]) -> Matrix {
        let dim = records.first().map_or(0, |r| r.z.len());
        let mut data = Vec::with_capacity(records.len() * dim);
        for r in records {
            data.extend_from_slice(&r.z);
        }
        Matrix::from_raw(records.len(), dim, data)
    }

    pub fn images(records: &[WorldRecord]) -> Matrix {
        let mut data = Vec::with_capacity(records.len() * NUM_PIXELS);
        for r in records {
            data.extend_from_slice(r.image.pixels());
        }
        Matrix::from_raw(records.len(), NUM_PIXELS, data)
    }
}

/// Samples `count` faces: attributes from the prior, standard normal nuisance,
/// `z = entangle(attrs, nuisance)`, `image = render(attrs, nuisance)`.
pub fn sample_world(count: usize, rng: &mut RngState, config: &WorldConfig) -> Result<WorldDataset> {
    if count == 0 {
        return Err(invalid("sample_world needs count >= 1"));
    }
    let ent = Entangler::new(*config)?;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let attrs = sample_attributes(config, rng);
        let nuisance = rng.normal_vec(config.nuisance_dim());
        records.push(WorldRecord {
            z: ent.entangle(&attrs, &nuisance)?,
            image: render(&attrs, &nuisance)?,
            attrs,
        });
    }
    Ok(WorldDataset {
        config: *config,
        records,
    })
}

pub const DATASET_MAGIC: &[u8; 6] = b"TUNAD1";
pub const DATASET_VERSION: u16 = 1;

/// Binary export: 16-byte header (magic, version u16, count u32, z dim u32),
/// then per record little-endian f32 z, attributes and pixels.
pub fn write_dataset<W: Write>(out: &mut W, records: &[WorldRecord]) -> Result<()> {
    let z_dim = records.first().map_or(0, |r| r.z.len());
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&DATASET_VERSION.to_le_bytes())?;
    out.write_all(&(records.len() as u32).to_le_bytes())?;
    out.write_all(&(z_dim as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity((z_dim + NUM_ATTRIBUTES + NUM_PIXELS) * 4);
    for r in records {
        if r.z.len() != z_dim {
            return Err(invalid("records disagree on z dimension"));
        }
        buf.clear();
        let attrs = r.attrs.to_array();
        for v in r.z.iter().chain(&attrs).chain(r.image.pixels()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(input: &mut R) -> Result<Vec<WorldRecord>> {
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Format("dataset header truncated".into()))?;
    if &header[..6] != DATASET_MAGIC {
        return Err(Error::Format("not a TUNAD1 dataset".into()));
    }
    let version = u16::from_le_bytes([header[6], header[7]]);
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let z_dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let width = z_dim + NUM_ATTRIBUTES + NUM_PIXELS;
    let mut buf = vec![0u8; width * 4];
    let mut records = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::Format("dataset body truncated".into()))?;
        let vals: Vec<f32> = buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let attrs = AttributeVector::from_array(vals[z_dim..z_dim + NUM_ATTRIBUTES].try_into().unwrap());
        attrs
            .validate()
            .map_err(|e| Error::Format(format!("bad attributes in dataset: {e}")))?;
        records.push(WorldRecord {
            z: vals[..z_dim].to_vec(),
            attrs,
            image: Image::from_pixels(vals[z_dim + NUM_ATTRIBUTES..].to_vec())
                .map_err(|e| Error::Format(format!("bad image in dataset: {e}")))?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndmath::{cosine, norm};

    #[test]
    fn config_validation() {
        assert!(WorldConfig::default().validate().is_ok());
        let mut c = WorldConfig {
            z_dim: 5,
            ..WorldConfig::default()
        };
        assert!(c.validate().is_err());
        c = WorldConfig::default();
        c.rho = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((normal_cdf(1.96) - 0.9750021).abs() < 1e-6);
        assert!((normal_cdf(-1.0) - 0.1586553).abs() < 1e-6);
    }

    #[test]
    fn entangle_is_orthogonal() {
        let ent = Entangler::new(WorldConfig::default()).unwrap();
        let mut rng = RngState::new(1);
        let a = sample_attributes(ent.config(), &mut rng);
        let n = rng.normal_vec(11);
        let z = ent.entangle(&a, &n).unwrap();
        let mut code = a.standardized().to_vec();
        code.extend_from_slice(&n);
        assert!((norm(&z) - norm(&code)).abs() < 1e-5 * norm(&code).max(1.0));
        let (ys, ns) = ent.disentangle(&z).unwrap();
        for (u, v) in ys.iter().chain(&ns).zip(&code) {
            assert!((u - v).abs() < 1e-5);
        }
        for a in Attribute::ALL {
            let d = ent.true_direction(a);
            assert!((norm(&d) - 1.0).abs() < 1e-5);
            for b in Attribute::ALL.into_iter().filter(|b| *b != a) {
                assert!(cosine(&d, &ent.true_direction(b)).abs() < 1e-5);
            }
        }
        assert!(ent.entangle(&a, &n[..3]).is_err());
    }

    #[test]
    fn split_is_eighty_twenty() {
        let ds = sample_world(10, &mut RngState::new(2), &WorldConfig::default()).unwrap();
        let (tr, va) = ds.split();
        assert_eq!((tr.len(), va.len()), (8, 2));
        assert!(sample_world(0, &mut RngState::new(2), &WorldConfig::default()).is_err());
    }

    #[test]
    fn dataset_round_trip_and_errors() {
        let ds = sample_world(12, &mut RngState::new(3), &WorldConfig::default()).unwrap();
        let mut bytes = Vec::new();
        write_dataset(&mut bytes, &ds.records).unwrap();
        assert_eq!(bytes.len(), 16 + 12 * (16 + 5 + 1024) * 4);
        let back = read_dataset(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, ds.records);
        assert!(read_dataset(&mut &bytes[..100]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_dataset(&mut bad.as_slice()), Err(Error::Format(_))));
    }
}

//! `TUNAM1` feature-model files.

use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureModel, FitReport, HeadKind, LinearHead, ModelBody};
use crate::error::{Error, Result};
use crate::faceworld::{Attribute, NUM_ATTRIBUTES};
use crate::generator::Space;
use crate::neural::codec::{read_network, write_network, BinReader, BinWriter};

pub const FEATURE_MODEL_MAGIC: &[u8; 6] = b"TUNAM1";
pub const FEATURE_MODEL_VERSION: u16 = 1;

const MAX_DIM: u32 = 1 << 16;

impl FeatureModel {
    /// Layout: magic, version, space tag, kind, input dimension, input
    /// standardization, fit report, then the heads or the network.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BinWriter::new(out);
        w.bytes(FEATURE_MODEL_MAGIC)?;
        w.u16(FEATURE_MODEL_VERSION)?;
        w.u8(match self.space {
            Space::Z => 0,
            Space::W => 1,
        })?;
        w.u8(match self.body {
            ModelBody::Linear(_) => 0,
            ModelBody::Nonlinear { .. } => 1,
        })?;
        w.u32(self.dim() as u32)?;
        w.f32s(&self.input_mean)?;
        w.f32s(&self.input_scale)?;
        w.u32(self.report.train_samples)?;
        w.u32(self.report.holdout_samples)?;
        w.f32s(&self.report.scores)?;
        match &self.body {
            ModelBody::Linear(heads) => {
                w.u8(heads.len() as u8)?;
                for h in heads {
                    w.u8(h.attribute.index() as u8)?;
                    w.u8(h.kind.id())?;
                    w.f32s(&h.weight)?;
                    w.f32(h.bias)?;
                }
            }
            ModelBody::Nonlinear { spec, params } => write_network(&mut w, spec, params)?,
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = BinReader::new(input);
        if &r.array::<6>()? != FEATURE_MODEL_MAGIC {
            return Err(Error::Format("not a TUNAM1 feature model".into()));
        }
        let version = r.u16()?;
        if version != FEATURE_MODEL_VERSION {
            return Err(Error::Format(format!("unsupported feature model version {version}")));
        }
        let space = match r.u8()? {
            0 => Space::Z,
            1 => Space::W,
            v => return Err(Error::Format(format!("bad space tag {v}"))),
        };
        let kind = r.u8()?;
        let dim = r.u32()?;
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Format(format!("implausible latent dimension {dim}")));
        }
        let dim = dim as usize;
        let input_mean = r.f32s(dim)?;
        let input_scale = r.f32s(dim)?;
        if input_scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Format("input scale must be positive".into()));
        }
        let report = FitReport {
            train_samples: r.u32()?,
            holdout_samples: r.u32()?,
            scores: r.f32s(NUM_ATTRIBUTES)?.try_into().unwrap(),
        };
        let body = match kind {
            0 => {
                let n = r.u8()? as usize;
                let mut heads = Vec::with_capacity(n);
                for _ in 0..n {
                    let attribute = Attribute::from_index(r.u8()? as usize)
                        .ok_or_else(|| Error::Format("bad attribute index".into()))?;
                    let kind = HeadKind::from_id(r.u8()?)?;
                    heads.push(LinearHead {
                        attribute,
                        kind,
                        weight: r.f32s(dim)?,
                        bias: r.f32()?,
                    });
                }
                ModelBody::Linear(heads)
            }
            1 => {
                let (spec, params) = read_network(&mut r)?;
                if spec.input_dim() != dim || spec.output_dim() != NUM_ATTRIBUTES {
                    return Err(Error::Format("network shape does not match the model".into()));
                }
                ModelBody::Nonlinear { spec, params }
            }
            v => return Err(Error::Format(format!("bad model kind {v}"))),
        };
        r.finish()?;
        Ok(Self {
            space,
            input_mean,
            input_scale,
            body,
            report,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::read(path)?.as_slice())
    }
}

//! `TUNAG1` model files.

use std::io::{Read, Write};
use std::path::Path;

use super::{GeneratorBundle, TrainingMeta};
use crate::error::{Error, Result};
use crate::faceworld::WorldConfig;
use crate::neural::codec::{read_network, write_network, BinReader, BinWriter};

pub const MODEL_MAGIC: &[u8; 6] = b"TUNAG1";
pub const MODEL_VERSION: u16 = 1;

impl GeneratorBundle {
    /// Layout: magic, version, world config, training metadata, then the
    /// mapping, synthesis and probe networks.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = BinWriter::new(out);
        w.bytes(MODEL_MAGIC)?;
        w.u16(MODEL_VERSION)?;
        w.u32(self.world.z_dim as u32)?;
        w.u64(self.world.entangler_seed)?;
        w.f32(self.world.rho)?;
        let m = &self.meta;
        w.u64(m.seed)?;
        w.u32(m.epochs)?;
        w.u32(m.samples)?;
        w.f32(m.beta)?;
        w.f32(m.final_train_loss)?;
        w.f32(m.validation_mse)?;
        w.f32(m.probe_accuracy)?;
        write_network(&mut w, &self.mapping_spec, &self.mapping)?;
        write_network(&mut w, &self.synthesis_spec, &self.synthesis)?;
        write_network(&mut w, &self.probe_spec, &self.probe)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = BinReader::new(input);
        if &r.array::<6>()? != MODEL_MAGIC {
            return Err(Error::Format("not a TUNAG1 generator file".into()));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported generator version {version}")));
        }
        let world = WorldConfig {
            z_dim: r.u32()? as usize,
            entangler_seed: r.u64()?,
            rho: r.f32()?,
        };
        world.validate().map_err(|e| Error::Format(e.to_string()))?;
        let meta = TrainingMeta {
            seed: r.u64()?,
            epochs: r.u32()?,
            samples: r.u32()?,
            beta: r.f32()?,
            final_train_loss: r.f32()?,
            validation_mse: r.f32()?,
            probe_accuracy: r.f32()?,
        };
        let (mapping_spec, mapping) = read_network(&mut r)?;
        let (synthesis_spec, synthesis) = read_network(&mut r)?;
        let (probe_spec, probe) = read_network(&mut r)?;
        r.finish()?;
        if mapping_spec.input_dim() != world.z_dim
            || synthesis_spec.input_dim() != mapping_spec.output_dim()
            || synthesis_spec.output_dim() != crate::faceworld::NUM_PIXELS
            || probe_spec.input_dim() != mapping_spec.output_dim()
        {
            return Err(Error::Format("generator networks have inconsistent shapes".into()));
        }
        Ok(Self {
            world,
            mapping_spec,
            mapping,
            synthesis_spec,
            synthesis,
            probe_spec,
            probe,
            meta,
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
        let bytes = std::fs::read(path)?;
        Self::read_from(bytes.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::untrained;
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let b = untrained(9);
        let bytes = b.to_bytes().unwrap();
        assert_eq!(&bytes[..6], MODEL_MAGIC);
        let back = GeneratorBundle::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back, b);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = untrained(10).to_bytes().unwrap();
        assert!(GeneratorBundle::read_from(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[6] = 9;
        assert!(matches!(
            GeneratorBundle::read_from(bad.as_slice()),
            Err(Error::Format(_))
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(GeneratorBundle::read_from(long.as_slice()).is_err());
    }
}

//! Little-endian binary encoding of network specs and parameters, shared by
//! the model file formats.

use std::io::{Read, Write};

use super::{Activation, Layer, MlpParams, MlpSpec};
use crate::error::{Error, Result};
use crate::ndmath::Matrix;

/// Guards against absurd allocations when reading corrupt files.
const MAX_WIDTH: u32 = 1 << 16;
const MAX_LAYERS: u32 = 64;

pub struct BinWriter<W: Write> {
    inner: W,
}

impl<W: Write> BinWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b)?;
        Ok(())
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    pub fn u16(&mut self, v: u16) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f32s(&mut self, vs: &[f32]) -> Result<()> {
        let mut buf = Vec::with_capacity(vs.len() * 4);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }

    pub fn string(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        self.bytes(s.as_bytes())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

pub struct BinReader<R: Read> {
    inner: R,
}

fn truncated() -> Error {
    Error::Format("unexpected end of file".into())
}

impl<R: Read> BinReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|_| truncated())?;
        Ok(b)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let mut buf = vec![0u8; n * 4];
        self.inner.read_exact(&mut buf).map_err(|_| truncated())?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        if n > MAX_WIDTH {
            return Err(Error::Format("string field too long".into()));
        }
        let mut buf = vec![0u8; n as usize];
        self.inner.read_exact(&mut buf).map_err(|_| truncated())?;
        String::from_utf8(buf).map_err(|_| Error::Format("string field is not UTF-8".into()))
    }

    /// Fails unless the input is exhausted.
    pub fn finish(mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::Format("trailing bytes after model".into())),
        }
    }
}

/// Spec (widths, activation ids, flags) followed by every layer's weight then bias.
pub fn write_network<W: Write>(w: &mut BinWriter<W>, spec: &MlpSpec, params: &MlpParams) -> Result<()> {
    params.check(spec)?;
    w.u32(spec.widths.len() as u32)?;
    for &width in &spec.widths {
        w.u32(width as u32)?;
    }
    for a in &spec.activations {
        w.u8(a.id())?;
    }
    w.u8(spec.input_norm as u8)?;
    w.f32(spec.norm_epsilon)?;
    w.f32(spec.dropout)?;
    for layer in &params.layers {
        w.f32s(layer.weight.as_slice())?;
        w.f32s(&layer.bias)?;
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut BinReader<R>) -> Result<(MlpSpec, MlpParams)> {
    let n_widths = r.u32()?;
    if !(2..=MAX_LAYERS + 1).contains(&n_widths) {
        return Err(Error::Format(format!("implausible layer count {n_widths}")));
    }
    let mut widths = Vec::with_capacity(n_widths as usize);
    for _ in 0..n_widths {
        let v = r.u32()?;
        if v == 0 || v > MAX_WIDTH {
            return Err(Error::Format(format!("implausible layer width {v}")));
        }
        widths.push(v as usize);
    }
    let mut activations = Vec::with_capacity(widths.len() - 1);
    for _ in 1..widths.len() {
        activations.push(Activation::from_id(r.u8()?).map_err(|e| Error::Format(e.to_string()))?);
    }
    let input_norm = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(Error::Format(format!("bad normalization flag {v}"))),
    };
    let spec = MlpSpec {
        widths,
        activations,
        input_norm,
        norm_epsilon: r.f32()?,
        dropout: r.f32()?,
    };
    spec.validate().map_err(|e| Error::Format(e.to_string()))?;
    let mut layers = Vec::with_capacity(spec.num_layers());
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = (spec.widths[l], spec.widths[l + 1]);
        let weight =
            Matrix::from_vec(fan_out, fan_in, r.f32s(fan_in * fan_out)?).map_err(|e| Error::Format(e.to_string()))?;
        let bias = r.f32s(fan_out)?;
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Format("non-finite bias".into()));
        }
        layers.push(Layer { weight, bias });
    }
    Ok((spec, MlpParams { layers }))
}

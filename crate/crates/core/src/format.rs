//! GADL binary model files.
//!
//! Layout, all integers u32 little-endian and all reals f64 little-endian:
//!
//! ```text
//! "GADL" | version | layer count
//! per layer: hidden | visible | dec_bias length (visible, or 0 if frozen)
//!            weights (row-major, hidden×visible) | enc_bias | dec_bias
//! ```

use std::fs;
use std::path::Path;

use crate::autoencoder::TiedAutoencoder;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

pub const MAGIC: &[u8; 4] = b"GADL";
pub const VERSION: u32 = 1;

/// One serialized layer. `dec_bias` is `None` for frozen encoder layers.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerRecord {
    pub weights: Matrix,
    pub enc_bias: Vector,
    pub dec_bias: Option<Vector>,
}

impl From<TiedAutoencoder> for LayerRecord {
    fn from(ae: TiedAutoencoder) -> Self {
        let (weights, enc_bias, dec_bias) = ae.into_parts();
        LayerRecord {
            weights,
            enc_bias,
            dec_bias: Some(dec_bias),
        }
    }
}

impl TiedAutoencoder {
    /// Single-layer GADL file.
    pub fn to_gadl_bytes(&self) -> Result<Vec<u8>> {
        encode_layers(&[LayerRecord::from(self.clone())])
    }

    pub fn from_gadl_bytes(bytes: &[u8]) -> Result<Self> {
        let mut layers = decode_layers(bytes)?;
        if layers.len() != 1 {
            return Err(Error::Format(format!(
                "expected 1 layer, found {}",
                layers.len()
            )));
        }
        let LayerRecord {
            weights,
            enc_bias,
            dec_bias,
        } = layers.remove(0);
        let dec_bias = dec_bias.ok_or_else(|| Error::Format("layer has no decoder bias".into()))?;
        TiedAutoencoder::new(weights, enc_bias, dec_bias)
    }
}

pub fn encode_layers(layers: &[LayerRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, layers.len(), "layer count")?;
    for layer in layers {
        let (hidden, visible) = layer.weights.shape();
        if layer.enc_bias.len() != hidden {
            return Err(Error::dim("GADL enc_bias", hidden, layer.enc_bias.len()));
        }
        let dec_len = match &layer.dec_bias {
            Some(d) if d.len() != visible => {
                return Err(Error::dim("GADL dec_bias", visible, d.len()))
            }
            Some(d) => d.len(),
            None => 0,
        };
        put_u32(&mut out, hidden, "hidden")?;
        put_u32(&mut out, visible, "visible")?;
        put_u32(&mut out, dec_len, "dec_bias length")?;
        let dec: &[f64] = layer.dec_bias.as_deref().unwrap_or(&[]);
        for v in layer
            .weights
            .as_slice()
            .iter()
            .chain(layer.enc_bias.iter())
            .chain(dec)
        {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_layers(bytes: &[u8]) -> Result<Vec<LayerRecord>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("missing GADL magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported GADL version {version}")));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::new();
    for _ in 0..count {
        let hidden = r.u32()? as usize;
        let visible = r.u32()? as usize;
        let dec_len = r.u32()? as usize;
        if dec_len != 0 && dec_len != visible {
            return Err(Error::Format(format!(
                "dec_bias length {dec_len} is neither 0 nor visible count {visible}"
            )));
        }
        let n = hidden
            .checked_mul(visible)
            .ok_or_else(|| Error::Format(format!("layer {hidden}x{visible} overflows")))?;
        let weights = Matrix::new(hidden, visible, r.reals(n)?)?;
        let enc_bias = Vector::from(r.reals(hidden)?);
        let dec_bias = if dec_len == 0 {
            None
        } else {
            Some(Vector::from(r.reals(dec_len)?))
        };
        layers.push(LayerRecord {
            weights,
            enc_bias,
            dec_bias,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(layers)
}

pub fn save_layers(path: impl AsRef<Path>, layers: &[LayerRecord]) -> Result<()> {
    fs::write(path, encode_layers(layers)?)?;
    Ok(())
}

pub fn load_layers(path: impl AsRef<Path>) -> Result<Vec<LayerRecord>> {
    decode_layers(&fs::read(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Format("length overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

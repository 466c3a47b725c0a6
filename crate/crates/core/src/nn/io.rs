//! Weight files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic   "NRPW"
//! u32     format version (1)
//! u32     record count
//! record* u32 tag, then
//!         tag 1 dense:    u32 in, u32 out, u32 activation (0 identity, 1 relu),
//!                         out*in f64 weights (row-major), out f64 biases
//!         tag 2 conv3x3:  u32 in_ch, u32 out_ch,
//!                         9*in_ch*out_ch f64 weights (row-major), out_ch f64 biases
//!         tag 3 raster:   u32 height, u32 width
//! ```
//!
//! A plain MLP is a sequence of dense records. A convolutional encoder is a
//! raster record, its conv records, then the dense head. `save_model` also
//! writes a JSON sidecar next to the weights (`<file>.json`).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView2};

use super::conv::{Conv3x3, ConvLite};
use super::mlp::{Activation, Dense, Mlp};
use super::{LossHead, Network};
use crate::error::{Error, Result};

pub const WEIGHT_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"NRPW";
const TAG_DENSE: u32 = 1;
const TAG_CONV: u32 = 2;
const TAG_RASTER: u32 = 3;

/// Any network that can be stored in a weight file.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Mlp(Mlp),
    ConvLite(ConvLite),
}

impl Model {
    pub fn architecture(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::ConvLite(_) => "conv-lite",
        }
    }
}

macro_rules! delegate {
    ($self:ident, $net:ident => $e:expr) => {
        match $self {
            Model::Mlp($net) => $e,
            Model::ConvLite($net) => $e,
        }
    };
}

impl Network for Model {
    fn input_dim(&self) -> usize {
        delegate!(self, n => n.input_dim())
    }
    fn output_dim(&self) -> usize {
        delegate!(self, n => n.output_dim())
    }
    fn param_slices(&self) -> Vec<&[f64]> {
        delegate!(self, n => n.param_slices())
    }
    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        delegate!(self, n => n.param_slices_mut())
    }
    fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        delegate!(self, n => n.forward_batch(x))
    }
    fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, head: &mut LossHead<'_>) -> Result<(f64, Vec<f64>)> {
        delegate!(self, n => n.loss_and_gradient(x, head))
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s<'a>(out: &mut Vec<u8>, vs: impl IntoIterator<Item = &'a f64>) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_dense(out: &mut Vec<u8>, l: &Dense) {
    put_u32(out, TAG_DENSE);
    put_u32(out, l.input_dim() as u32);
    put_u32(out, l.output_dim() as u32);
    put_u32(out, (l.activation == Activation::Relu) as u32);
    put_f64s(out, l.weights.iter());
    put_f64s(out, l.biases.iter());
}

pub fn model_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, WEIGHT_FORMAT_VERSION);
    match model {
        Model::Mlp(m) => {
            put_u32(&mut out, m.layers.len() as u32);
            for l in &m.layers {
                put_dense(&mut out, l);
            }
        }
        Model::ConvLite(c) => {
            put_u32(&mut out, (1 + c.convs.len() + c.head.layers.len()) as u32);
            put_u32(&mut out, TAG_RASTER);
            put_u32(&mut out, c.height as u32);
            put_u32(&mut out, c.width as u32);
            for conv in &c.convs {
                put_u32(&mut out, TAG_CONV);
                put_u32(&mut out, conv.in_ch as u32);
                put_u32(&mut out, conv.out_ch as u32);
                put_f64s(&mut out, conv.weights.iter());
                put_f64s(&mut out, conv.biases.iter());
            }
            for l in &c.head.layers {
                put_dense(&mut out, l);
            }
        }
    }
    out
}

pub fn write_model<W: Write>(w: &mut W, model: &Model) -> Result<()> {
    w.write_all(&model_bytes(model))?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("weight file truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn dim(&mut self) -> Result<usize> {
        let v = self.u32()? as usize;
        if v == 0 || v > 1 << 24 {
            return Err(Error::Format(format!("implausible dimension {v}")));
        }
        Ok(v)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn read_dense(c: &mut Cursor<'_>) -> Result<Dense> {
    let input = c.dim()?;
    let output = c.dim()?;
    let activation = match c.u32()? {
        0 => Activation::Identity,
        1 => Activation::Relu,
        a => return Err(Error::Format(format!("unknown activation code {a}"))),
    };
    let weights = Array2::from_shape_vec((output, input), c.f64s(output * input)?).unwrap();
    let biases = Array1::from(c.f64s(output)?);
    Ok(Dense {
        weights,
        biases,
        activation,
    })
}

pub fn parse_model(bytes: &[u8]) -> Result<Model> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("not a weight file".into()));
    }
    let version = c.u32()?;
    if version != WEIGHT_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: WEIGHT_FORMAT_VERSION,
            found: version,
        });
    }
    let count = c.u32()? as usize;
    let mut raster = None;
    let mut convs = Vec::new();
    let mut dense = Vec::new();
    for i in 0..count {
        match c.u32()? {
            TAG_RASTER if i == 0 => raster = Some((c.dim()?, c.dim()?)),
            TAG_CONV if raster.is_some() && dense.is_empty() => {
                let in_ch = c.dim()?;
                let out_ch = c.dim()?;
                let weights = Array2::from_shape_vec((9 * in_ch, out_ch), c.f64s(9 * in_ch * out_ch)?).unwrap();
                let biases = Array1::from(c.f64s(out_ch)?);
                convs.push(Conv3x3 {
                    in_ch,
                    out_ch,
                    weights,
                    biases,
                });
            }
            TAG_DENSE => dense.push(read_dense(&mut c)?),
            t => return Err(Error::Format(format!("unexpected record tag {t} at {i}"))),
        }
    }
    if c.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after weight records".into()));
    }
    let head = Mlp::new(dense)?;
    let model = match raster {
        None => Model::Mlp(head),
        Some((h, w)) => Model::ConvLite(ConvLite::from_parts(h, w, convs, head)?),
    };
    if !model.is_finite() {
        return Err(Error::Format("non-finite parameters".into()));
    }
    Ok(model)
}

pub fn read_model<R: Read>(r: &mut R) -> Result<Model> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    parse_model(&buf)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the weights and a pretty-printed metadata sidecar, each atomically.
pub fn save_model(path: &Path, model: &Model, metadata: &serde_json::Value) -> Result<()> {
    crate::fsio::write_atomic(path, &model_bytes(model))?;
    let mut meta = serde_json::to_vec_pretty(metadata)?;
    meta.push(b'\n');
    crate::fsio::write_atomic(&sidecar_path(path), &meta)
}

/// Loads weights and, when present, the sidecar metadata.
pub fn load_model(path: &Path) -> Result<(Model, Option<serde_json::Value>)> {
    let model = parse_model(&std::fs::read(path)?)?;
    let side = sidecar_path(path);
    let meta = if side.exists() {
        Some(serde_json::from_slice(&std::fs::read(side)?)?)
    } else {
        None
    };
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Model::Mlp(Mlp::with_dims(&[5, 7, 3], &mut rng));
        let bytes = model_bytes(&m);
        assert_eq!(&bytes[..4], b"NRPW");
        assert_eq!(bytes.len(), 12 + 2 * 16 + 8 * (35 + 7 + 21 + 3));
        assert_eq!(parse_model(&bytes).unwrap(), m);
    }

    #[test]
    fn conv_round_trip_and_files() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Model::ConvLite(ConvLite::new(8, 8, &[2, 3], &[], 4, &mut rng).unwrap());
        let dir = std::env::temp_dir().join(format!("nrpw-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("enc.bin");
        save_model(&path, &m, &serde_json::json!({"arch": "conv-lite"})).unwrap();
        let (back, meta) = load_model(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta.unwrap()["arch"], "conv-lite");
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Model::Mlp(Mlp::with_dims(&[2, 2], &mut rng));
        let mut bytes = model_bytes(&m);
        assert!(parse_model(&bytes[..bytes.len() - 1]).is_err());
        bytes[4] = 9;
        assert!(matches!(
            parse_model(&bytes),
            Err(Error::VersionMismatch { expected: 1, found: 9 })
        ));
        assert!(parse_model(b"JUNKJUNKJUNK").is_err());
    }
}

//! On-disk model format.
//!
//! Every integer and float is little-endian.
//!
//! ```text
//! "BNNF"  version:u32  phase:u8  encoding:u8  reserved:u16  layers:u32  dims:u32 x (layers+1)
//! ternary only:
//!     sparsity:f64  beta_mode:u8  reserved:[u8; 3]  epoch:u32
//!     per layer:  weight_beta:f64  bias_beta:f64
//!     per layer:  sign words (rows x ceil(cols/64) u64), mask words (same),
//!                 bias sign words (ceil(rows/64) u64), bias mask words (same)
//! per layer:  weights (rows x cols f64, row-major), bias (rows f64)
//! crc32 of everything above:u32
//! ```
//!
//! Ternary files keep the real shadow parameters so phase-2 training can resume.

use std::fs;
use std::path::Path;

use bitwise_nn::bitcore::{BitPlane, TernaryLayer};
use bitwise_nn::bnn::{BetaMode, BnnState};
use bitwise_nn::dataio::Encoding;
use bitwise_nn::realnet::{RealLayer, RealNetwork};
use bitwise_nn::ternarize::{TernarizeSpec, Thresholds};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"BNNF";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Crc { stored: u32, computed: u32 },
    #[error("file truncated")]
    Truncated,
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("unknown {what} tag {tag}")]
    Tag { what: &'static str, tag: u8 },
    #[error("inconsistent model: {0}")]
    Inconsistent(#[from] bitwise_nn::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Real,
    Ternary,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Real => "real",
            Phase::Ternary => "ternary",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Real { encoding: Encoding, net: RealNetwork },
    Ternary { encoding: Encoding, state: BnnState },
}

impl Model {
    pub fn phase(&self) -> Phase {
        match self {
            Model::Real { .. } => Phase::Real,
            Model::Ternary { .. } => Phase::Ternary,
        }
    }

    pub fn encoding(&self) -> Encoding {
        match self {
            Model::Real { encoding, .. } | Model::Ternary { encoding, .. } => *encoding,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            Model::Real { net, .. } => net.dims(),
            Model::Ternary { state, .. } => state.shadow().dims(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        fs::write(path, encode_model(self))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        decode_model(&fs::read(path)?)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_plane(out: &mut Vec<u8>, p: &BitPlane) {
    for w in p.words() {
        out.extend_from_slice(&w.to_le_bytes());
    }
}

fn put_real(out: &mut Vec<u8>, net: &RealNetwork) {
    for layer in net.layers() {
        layer.weights.iter().for_each(|&v| put_f64(out, v));
        layer.bias.iter().for_each(|&v| put_f64(out, v));
    }
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    out.push(match model.phase() {
        Phase::Real => 0,
        Phase::Ternary => 1,
    });
    out.push(model.encoding().tag());
    out.extend_from_slice(&[0, 0]);
    let dims = model.dims();
    put_u32(&mut out, (dims.len() - 1) as u32);
    dims.iter().for_each(|&d| put_u32(&mut out, d as u32));

    match model {
        Model::Real { net, .. } => put_real(&mut out, net),
        Model::Ternary { state, .. } => {
            put_f64(&mut out, state.spec().sparsity());
            out.push(match state.beta_mode() {
                BetaMode::Rederive => 0,
                BetaMode::Frozen => 1,
            });
            out.extend_from_slice(&[0, 0, 0]);
            put_u32(&mut out, state.epoch() as u32);
            for t in state.thresholds() {
                put_f64(&mut out, t.weights);
                put_f64(&mut out, t.bias);
            }
            for layer in state.ternary() {
                (0..layer.rows()).for_each(|i| put_plane(&mut out, layer.sign_row(i)));
                (0..layer.rows()).for_each(|i| put_plane(&mut out, layer.mask_row(i)));
                put_plane(&mut out, layer.bias_sign());
                put_plane(&mut out, layer.bias_mask());
            }
            put_real(&mut out, state.shadow());
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self.pos.checked_add(n).ok_or(ModelFileError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(ModelFileError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelFileError> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn plane(&mut self, n_bits: usize) -> Result<BitPlane, ModelFileError> {
        let words = (0..n_bits.div_ceil(64))
            .map(|_| self.u64())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BitPlane::from_words(n_bits, words)?)
    }

    fn real(&mut self, dims: &[usize]) -> Result<RealNetwork, ModelFileError> {
        let layers = dims
            .windows(2)
            .map(|w| {
                let (cols, rows) = (w[0], w[1]);
                let weights = self.f64s(rows * cols)?;
                let bias = self.f64s(rows)?;
                Ok(RealLayer::from_parts(rows, cols, weights, bias)?)
            })
            .collect::<Result<Vec<_>, ModelFileError>>()?;
        Ok(RealNetwork::from_layers(layers)?)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model, ModelFileError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(ModelFileError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(ModelFileError::Version(version));
    }
    if bytes.len() < 12 {
        return Err(ModelFileError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelFileError::Crc { stored, computed });
    }

    let mut r = Reader { bytes: body, pos: 8 };
    let phase = match r.u8()? {
        0 => Phase::Real,
        1 => Phase::Ternary,
        tag => return Err(ModelFileError::Tag { what: "phase", tag }),
    };
    let tag = r.u8()?;
    let encoding = Encoding::from_tag(tag).ok_or(ModelFileError::Tag {
        what: "encoding",
        tag,
    })?;
    r.take(2)?;
    let n_layers = r.u32()? as usize;
    if n_layers == 0 {
        return Err(bitwise_nn::Error::Config("model has no layers".into()).into());
    }
    let dims = (0..=n_layers)
        .map(|_| r.u32().map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;

    let model = match phase {
        Phase::Real => Model::Real {
            encoding,
            net: r.real(&dims)?,
        },
        Phase::Ternary => {
            let spec = TernarizeSpec::new(r.f64()?)?;
            let beta_mode = match r.u8()? {
                0 => BetaMode::Rederive,
                1 => BetaMode::Frozen,
                tag => return Err(ModelFileError::Tag { what: "beta mode", tag }),
            };
            r.take(3)?;
            let epoch = r.u32()? as usize;
            let thresholds = (0..n_layers)
                .map(|_| {
                    Ok(Thresholds {
                        weights: r.f64()?,
                        bias: r.f64()?,
                    })
                })
                .collect::<Result<Vec<_>, ModelFileError>>()?;
            let mut ternary = Vec::with_capacity(n_layers);
            for w in dims.windows(2) {
                let (cols, rows) = (w[0], w[1]);
                let sign = (0..rows).map(|_| r.plane(cols)).collect::<Result<Vec<_>, _>>()?;
                let mask = (0..rows).map(|_| r.plane(cols)).collect::<Result<Vec<_>, _>>()?;
                let bias_sign = r.plane(rows)?;
                let bias_mask = r.plane(rows)?;
                ternary.push(TernaryLayer::from_planes(sign, mask, bias_sign, bias_mask)?);
            }
            let shadow = r.real(&dims)?;
            let state = BnnState::from_parts(ternary, shadow, spec, beta_mode, thresholds, epoch)?;
            Model::Ternary { encoding, state }
        }
    };
    if r.pos != body.len() {
        return Err(ModelFileError::Trailing(body.len() - r.pos));
    }
    Ok(model)
}

//! MNIST IDX loading and the three input binarizations.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bitcore::BitPlane;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// File-name prefix used by the canonical MNIST distribution.
    pub fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// How pixel intensities become input bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Encoding {
    /// `sign(2x - 1)`.
    Bipolar,
    /// `round(x)`, half rounding up.
    Binary01,
    /// Two bits per pixel encoding which quarter of `[0, 1]` the intensity falls in.
    Fixed2,
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [Encoding::Bipolar, Encoding::Binary01, Encoding::Fixed2];

    pub fn bits_per_pixel(self) -> usize {
        match self {
            Encoding::Fixed2 => 2,
            _ => 1,
        }
    }

    /// Input width for images with `pixels` pixels.
    pub fn width(self, pixels: usize) -> usize {
        pixels * self.bits_per_pixel()
    }

    pub fn tag(self) -> u8 {
        match self {
            Encoding::Bipolar => 0,
            Encoding::Binary01 => 1,
            Encoding::Fixed2 => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Encoding::ALL.into_iter().find(|e| e.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Bipolar => "bipolar",
            Encoding::Binary01 => "binary01",
            Encoding::Fixed2 => "fixed2",
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown encoding {s:?}")))
    }
}

/// Quarter of `[0, 1]` that `x` falls in; boundaries belong to the upper region.
#[inline]
pub fn fixed2_code(x: f64) -> u8 {
    ((4.0 * x).floor() as i64).clamp(0, 3) as u8
}

/// Binarizes one image given as intensities in `[0, 1]`.
pub fn encode_intensities(xs: &[f64], encoding: Encoding) -> BitPlane {
    match encoding {
        Encoding::Bipolar => BitPlane::from_bools(xs.iter().map(|&x| 2.0 * x - 1.0 >= 0.0)),
        Encoding::Binary01 => BitPlane::from_bools(xs.iter().map(|&x| x >= 0.5)),
        Encoding::Fixed2 => BitPlane::from_bools(xs.iter().flat_map(|&x| {
            let c = fixed2_code(x);
            [c & 2 != 0, c & 1 != 0]
        })),
    }
}

/// Real-valued network input for one image (phase-1 training).
pub fn real_inputs_into(xs: &[f64], encoding: Encoding, out: &mut [f64]) {
    assert_eq!(out.len(), encoding.width(xs.len()));
    match encoding {
        Encoding::Bipolar => {
            for (o, &x) in out.iter_mut().zip(xs) {
                *o = 2.0 * x - 1.0;
            }
        }
        Encoding::Binary01 => out.copy_from_slice(xs),
        // already binary: feed the ±1 bits themselves
        Encoding::Fixed2 => encode_intensities(xs, encoding).unpack_f64_into(out),
    }
}

/// Intensities that a bit plane stands for; re-encoding them reproduces the plane.
pub fn implied_intensities(bits: &BitPlane, encoding: Encoding) -> Vec<f64> {
    match encoding {
        Encoding::Bipolar | Encoding::Binary01 => {
            (0..bits.len()).map(|i| if bits.get(i) { 1.0 } else { 0.0 }).collect()
        }
        Encoding::Fixed2 => (0..bits.len() / 2)
            .map(|p| {
                let code = (bits.get(2 * p) as u8) << 1 | bits.get(2 * p + 1) as u8;
                code as f64 / 4.0
            })
            .collect(),
    }
}

/// Images and labels as read from IDX files. Pixels stay as bytes; intensity is `p / 255`.
#[derive(Clone, Debug)]
pub struct RawDataset {
    pub split: Split,
    pub rows: usize,
    pub cols: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl RawDataset {
    pub fn new(split: Split, rows: usize, cols: usize, pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let per = rows * cols;
        if pixels.len() != per * labels.len() {
            return Err(Error::CountMismatch {
                images: pixels.len().checked_div(per).unwrap_or(0),
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= NUM_CLASSES)
        {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                classes: NUM_CLASSES,
            });
        }
        Ok(Self {
            split,
            rows,
            cols,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let p = self.pixels_per_image();
        &self.pixels[i * p..(i + 1) * p]
    }

    pub fn intensities(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| p as f64 / 255.0).collect()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        if n < self.len() {
            self.labels.truncate(n);
            self.pixels.truncate(n * self.pixels_per_image());
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            needed: at + 4,
            available: bytes.len(),
        })
}

/// Parses an IDX payload with the expected magic; returns the dimensions and data.
pub fn parse_idx(bytes: &[u8], expected_magic: u32, path: &Path) -> Result<(Vec<usize>, Vec<u8>)> {
    let magic = be_u32(bytes, 0, path)?;
    if magic != expected_magic {
        return Err(Error::WrongMagic {
            path: path.to_path_buf(),
            expected: expected_magic,
            found: magic,
        });
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim)
        .map(|d| be_u32(bytes, 4 + 4 * d, path).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * ndim;
    let len: usize = dims.iter().product();
    let data = bytes.get(start..start + len).ok_or_else(|| Error::Truncated {
        path: path.to_path_buf(),
        needed: start + len,
        available: bytes.len(),
    })?;
    Ok((dims, data.to_vec()))
}

/// Serializes an IDX file (unsigned byte payload).
pub fn write_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    assert_eq!(dims.iter().product::<usize>(), data.len());
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    out.extend_from_slice(&(0x0800 | dims.len() as u32).to_be_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

/// Loads an image/label IDX pair.
pub fn load_idx(path_images: &Path, path_labels: &Path, split: Split) -> Result<RawDataset> {
    let (idims, pixels) = parse_idx(&read_file(path_images)?, IMAGES_MAGIC, path_images)?;
    let (ldims, labels) = parse_idx(&read_file(path_labels)?, LABELS_MAGIC, path_labels)?;
    if idims[0] != ldims[0] {
        return Err(Error::CountMismatch {
            images: idims[0],
            labels: ldims[0],
        });
    }
    RawDataset::new(split, idims[1], idims[2], pixels, labels)
}

pub fn split_paths(dir: &Path, split: Split) -> (PathBuf, PathBuf) {
    let p = split.prefix();
    (
        dir.join(format!("{p}-images-idx3-ubyte")),
        dir.join(format!("{p}-labels-idx1-ubyte")),
    )
}

/// Loads one split from a directory holding the canonical MNIST file names.
pub fn load_split(dir: &Path, split: Split) -> Result<RawDataset> {
    let (images, labels) = split_paths(dir, split);
    load_idx(&images, &labels, split)
}

/// A dataset prepared for both training phases.
#[derive(Clone, Debug)]
pub struct EncodedDataset {
    encoding: Encoding,
    width: usize,
    bits: Vec<BitPlane>,
    raw: RawDataset,
}

impl EncodedDataset {
    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    /// Number of network inputs.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        self.raw.labels()
    }

    pub fn bits(&self, i: usize) -> &BitPlane {
        &self.bits[i]
    }

    pub fn raw(&self) -> &RawDataset {
        &self.raw
    }

    /// Writes the phase-1 real input of sample `i` into `out`.
    pub fn real_input_into(&self, i: usize, out: &mut [f64]) {
        real_inputs_into(&self.raw.intensities(i), self.encoding, out);
    }

    pub fn real_input(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        self.real_input_into(i, &mut out);
        out
    }
}

pub fn encode(raw: &RawDataset, encoding: Encoding) -> EncodedDataset {
    let bits = (0..raw.len())
        .map(|i| encode_intensities(&raw.intensities(i), encoding))
        .collect();
    EncodedDataset {
        encoding,
        width: encoding.width(raw.pixels_per_image()),
        bits,
        raw: raw.clone(),
    }
}

//! MNIST IDX ingestion, pixel scaling, subsetting, and synthetic test data.
//!
//! IDX layout: a 4-byte big-endian magic (2051 for images, 2049 for labels),
//! big-endian `u32` dimensions, then unsigned-byte payload. Parsing is strict:
//! a payload that is shorter or longer than the header promises is rejected.
//! Gzip-compressed files are detected by their magic bytes and inflated
//! transparently.

use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};
use crate::numerics::{RandomStream, Vector};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const NUM_CLASSES: usize = 10;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Raw IDX image tensor: `count` images of `rows × cols` bytes, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, index: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[index * size..(index + 1) * size]
    }

    /// Re-serializes to uncompressed IDX.
    pub fn to_idx_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        for dim in [self.count, self.rows, self.cols] {
            out.extend_from_slice(&(dim as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Unlabeled samples of a common width, every component in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Vector>,
    dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub base: Dataset,
    pub labels: Vec<u8>,
}

pub fn read_maybe_gzipped(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&GZIP_MAGIC) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Corrupt(format!("{}: gzip stream: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&read_maybe_gzipped(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read_maybe_gzipped(path.as_ref())?)
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Corrupt(format!("header truncated at byte {offset}")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            expected: "image",
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let expected = count
        .checked_mul(rows)
        .and_then(|n| n.checked_mul(cols))
        .ok_or_else(|| Error::Corrupt("image dimensions overflow".into()))?;
    let payload = &bytes[16..];
    if payload.len() != expected {
        return Err(Error::Corrupt(format!(
            "image payload is {} bytes, header promises {expected}",
            payload.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            expected: "label",
            found: magic,
        });
    }
    let count = be_u32(bytes, 4)? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::Corrupt(format!(
            "label payload is {} bytes, header promises {count}",
            payload.len()
        )));
    }
    if let Some(&bad) = payload.iter().find(|&&l| l as usize >= NUM_CLASSES) {
        return Err(Error::LabelOutOfRange {
            label: bad as usize,
            classes: NUM_CLASSES,
        });
    }
    Ok(payload.to_vec())
}

pub fn labels_to_idx_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Scales every pixel by 1/255 and flattens each image row-major.
pub fn to_dataset(images: &IdxImages) -> Dataset {
    let dim = images.rows * images.cols;
    let samples = (0..images.count)
        .map(|i| images.image(i).iter().map(|&p| p as f64 / 255.0).collect())
        .collect();
    Dataset { samples, dim }
}

impl Dataset {
    /// Validates widths and the `[0, 1]` range.
    pub fn new(samples: Vec<Vector>, dim: usize) -> Result<Self> {
        for s in &samples {
            if s.len() != dim {
                return Err(Error::dim("Dataset::new", dim, s.len()));
            }
            if let Some(v) = s.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidConfig(format!(
                    "sample component {v} outside [0, 1]"
                )));
            }
        }
        Ok(Dataset { samples, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Vector> {
        self.samples
    }

    /// Selected samples in the given order. Indices must be in range and
    /// distinct; an empty list yields an empty dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        check_indices(indices, self.len())?;
        Ok(Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            dim: self.dim,
        })
    }

    /// The first `n` samples, or all of them if there are fewer.
    pub fn head(&self, n: usize) -> Dataset {
        Dataset {
            samples: self.samples.iter().take(n).cloned().collect(),
            dim: self.dim,
        }
    }
}

impl LabeledDataset {
    pub fn new(base: Dataset, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != base.len() {
            return Err(Error::dim("LabeledDataset::new", base.len(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange {
                label: bad as usize,
                classes: NUM_CLASSES,
            });
        }
        Ok(LabeledDataset { base, labels })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let base = self.base.subset(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(LabeledDataset { base, labels })
    }

    pub fn head(&self, n: usize) -> LabeledDataset {
        LabeledDataset {
            base: self.base.head(n),
            labels: self.labels.iter().take(n).copied().collect(),
        }
    }
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(indices.len());
    for &i in indices {
        if i >= len {
            return Err(Error::IndexOutOfRange { index: i, len });
        }
        if !seen.insert(i) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    Ok(())
}

/// Loads an images/labels pair and checks that the counts agree.
pub fn load_labeled(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<LabeledDataset> {
    let images = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    LabeledDataset::new(to_dataset(&images), labels)
}

/// Clustered data for fast tests: centers uniform in
/// `[0.2, 0.8]^dim`, each sample its center plus uniform noise of half-width
/// `spread`, clipped to `[0, 1]`. Sample `i` belongs to cluster
/// `i % n_clusters`.
pub fn synthetic_blobs(
    dim: usize,
    n_clusters: usize,
    n_samples: usize,
    spread: f64,
    rng: &mut RandomStream,
) -> Result<LabeledDataset> {
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "synthetic_blobs: dim must be at least 1".into(),
        ));
    }
    if n_clusters == 0 || n_clusters > NUM_CLASSES {
        return Err(Error::InvalidConfig(format!(
            "synthetic_blobs: n_clusters must be in 1..={NUM_CLASSES}, got {n_clusters}"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| (0..dim).map(|_| rng.uniform_in(0.2, 0.8)).collect())
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let c = i % n_clusters;
        let sample: Vector = centers[c]
            .iter()
            .map(|&m| {
                if spread == 0.0 {
                    m
                } else {
                    (m + rng.uniform_in(-spread, spread)).clamp(0.0, 1.0)
                }
            })
            .collect();
        samples.push(sample);
        labels.push(c as u8);
    }
    Ok(LabeledDataset {
        base: Dataset { samples, dim },
        labels,
    })
}

//! Reader and writer for the IDX container used by MNIST-family datasets:
//! a big-endian magic word, big-endian `u32` dimension sizes, then raw `u8`.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Features scaled to `[0, 1]` (one row per image) and the original labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parses an image file; returns `(count, rows * cols, pixels)`.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let err = |reason: String| Error::Parse {
        kind: "IDX image",
        path: path.to_path_buf(),
        reason,
    };
    let magic = be_u32(bytes, 0).ok_or_else(|| err("missing header".into()))?;
    if magic != IMAGE_MAGIC {
        return Err(err(format!("bad magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")));
    }
    let (n, rows, cols) = match (be_u32(bytes, 4), be_u32(bytes, 8), be_u32(bytes, 12)) {
        (Some(n), Some(r), Some(c)) => (n as usize, r as usize, c as usize),
        _ => return Err(err("truncated header".into())),
    };
    let want = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < want {
        return Err(err(format!("truncated payload: need {want} bytes, found {}", payload.len())));
    }
    Ok((n, rows * cols, payload[..want].to_vec()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let err = |reason: String| Error::Parse {
        kind: "IDX label",
        path: path.to_path_buf(),
        reason,
    };
    let magic = be_u32(bytes, 0).ok_or_else(|| err("missing header".into()))?;
    if magic != LABEL_MAGIC {
        return Err(err(format!("bad magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")));
    }
    let n = be_u32(bytes, 4).ok_or_else(|| err("truncated header".into()))? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(err(format!("truncated payload: need {n} labels, found {}", payload.len())));
    }
    Ok(payload[..n].to_vec())
}

/// Loads an image/label file pair, scaling pixel bytes to `[0, 1]`.
pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<Dataset> {
    let images = fs::read(image_path).map_err(|e| Error::io(image_path, e))?;
    let labels = fs::read(label_path).map_err(|e| Error::io(label_path, e))?;
    let (n, dim, pixels) = parse_images(&images, image_path)?;
    let labels = parse_labels(&labels, label_path)?;
    if labels.len() != n {
        return Err(Error::Parse {
            kind: "IDX pair",
            path: label_path.to_path_buf(),
            reason: format!("count mismatch: {n} images but {} labels", labels.len()),
        });
    }
    let features = Array2::from_shape_vec((n, dim), pixels.into_iter().map(|p| p as f64 / 255.0).collect())
        .map_err(|e| Error::Data(e.to_string()))?;
    Ok(Dataset {
        features,
        labels: labels.into_iter().map(usize::from).collect(),
    })
}

/// Serializes square images and labels as an IDX pair.
pub fn encode_idx(pixels: &[u8], side: usize, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + pixels.len());
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    img.extend_from_slice(&(side as u32).to_be_bytes());
    img.extend_from_slice(&(side as u32).to_be_bytes());
    img.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}

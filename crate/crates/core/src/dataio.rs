//! IDX files and the 28x28 to 20x20 area resize.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const SIDE_IN: usize = 28;
pub const SIDE_OUT: usize = 20;
pub const DIM: usize = SIDE_OUT * SIDE_OUT;

/// IDX contents as stored: row-major `u8` pixels plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Image `k` scaled to [0, 1].
    pub fn image(&self, k: usize) -> Vec<f64> {
        let n = self.rows * self.cols;
        self.pixels[k * n..(k + 1) * n].iter().map(|&p| p as f64 / 255.0).collect()
    }
}

/// Flattened samples of `dim` values in [0, 1] with digit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Dataset {
    /// Downsampled MNIST layout, `DIM` values per sample.
    pub fn new(images: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        Self::with_dim(DIM, images, labels)
    }

    pub fn with_dim(dim: usize, images: Vec<f32>, labels: Vec<u8>) -> Result<Self> {
        if dim == 0 || images.len() != labels.len() * dim {
            return Err(Error::Shape(format!("{} pixels for {} labels of {dim}", images.len(), labels.len())));
        }
        if let Some(p) = images.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid(format!("pixel {} of image {} is {}", p % dim, p / dim, images[p])));
        }
        if let Some(k) = labels.iter().position(|&l| l > 9) {
            return Err(Error::Invalid(format!("label {} at index {k} is not a digit", labels[k])));
        }
        Ok(Self { dim, images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, k: usize) -> &[f32] {
        &self.images[k * self.dim..(k + 1) * self.dim]
    }

    /// First `n` samples (or all of them).
    pub fn take(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset { dim: self.dim, images: self.images[..n * self.dim].to_vec(), labels: self.labels[..n].to_vec() }
    }

    pub fn from_raw(raw: &RawDataset) -> Result<Self> {
        Self::from_raw_with(Execution::default(), raw)
    }

    pub fn from_raw_with(exec: Execution, raw: &RawDataset) -> Result<Self> {
        if (raw.rows, raw.cols) != (SIDE_IN, SIDE_IN) {
            return Err(Error::Shape(format!("expected 28x28 images, got {}x{}", raw.rows, raw.cols)));
        }
        let small = exec::map_range(exec, raw.len(), |k| downsample_400(&raw.image(k)));
        let images = small.into_iter().flatten().map(|v| v.clamp(0.0, 1.0) as f32).collect();
        Self::new(images, raw.labels.clone())
    }
}

fn read_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(format!("byte offset {offset}"), format!("truncated header: missing {what}")))
}

fn check_magic(bytes: &[u8], expected: u32, kind: &str) -> Result<()> {
    let magic = read_u32(bytes, 0, "magic number")?;
    if magic != expected {
        return Err(Error::parse("byte offset 0", format!("magic {magic} is not the IDX {kind} magic {expected}")));
    }
    Ok(())
}

/// Parses an IDX image file: returns (count, rows, cols, pixels).
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    check_magic(bytes, IMAGE_MAGIC, "image")?;
    let n = read_u32(bytes, 4, "item count")? as usize;
    let rows = read_u32(bytes, 8, "row count")? as usize;
    let cols = read_u32(bytes, 12, "column count")? as usize;
    let payload = &bytes[16..];
    let expected = n * rows * cols;
    if payload.len() != expected {
        return Err(Error::parse(
            format!("byte offset {}", 16 + payload.len().min(expected)),
            format!("payload is {} bytes, header declares {n}x{rows}x{cols} = {expected}", payload.len()),
        ));
    }
    Ok((n, rows, cols, payload.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC, "label")?;
    let n = read_u32(bytes, 4, "item count")? as usize;
    let payload = &bytes[8..];
    if payload.len() != n {
        return Err(Error::parse(
            format!("byte offset {}", 8 + payload.len().min(n)),
            format!("payload is {} bytes, header declares {n} labels", payload.len()),
        ));
    }
    Ok(payload.to_vec())
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<RawDataset> {
    let (n, rows, cols, pixels) = parse_idx_images(&std::fs::read(images_path)?)?;
    let labels = parse_idx_labels(&std::fs::read(labels_path)?)?;
    if labels.len() != n {
        return Err(Error::parse(
            "byte offset 4",
            format!(
                "{} has {n} images but {} has {} labels",
                images_path.display(),
                labels_path.display(),
                labels.len()
            ),
        ));
    }
    Ok(RawDataset { rows, cols, pixels, labels })
}

pub fn write_idx_images(raw: &RawDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + raw.pixels.len());
    for v in [IMAGE_MAGIC, raw.len() as u32, raw.rows as u32, raw.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&raw.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Overlap weights of the 1-D area resize, `out x in`.
///
/// Output cell `j` covers `[j·s, (j+1)·s)` with `s = in/out`; each weight is
/// the overlap length divided by `s`, so rows sum to one.
pub fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<f64>> {
    let s = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|j| {
            let (lo, hi) = (j as f64 * s, (j + 1) as f64 * s);
            (0..n_in)
                .map(|i| {
                    let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
                    overlap / s
                })
                .collect()
        })
        .collect()
}

/// Area-averaging resize of a 28x28 image to 20x20.
pub fn downsample_400(image: &[f64]) -> Vec<f64> {
    assert_eq!(image.len(), SIDE_IN * SIDE_IN, "downsample_400 expects 784 pixels");
    let a = area_weights(SIDE_IN, SIDE_OUT);
    // Rows first, then columns.
    let mut tmp = vec![0.0; SIDE_OUT * SIDE_IN];
    for (j, wj) in a.iter().enumerate() {
        for (i, &w) in wj.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for c in 0..SIDE_IN {
                tmp[j * SIDE_IN + c] += w * image[i * SIDE_IN + c];
            }
        }
    }
    let mut out = vec![0.0; DIM];
    for r in 0..SIDE_OUT {
        for (k, wk) in a.iter().enumerate() {
            out[r * SIDE_OUT + k] = wk.iter().zip(&tmp[r * SIDE_IN..(r + 1) * SIDE_IN]).map(|(w, v)| w * v).sum();
        }
    }
    out
}

/// `$MNIST_DIR` if set, else `data/mnist` under `root`.
pub fn mnist_dir(root: &Path) -> PathBuf {
    std::env::var_os("MNIST_DIR").map(PathBuf::from).unwrap_or_else(|| root.join("data").join("mnist"))
}

/// Loads the train (`train = true`) or test split from an MNIST directory.
pub fn load_mnist(dir: &Path, train: bool) -> Result<RawDataset> {
    let prefix = if train { "train" } else { "t10k" };
    let images = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let labels = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    for p in [&images, &labels] {
        if !p.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!(
                    "{} not found; place the four uncompressed MNIST IDX files in {} or set MNIST_DIR",
                    p.display(),
                    dir.display()
                ),
            )));
        }
    }
    load_idx(&images, &labels)
}

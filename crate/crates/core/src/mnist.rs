//! MNIST in the IDX container format.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const IMAGE_ROWS: usize = 28;
pub const IMAGE_COLS: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_ROWS * IMAGE_COLS;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Error)]
pub enum MnistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated, need {needed} bytes but file has {actual}")]
    Truncated {
        path: PathBuf,
        needed: usize,
        actual: usize,
    },
    #[error("{path}: images are {rows}x{cols}, expected 28x28")]
    BadDimensions { path: PathBuf, rows: u32, cols: u32 },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is not a digit")]
    BadLabel { index: usize, label: u8 },
}

/// Flattened 28x28 grayscale images with digit labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    images: Vec<u8>,
    labels: Vec<u8>,
}

impl Dataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>) -> Result<Self, MnistError> {
        if images.len() != labels.len() * IMAGE_PIXELS {
            return Err(MnistError::CountMismatch {
                images: images.len() / IMAGE_PIXELS,
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
            return Err(MnistError::BadLabel { index, label });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        &self.images[i * IMAGE_PIXELS..(i + 1) * IMAGE_PIXELS]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn images(&self) -> &[u8] {
        &self.images
    }

    /// First `n` samples (or all of them).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images[..n * IMAGE_PIXELS].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    /// Samples in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut images = Vec::with_capacity(indices.len() * IMAGE_PIXELS);
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        Dataset {
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Stable content fingerprint (SHA-256 over labels then pixels).
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update(&self.labels);
        h.update(&self.images);
        hex::encode(h.finalize())
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, MnistError> {
    fs::read(path).map_err(|source| MnistError::Io {
        path: path.to_owned(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn check_header(path: &Path, bytes: &[u8], magic: u32, header_len: usize) -> Result<(), MnistError> {
    if bytes.len() < 4 {
        return Err(MnistError::Truncated {
            path: path.to_owned(),
            needed: header_len,
            actual: bytes.len(),
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(MnistError::BadMagic {
            path: path.to_owned(),
            found,
            expected: magic,
        });
    }
    if bytes.len() < header_len {
        return Err(MnistError::Truncated {
            path: path.to_owned(),
            needed: header_len,
            actual: bytes.len(),
        });
    }
    Ok(())
}

pub fn parse_images(path: &Path, bytes: &[u8]) -> Result<Vec<u8>, MnistError> {
    check_header(path, bytes, IMAGES_MAGIC, 16)?;
    let count = be_u32(bytes, 4) as usize;
    let (rows, cols) = (be_u32(bytes, 8), be_u32(bytes, 12));
    if rows as usize != IMAGE_ROWS || cols as usize != IMAGE_COLS {
        return Err(MnistError::BadDimensions {
            path: path.to_owned(),
            rows,
            cols,
        });
    }
    let needed = 16 + count * IMAGE_PIXELS;
    if bytes.len() < needed {
        return Err(MnistError::Truncated {
            path: path.to_owned(),
            needed,
            actual: bytes.len(),
        });
    }
    Ok(bytes[16..needed].to_vec())
}

pub fn parse_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>, MnistError> {
    check_header(path, bytes, LABELS_MAGIC, 8)?;
    let count = be_u32(bytes, 4) as usize;
    let needed = 8 + count;
    if bytes.len() < needed {
        return Err(MnistError::Truncated {
            path: path.to_owned(),
            needed,
            actual: bytes.len(),
        });
    }
    Ok(bytes[8..needed].to_vec())
}

pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Dataset, MnistError> {
    let images = parse_images(images_path, &read_file(images_path)?)?;
    let labels = parse_labels(labels_path, &read_file(labels_path)?)?;
    Dataset::new(images, labels)
}

/// The 10,000-image test split from a directory holding the standard files.
pub fn load_test_split(dir: &Path) -> Result<Dataset, MnistError> {
    load_mnist(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))
}

/// The 60,000-image training split.
pub fn load_train_split(dir: &Path) -> Result<Dataset, MnistError> {
    load_mnist(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))
}

/// Serializes a dataset back into (images, labels) IDX byte streams.
pub fn to_idx(data: &Dataset) -> (Vec<u8>, Vec<u8>) {
    let n = data.len() as u32;
    let mut images = Vec::with_capacity(16 + data.images.len());
    for v in [IMAGES_MAGIC, n, IMAGE_ROWS as u32, IMAGE_COLS as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend_from_slice(&data.images);
    let mut labels = Vec::with_capacity(8 + data.labels.len());
    labels.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend_from_slice(&data.labels);
    (images, labels)
}

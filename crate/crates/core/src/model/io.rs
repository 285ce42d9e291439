//! `.mlpw` weight files.
//!
//! Little-endian layout:
//!
//! ```text
//! "MLPW"            magic
//! u16               format version (1)
//! u8                total_bits
//! u8                frac_bits
//! u8                number of layer sizes
//! u32 x count       layer sizes
//! payload           per layer: row-major weights, then biases
//! u32               CRC-32 (IEEE) of the payload
//! ```
//!
//! Values with `total_bits <= 8` take one byte each, wider values two bytes.
//! Version 1 files always describe ReLU networks.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use super::{Activation, MlpModel, ModelError, Topology};
use crate::fxp::FixedPointFormat;

pub const MODEL_MAGIC: &[u8; 4] = b"MLPW";
pub const MODEL_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a weight file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u16),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("file truncated: need {needed} bytes, have {actual}")]
    Truncated { needed: usize, actual: usize },
    #[error("payload checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("only ReLU models can be stored")]
    UnsupportedActivation,
}

fn bytes_per_value(fmt: FixedPointFormat) -> usize {
    if fmt.total_bits() <= 8 {
        1
    } else {
        2
    }
}

pub fn write_model<W: Write>(model: &MlpModel, mut out: W) -> Result<(), ModelFileError> {
    if model.activation() != Activation::Relu {
        return Err(ModelFileError::UnsupportedActivation);
    }
    let fmt = model.format();
    let sizes = model.topology().layer_sizes();
    let mut header = Vec::with_capacity(9 + 4 * sizes.len());
    header.extend_from_slice(MODEL_MAGIC);
    header.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    header.push(fmt.total_bits());
    header.push(fmt.frac_bits());
    header.push(sizes.len() as u8);
    for &s in sizes {
        header.extend_from_slice(&(s as u32).to_le_bytes());
    }

    let width = bytes_per_value(fmt);
    let mut payload = Vec::with_capacity(model.param_count() * width);
    for raw in model.params_raw() {
        let bits = fmt.to_bits(raw);
        if width == 1 {
            payload.push(bits as u8);
        } else {
            payload.extend_from_slice(&(bits as u16).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&payload);
    out.write_all(&header)?;
    out.write_all(&payload)?;
    out.write_all(&crc.to_le_bytes())?;
    Ok(())
}

pub fn read_model(bytes: &[u8]) -> Result<MlpModel, ModelFileError> {
    let need = |needed: usize| -> Result<(), ModelFileError> {
        if bytes.len() < needed {
            Err(ModelFileError::Truncated {
                needed,
                actual: bytes.len(),
            })
        } else {
            Ok(())
        }
    };
    need(4)?;
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic(magic));
    }
    need(9)?;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let fmt = FixedPointFormat::new(bytes[6], bytes[7])
        .map_err(|e| ModelFileError::MalformedHeader(e.to_string()))?;
    let count = bytes[8] as usize;
    let header_len = 9 + 4 * count;
    need(header_len)?;
    let sizes: Vec<usize> = (0..count)
        .map(|i| u32::from_le_bytes(bytes[9 + 4 * i..13 + 4 * i].try_into().unwrap()) as usize)
        .collect();
    let topology = Topology::new(sizes).map_err(|e| ModelFileError::MalformedHeader(e.to_string()))?;

    let width = bytes_per_value(fmt);
    let payload_len = topology.param_count() * width;
    let total = header_len + payload_len + 4;
    need(total)?;
    if bytes.len() > total {
        return Err(ModelFileError::ShapeMismatch(format!(
            "{} trailing bytes after the checksum for layer sizes {:?}",
            bytes.len() - total,
            topology.layer_sizes()
        )));
    }
    let payload = &bytes[header_len..header_len + payload_len];
    let stored = u32::from_le_bytes(bytes[total - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(ModelFileError::ChecksumMismatch { stored, computed });
    }

    let value = |i: usize| -> i16 {
        let bits = if width == 1 {
            payload[i] as u32
        } else {
            u16::from_le_bytes([payload[2 * i], payload[2 * i + 1]]) as u32
        };
        fmt.sign_extend(bits) as i16
    };
    let mut params = Vec::with_capacity(topology.num_layers());
    let mut at = 0;
    for w in topology.layer_sizes().windows(2) {
        let weights = (at..at + w[0] * w[1]).map(value).collect();
        at += w[0] * w[1];
        let biases = (at..at + w[1]).map(value).collect();
        at += w[1];
        params.push((weights, biases));
    }
    MlpModel::from_raw(topology, fmt, Activation::Relu, params).map_err(|e| match e {
        ModelError::AccumulatorOverflow { .. } => ModelFileError::MalformedHeader(e.to_string()),
        other => ModelFileError::ShapeMismatch(other.to_string()),
    })
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<(), ModelFileError> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel, ModelFileError> {
    read_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fxp::FixedValue;

    fn sample() -> MlpModel {
        let topo = Topology::new(vec![3, 4, 2]).unwrap();
        let mut m = MlpModel::zeros(topo, FixedPointFormat::Q1_7).unwrap();
        for i in 0..m.param_count() {
            m.set_param_raw(i, (i as i32 * 37) % 256 - 128);
        }
        m
    }

    fn encoded(m: &MlpModel) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip() {
        let m = sample();
        let bytes = encoded(&m);
        assert_eq!(bytes.len(), 9 + 3 * 4 + m.param_count() + 4);
        assert_eq!(&bytes[..4], b"MLPW");
        assert_eq!(&bytes[4..9], &[1, 0, 8, 7, 3]);
        let back = read_model(&bytes).unwrap();
        assert!(back.same_parameters(&m));
    }

    #[test]
    fn wide_format_round_trip() {
        let fmt = FixedPointFormat::new(12, 8).unwrap();
        let mut m = MlpModel::zeros(Topology::new(vec![3, 2]).unwrap(), fmt).unwrap();
        m.set_weight(0, 1, 1, FixedValue::from_raw(-2000, fmt));
        m.set_bias(0, 0, FixedValue::from_raw(2047, fmt));
        let back = read_model(&encoded(&m)).unwrap();
        assert!(back.same_parameters(&m));
        assert_eq!(back.weight(0, 1, 1).raw(), -2000);
    }

    #[test]
    fn distinct_errors() {
        let bytes = encoded(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&bad), Err(ModelFileError::BadMagic(_))));

        assert!(matches!(read_model(&bytes[..bytes.len() - 3]), Err(ModelFileError::Truncated { .. })));

        let mut flipped = bytes.clone();
        flipped[25] ^= 0x10;
        assert!(matches!(read_model(&flipped), Err(ModelFileError::ChecksumMismatch { .. })));

        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(read_model(&longer), Err(ModelFileError::ShapeMismatch(_))));

        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(read_model(&version), Err(ModelFileError::UnsupportedVersion(9))));

        let mut fmt = bytes;
        fmt[7] = 8;
        assert!(matches!(read_model(&fmt), Err(ModelFileError::MalformedHeader(_))));
    }
}

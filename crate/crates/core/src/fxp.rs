//! Signed two's-complement fixed-point numbers.
//!
//! A [`FixedPointFormat`] with `total_bits = n` and `frac_bits = f` stores a
//! value `x` as the integer `raw = round(x * 2^f)`, saturated to the `n`-bit
//! signed range. Rounding is half away from zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("invalid fixed-point format: total_bits={total_bits}, frac_bits={frac_bits} (need 1 <= frac_bits < total_bits <= 16)")]
    Invalid { total_bits: u8, frac_bits: u8 },
}

/// Q-format descriptor. Always signed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    total_bits: u8,
    frac_bits: u8,
}

impl FixedPointFormat {
    /// Signed Q1.7: 8 bits, 7 of them fractional. Covers [-1, 127/128].
    pub const Q1_7: FixedPointFormat = FixedPointFormat {
        total_bits: 8,
        frac_bits: 7,
    };

    pub fn new(total_bits: u8, frac_bits: u8) -> Result<Self, FormatError> {
        if frac_bits >= 1 && frac_bits < total_bits && total_bits <= 16 {
            Ok(Self {
                total_bits,
                frac_bits,
            })
        } else {
            Err(FormatError::Invalid {
                total_bits,
                frac_bits,
            })
        }
    }

    pub fn total_bits(self) -> u8 {
        self.total_bits
    }

    pub fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    pub fn min_raw(self) -> i32 {
        -(1i32 << (self.total_bits - 1))
    }

    pub fn max_raw(self) -> i32 {
        (1i32 << (self.total_bits - 1)) - 1
    }

    /// Value of one LSB, `2^-frac_bits`.
    pub fn resolution(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.resolution()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.resolution()
    }

    /// Clamp an integer into the representable raw range.
    #[inline]
    pub fn saturate(self, raw: i64) -> i32 {
        raw.clamp(self.min_raw() as i64, self.max_raw() as i64) as i32
    }

    /// Reinterpret the low `total_bits` of a stored bit pattern as a signed raw value.
    #[inline]
    pub fn sign_extend(self, bits: u32) -> i32 {
        let shift = 32 - self.total_bits as u32;
        ((bits << shift) as i32) >> shift
    }

    /// Low `total_bits` of the two's-complement encoding of `raw`.
    #[inline]
    pub fn to_bits(self, raw: i32) -> u32 {
        (raw as u32) & ((1u32 << self.total_bits) - 1)
    }
}

impl Default for FixedPointFormat {
    fn default() -> Self {
        Self::Q1_7
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedValue {
    raw: i32,
    format: FixedPointFormat,
}

impl FixedValue {
    /// Wraps a raw value, saturating it into the format's range.
    pub fn from_raw(raw: i32, format: FixedPointFormat) -> Self {
        Self {
            raw: format.saturate(raw as i64),
            format,
        }
    }

    pub fn raw(self) -> i32 {
        self.raw
    }

    pub fn format(self) -> FixedPointFormat {
        self.format
    }

    pub fn to_f64(self) -> f64 {
        dequantize(self)
    }
}

/// Round half away from zero.
#[inline]
pub fn round_half_away(x: f64) -> f64 {
    // f64::round already rounds halfway cases away from zero.
    x.round()
}

/// Integer division by `2^shift` with round-half-away-from-zero.
#[inline]
pub fn shift_round(value: i64, shift: u32) -> i64 {
    if shift == 0 {
        return value;
    }
    let half = 1i64 << (shift - 1);
    if value >= 0 {
        (value + half) >> shift
    } else {
        -((-value + half) >> shift)
    }
}

pub fn quantize(x: f64, fmt: FixedPointFormat) -> FixedValue {
    let scaled = if x.is_nan() {
        0.0
    } else {
        round_half_away(x * (fmt.frac_bits as f64).exp2())
    };
    let raw = scaled.clamp(fmt.min_raw() as f64, fmt.max_raw() as f64) as i32;
    FixedValue { raw, format: fmt }
}

pub fn dequantize(v: FixedValue) -> f64 {
    v.raw as f64 * v.format.resolution()
}

/// Exact multiply-accumulate at raw scale; the product carries `2 * frac_bits`
/// fractional bits.
#[inline]
pub fn mac(acc: i64, a: FixedValue, b: FixedValue) -> i64 {
    debug_assert_eq!(a.format, b.format, "mac operands must share a format");
    acc + a.raw as i64 * b.raw as i64
}

/// Scales an accumulator with `2 * frac_bits` fractional bits back to the
/// format, rounding half away from zero and saturating.
pub fn requantize(acc: i64, fmt: FixedPointFormat) -> FixedValue {
    FixedValue {
        raw: fmt.saturate(shift_round(acc, fmt.frac_bits as u32)),
        format: fmt,
    }
}

/// Maps an unsigned 8-bit pixel to `pixel / 256` in the given format.
pub fn quantize_pixel(pixel: u8, fmt: FixedPointFormat) -> FixedValue {
    quantize(pixel as f64 / 256.0, fmt)
}

/// Largest magnitude an accumulator can reach for a neuron with `fan_in`
/// inputs, including the bias term at product scale.
pub fn max_accumulator_magnitude(fan_in: usize, fmt: FixedPointFormat) -> i64 {
    let m = -(fmt.min_raw() as i64);
    fan_in as i64 * m * m + (m << fmt.frac_bits)
}

// 784 inputs of Q1.7 x Q1.7 products (and the 1024-wide hidden layer) stay
// inside an i32 accumulator.
const _: () = assert!(784 * 127 * 127 < i32::MAX as i64);
const _: () = assert!(1024 * 128 * 128 + (128 << 7) < i32::MAX as i64);

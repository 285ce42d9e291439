//! Counter-based hashing of cell addresses.
//!
//! Every decision about a cell is a pure function of `(seed, bram, bit)` so
//! that fault sets are reproducible bit-for-bit in any language:
//!
//! ```text
//! mix64(z):                      // SplitMix64 finalizer
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!     return z ^ (z >> 31)
//!
//! key          = (bram << 32) | bit
//! stream(s, c) = mix64(s ^ c)
//! draw(s, c)   = mix64(stream(s, c) + key * 0x9E3779B97F4A7C15)   // wrapping
//!
//! u     = (draw(seed, 0x6A09E667F3BCC909) >> 11) * 2^-53             // [0, 1)
//! stuck =  draw(seed, 0xBB67AE8584CAA73B) >> 63
//! ```

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const UNIFORM_STREAM: u64 = 0x6A09_E667_F3BC_C909;
const STUCK_STREAM: u64 = 0xBB67_AE85_84CA_A73B;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn key(bram: u32, bit: u32) -> u64 {
    (bram as u64) << 32 | bit as u64
}

/// Per-seed stream offsets, computed once per enumeration.
#[derive(Debug, Clone, Copy)]
pub struct CellHasher {
    uniform: u64,
    stuck: u64,
}

impl CellHasher {
    pub fn new(seed: u64) -> Self {
        Self {
            uniform: mix64(seed ^ UNIFORM_STREAM),
            stuck: mix64(seed ^ STUCK_STREAM),
        }
    }

    /// Top 53 bits of the uniform draw as an integer in `[0, 2^53)`.
    #[inline]
    pub fn uniform_bits(&self, bram: u32, bit: u32) -> u64 {
        mix64(self.uniform.wrapping_add(key(bram, bit).wrapping_mul(GOLDEN))) >> 11
    }

    #[inline]
    pub fn uniform(&self, bram: u32, bit: u32) -> f64 {
        self.uniform_bits(bram, bit) as f64 * (-53f64).exp2()
    }

    #[inline]
    pub fn stuck_value(&self, bram: u32, bit: u32) -> bool {
        mix64(self.stuck.wrapping_add(key(bram, bit).wrapping_mul(GOLDEN))) >> 63 == 1
    }
}

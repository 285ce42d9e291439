//! (72,64) SECDED extended Hamming code.
//!
//! Storage layout of a 72-bit codeword: bits 0..64 hold the data word
//! unchanged, bits 64..71 hold the seven Hamming check bits (check bit `k`
//! at storage bit `64 + k`), and bit 71 holds the overall parity.
//!
//! Every storage column is assigned a 7-bit Hamming position:
//!
//! * data bit `i` gets the `i`-th integer in `3..=71` that is not a power of
//!   two (3, 5, 6, 7, 9, ...),
//! * check bit `k` gets `2^k`,
//! * the overall parity bit gets 0.
//!
//! Row `k < 7` of the parity-check matrix is bit `k` of each column's
//! position; row 7 is all ones. The matrix is checked in as
//! `data/secded_h72.txt` (row 0 first, column 0 leftmost).

use serde::{Deserialize, Serialize};

pub const DATA_BITS: u32 = 64;
pub const CODEWORD_BITS: u32 = 72;
const CHECK_BITS: usize = 7;

/// Hamming position of each data bit.
const DATA_POSITIONS: [u8; 64] = data_positions();

/// `CHECK_MASKS[k]` selects the data bits whose position has bit `k` set.
const CHECK_MASKS: [u64; CHECK_BITS] = check_masks();

/// Inverse of the column-position assignment; 0xff for positions with no column.
const POSITION_TO_COLUMN: [u8; 128] = position_to_column();

const fn data_positions() -> [u8; 64] {
    let mut out = [0u8; 64];
    let mut pos = 3u32;
    let mut i = 0;
    while i < 64 {
        if !pos.is_power_of_two() {
            out[i] = pos as u8;
            i += 1;
        }
        pos += 1;
    }
    out
}

const fn check_masks() -> [u64; CHECK_BITS] {
    let mut masks = [0u64; CHECK_BITS];
    let mut i = 0;
    while i < 64 {
        let mut k = 0;
        while k < CHECK_BITS {
            if DATA_POSITIONS[i] & (1 << k) != 0 {
                masks[k] |= 1 << i;
            }
            k += 1;
        }
        i += 1;
    }
    masks
}

const fn position_to_column() -> [u8; 128] {
    let mut table = [0xffu8; 128];
    let mut i = 0;
    while i < 64 {
        table[DATA_POSITIONS[i] as usize] = i as u8;
        i += 1;
    }
    let mut k = 0;
    while k < CHECK_BITS {
        table[1 << k] = 64 + k as u8;
        k += 1;
    }
    table
}

/// A 72-bit codeword as stored in a BRAM slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Codeword72 {
    pub data: u64,
    /// Bits 0..7 are check bits, bit 7 is the overall parity.
    pub parity: u8,
}

impl Codeword72 {
    /// Bit `index` of the 72-bit storage layout.
    pub fn bit(self, index: u32) -> bool {
        if index < DATA_BITS {
            self.data >> index & 1 == 1
        } else {
            self.parity >> (index - DATA_BITS) & 1 == 1
        }
    }

    pub fn flip(self, index: u32) -> Self {
        let mut cw = self;
        if index < DATA_BITS {
            cw.data ^= 1 << index;
        } else {
            cw.parity ^= 1 << (index - DATA_BITS);
        }
        cw
    }

    /// Forces bit `index` to `value` (stuck-at write).
    pub fn with_bit(self, index: u32, value: bool) -> Self {
        if self.bit(index) == value {
            self
        } else {
            self.flip(index)
        }
    }

    /// Packs into the low 72 bits of a u128.
    pub fn to_u128(self) -> u128 {
        self.data as u128 | (self.parity as u128) << 64
    }

    pub fn from_u128(bits: u128) -> Self {
        Self {
            data: bits as u64,
            parity: (bits >> 64) as u8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "bit", rename_all = "snake_case")]
pub enum DecodeStatus {
    Clean,
    /// Storage bit that was corrected (0..72).
    Corrected(u8),
    Uncorrectable,
}

pub fn encode64(data: u64) -> Codeword72 {
    let mut check = 0u8;
    for (k, mask) in CHECK_MASKS.iter().enumerate() {
        check |= (((data & mask).count_ones() & 1) as u8) << k;
    }
    let overall = (data.count_ones() + check.count_ones()) & 1;
    Codeword72 {
        data,
        parity: check | (overall as u8) << 7,
    }
}

/// 7-bit syndrome and overall parity of a received word.
fn syndrome(cw: Codeword72) -> (u8, bool) {
    let mut s = 0u8;
    for (k, mask) in CHECK_MASKS.iter().enumerate() {
        let p = ((cw.data & mask).count_ones() as u8 ^ (cw.parity >> k)) & 1;
        s |= p << k;
    }
    let odd = (cw.data.count_ones() + cw.parity.count_ones()) & 1 == 1;
    (s, odd)
}

pub fn decode72(cw: Codeword72) -> (u64, DecodeStatus) {
    match syndrome(cw) {
        (0, false) => (cw.data, DecodeStatus::Clean),
        // only the overall parity bit is wrong
        (0, true) => (cw.data, DecodeStatus::Corrected(71)),
        (s, true) => match POSITION_TO_COLUMN[s as usize] {
            0xff => (cw.data, DecodeStatus::Uncorrectable),
            col => (cw.flip(col as u32).data, DecodeStatus::Corrected(col)),
        },
        (_, false) => (cw.data, DecodeStatus::Uncorrectable),
    }
}

/// Parity-check matrix as 8 rows of 72 columns.
pub fn parity_check_matrix() -> [[bool; 72]; 8] {
    let mut h = [[false; 72]; 8];
    for col in 0..72usize {
        let pos = match col {
            0..=63 => DATA_POSITIONS[col],
            64..=70 => 1 << (col - 64),
            _ => 0,
        };
        for (k, row) in h.iter_mut().enumerate().take(CHECK_BITS) {
            row[col] = pos >> k & 1 == 1;
        }
        h[7][col] = true;
    }
    h
}

/// Text rendering of [`parity_check_matrix`], one row per line.
pub fn parity_check_matrix_text() -> String {
    parity_check_matrix()
        .iter()
        .map(|row| {
            let mut line: String = row.iter().map(|&b| if b { '1' } else { '0' }).collect();
            line.push('\n');
            line
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The checked-in H matrix, parsed independently of the codec tables.
    fn checked_in_h() -> Vec<Vec<u8>> {
        include_str!("../data/secded_h72.txt")
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| l.trim().bytes().map(|b| b - b'0').collect())
            .collect()
    }

    /// H * c over GF(2) using the checked-in matrix.
    fn gf2_syndrome(h: &[Vec<u8>], cw: Codeword72) -> Vec<u8> {
        h.iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold(0u8, |acc, (col, &hbit)| acc ^ (hbit & cw.bit(col as u32) as u8))
            })
            .collect()
    }

    #[test]
    fn checked_in_matrix_matches_codec() {
        let h = checked_in_h();
        assert_eq!(h.len(), 8);
        assert!(h.iter().all(|row| row.len() == 72));
        assert_eq!(parity_check_matrix_text(), include_str!("../data/secded_h72.txt").lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
        // all 72 columns distinct and nonzero: single errors are locatable
        let cols: std::collections::HashSet<Vec<u8>> = (0..72).map(|c| h.iter().map(|r| r[c]).collect()).collect();
        assert_eq!(cols.len(), 72);
    }

    #[test]
    fn zero_word() {
        assert_eq!(encode64(0).parity, 0);
        assert_eq!(decode72(encode64(0)), (0, DecodeStatus::Clean));
    }

    #[test]
    fn pinned_parity_bytes() {
        // generated by scripts/secded_oracle.py from data/secded_h72.txt
        let table: [(u64, u8); 5] = [
            (0x0000000000000001, 0x83),
            (0xffffffffffffffff, 0xff),
            (0x0123456789abcdef, 0x9c),
            (0xdeadbeefcafef00d, 0xb8),
            (0x8000000000000000, 0xc7),
        ];
        for (data, parity) in table {
            assert_eq!(encode64(data).parity, parity, "data {data:#018x}");
        }
    }

    #[test]
    fn encoding_satisfies_checked_in_matrix() {
        let h = checked_in_h();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let cw = encode64(rng.random());
            assert!(gf2_syndrome(&h, cw).iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn every_single_flip_is_corrected() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let d: u64 = rng.random();
            let cw = encode64(d);
            for bit in 0..72 {
                let (out, status) = decode72(cw.flip(bit));
                assert_eq!(out, d);
                assert_eq!(status, DecodeStatus::Corrected(bit as u8));
            }
        }
    }

    #[test]
    fn every_double_flip_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let cw = encode64(rng.random());
            let mut pairs = 0;
            for a in 0..72 {
                for b in a + 1..72 {
                    let (_, status) = decode72(cw.flip(a).flip(b));
                    assert_eq!(status, DecodeStatus::Uncorrectable, "bits {a},{b}");
                    pairs += 1;
                }
            }
            assert_eq!(pairs, 2556);
        }
    }

    #[test]
    fn triple_flips_never_report_clean() {
        // Distance 4: three flips can alias onto a single-error syndrome and be
        // miscorrected, but can never look like a valid codeword.
        let cw = encode64(0x0f0f_f0f0_1234_5678);
        let mut miscorrected = 0;
        for a in 0..72 {
            for b in a + 1..72 {
                for c in b + 1..72 {
                    let (out, status) = decode72(cw.flip(a).flip(b).flip(c));
                    assert_ne!(status, DecodeStatus::Clean);
                    if matches!(status, DecodeStatus::Corrected(_)) && out != cw.data {
                        miscorrected += 1;
                    }
                }
            }
        }
        assert!(miscorrected > 0);
    }

    proptest! {
        #[test]
        fn round_trip(d: u64) {
            prop_assert_eq!(decode72(encode64(d)), (d, DecodeStatus::Clean));
        }

        #[test]
        fn parity_is_linear(a: u64, b: u64) {
            prop_assert_eq!(encode64(a ^ b).parity, encode64(a).parity ^ encode64(b).parity);
        }

        #[test]
        fn u128_packing(d: u64) {
            let cw = encode64(d);
            prop_assert_eq!(Codeword72::from_u128(cw.to_u128()), cw);
        }
    }
}

//! Placement of packed weight words in BRAMs and fault materialization.
//!
//! A BRAM is 1024 rows x 18 columns = 18,432 bits, addressed linearly as
//! `row * 18 + col`. Word slot `s` of width `W` covers bits `[s*W, (s+1)*W)`
//! of one BRAM: 288 slots of 64 bits without ECC, 256 slots of 72 bits with.
//! Within a slot, bit `j` of the word (or of the 72-bit codeword, check bits
//! at 64..72) sits at bit `s*W + j`.
//!
//! Weights are packed eight to a 64-bit word in storage-stream order (layer 0
//! weights row-major, layer 0 biases, layer 1 weights, ...); parameter
//! `8w + k` occupies byte `k` (bits `8k..8k+8`) of word `w`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecc::{self, Codeword72, DecodeStatus};
use crate::faults::{FaultSet, VulnerabilityClass};
use crate::model::MlpModel;

pub const ROWS_PER_BRAM: u32 = 1024;
pub const COLS_PER_BRAM: u32 = 18;
pub const BITS_PER_BRAM: u32 = ROWS_PER_BRAM * COLS_PER_BRAM;

pub const PLAIN_WORD_BITS: u32 = 64;
pub const ECC_WORD_BITS: u32 = ecc::CODEWORD_BITS;
const WEIGHTS_PER_WORD: usize = 8;
const UNASSIGNED: u32 = u32::MAX;

/// Default fraction of BRAMs the weights are striped over.
pub const DEFAULT_SPREAD: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("{words} words do not fit into {brams} usable BRAMs of {slots} slots")]
    CapacityExceeded { words: usize, brams: usize, slots: u32 },
    #[error("classification covers {got} BRAMs, geometry has {expected}")]
    ClassificationMismatch { expected: u32, got: usize },
    #[error("fault set describes {faults} BRAMs but the map has {map}")]
    GeometryMismatch { faults: u32, map: u32 },
    #[error("fault cell ({bram}, {bit}) outside the geometry")]
    CellOutOfRange { bram: u32, bit: u32 },
    #[error("packing needs 8-bit weights, model uses {0} bits")]
    UnsupportedWidth(u8),
    #[error("ECC decoding requested on a map without ECC codewords")]
    EccUnavailable,
    #[error("spread {0} outside (0, 1]")]
    BadSpread(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BramGeometry {
    pub brams: u32,
}

impl BramGeometry {
    pub fn new(brams: u32) -> Self {
        Self { brams }
    }

    pub const fn rows_per_bram(&self) -> u32 {
        ROWS_PER_BRAM
    }

    pub const fn cols_per_bram(&self) -> u32 {
        COLS_PER_BRAM
    }

    pub const fn bits_per_bram(&self) -> u32 {
        BITS_PER_BRAM
    }

    pub fn total_bits(&self) -> u64 {
        self.brams as u64 * BITS_PER_BRAM as u64
    }
}

/// Packed weight image, either plain 64-bit words or 72-bit codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WordImage {
    Plain(Vec<u64>),
    Ecc(Vec<Codeword72>),
}

impl WordImage {
    pub fn len(&self) -> usize {
        match self {
            WordImage::Plain(w) => w.len(),
            WordImage::Ecc(w) => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ecc(&self) -> bool {
        matches!(self, WordImage::Ecc(_))
    }

    pub fn word_bits(&self) -> u32 {
        if self.ecc() {
            ECC_WORD_BITS
        } else {
            PLAIN_WORD_BITS
        }
    }

    pub fn data(&self, i: usize) -> u64 {
        match self {
            WordImage::Plain(w) => w[i],
            WordImage::Ecc(w) => w[i].data,
        }
    }

    /// Stored bits of word `i` in the low `word_bits` of a u128.
    pub fn stored(&self, i: usize) -> u128 {
        match self {
            WordImage::Plain(w) => w[i] as u128,
            WordImage::Ecc(w) => w[i].to_u128(),
        }
    }
}

pub fn pack_words(model: &MlpModel, ecc: bool) -> Result<WordImage, MapError> {
    let fmt = model.format();
    if fmt.total_bits() != 8 {
        return Err(MapError::UnsupportedWidth(fmt.total_bits()));
    }
    let n = model.param_count();
    let mut words = vec![0u64; n.div_ceil(WEIGHTS_PER_WORD)];
    for (i, raw) in model.params_raw().enumerate() {
        words[i / WEIGHTS_PER_WORD] |= (fmt.to_bits(raw) as u64) << (8 * (i % WEIGHTS_PER_WORD));
    }
    Ok(if ecc {
        WordImage::Ecc(words.into_iter().map(ecc::encode64).collect())
    } else {
        WordImage::Plain(words)
    })
}

/// Assignment of logical words to `(bram, slot)` addresses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryMap {
    geometry: BramGeometry,
    ecc_enabled: bool,
    assignment: Vec<(u32, u32)>,
    excluded: BTreeSet<u32>,
    /// `bram * slots + slot` -> word index, or UNASSIGNED.
    reverse: Vec<u32>,
}

impl MemoryMap {
    fn build(
        geometry: BramGeometry,
        ecc_enabled: bool,
        assignment: Vec<(u32, u32)>,
        excluded: BTreeSet<u32>,
    ) -> Self {
        let slots = slots_for(ecc_enabled);
        let mut reverse = vec![UNASSIGNED; geometry.brams as usize * slots as usize];
        for (w, &(bram, slot)) in assignment.iter().enumerate() {
            let at = (bram * slots + slot) as usize;
            debug_assert_eq!(reverse[at], UNASSIGNED, "slot assigned twice");
            reverse[at] = w as u32;
        }
        Self {
            geometry,
            ecc_enabled,
            assignment,
            excluded,
            reverse,
        }
    }

    pub fn geometry(&self) -> BramGeometry {
        self.geometry
    }

    pub fn ecc_enabled(&self) -> bool {
        self.ecc_enabled
    }

    pub fn word_bits(&self) -> u32 {
        if self.ecc_enabled {
            ECC_WORD_BITS
        } else {
            PLAIN_WORD_BITS
        }
    }

    pub fn slots_per_bram(&self) -> u32 {
        slots_for(self.ecc_enabled)
    }

    pub fn word_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[(u32, u32)] {
        &self.assignment
    }

    pub fn excluded_brams(&self) -> &BTreeSet<u32> {
        &self.excluded
    }

    /// Number of words placed in each BRAM.
    pub fn words_per_bram(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.geometry.brams as usize];
        for &(b, _) in &self.assignment {
            counts[b as usize] += 1;
        }
        counts
    }

    /// Word index and bit offset stored at a cell, if any word covers it.
    pub fn locate(&self, bram: u32, bit: u32) -> Option<(usize, u32)> {
        if bram >= self.geometry.brams || bit >= BITS_PER_BRAM {
            return None;
        }
        let wb = self.word_bits();
        let slot = bit / wb;
        if slot >= self.slots_per_bram() {
            return None;
        }
        match self.reverse[(bram * self.slots_per_bram() + slot) as usize] {
            UNASSIGNED => None,
            w => Some((w as usize, bit % wb)),
        }
    }

    /// Reads every assigned slot of a BRAM image back into word order.
    pub fn read_back(&self, image: &[Vec<u128>]) -> Vec<u128> {
        self.assignment
            .iter()
            .map(|&(b, s)| image[b as usize][s as usize])
            .collect()
    }

    /// Lays out a word image in per-BRAM slot arrays (unassigned slots zero).
    pub fn write_image(&self, words: &WordImage) -> Vec<Vec<u128>> {
        let mut image = vec![vec![0u128; self.slots_per_bram() as usize]; self.geometry.brams as usize];
        for (w, &(b, s)) in self.assignment.iter().enumerate() {
            image[b as usize][s as usize] = words.stored(w);
        }
        image
    }

    pub fn to_export(&self) -> MemoryMapExport {
        let mut runs: Vec<AssignmentRun> = Vec::new();
        for (w, &(bram, slot)) in self.assignment.iter().enumerate() {
            if let Some(last) = runs.last_mut() {
                if last.slot == slot && last.first_bram + last.count == bram && last.first_word + last.count == w as u32 {
                    last.count += 1;
                    continue;
                }
            }
            runs.push(AssignmentRun {
                first_word: w as u32,
                first_bram: bram,
                slot,
                count: 1,
            });
        }
        MemoryMapExport {
            geometry: ExportGeometry {
                brams: self.geometry.brams,
                rows_per_bram: ROWS_PER_BRAM,
                cols_per_bram: COLS_PER_BRAM,
                bits_per_bram: BITS_PER_BRAM,
            },
            ecc_enabled: self.ecc_enabled,
            word_bits: self.word_bits(),
            slots_per_bram: self.slots_per_bram(),
            word_count: self.assignment.len(),
            excluded_brams: self.excluded.iter().copied().collect(),
            runs,
        }
    }

    pub fn from_export(export: &MemoryMapExport) -> Self {
        let mut assignment = vec![(0, 0); export.word_count];
        for run in &export.runs {
            for i in 0..run.count {
                assignment[(run.first_word + i) as usize] = (run.first_bram + i, run.slot);
            }
        }
        Self::build(
            BramGeometry::new(export.geometry.brams),
            export.ecc_enabled,
            assignment,
            export.excluded_brams.iter().copied().collect(),
        )
    }
}

fn slots_for(ecc: bool) -> u32 {
    BITS_PER_BRAM / if ecc { ECC_WORD_BITS } else { PLAIN_WORD_BITS }
}

/// Consecutive words placed in consecutive BRAMs at the same slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRun {
    pub first_word: u32,
    pub first_bram: u32,
    pub slot: u32,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportGeometry {
    pub brams: u32,
    pub rows_per_bram: u32,
    pub cols_per_bram: u32,
    pub bits_per_bram: u32,
}

/// JSON form of a [`MemoryMap`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMapExport {
    pub geometry: ExportGeometry,
    pub ecc_enabled: bool,
    pub word_bits: u32,
    pub slots_per_bram: u32,
    pub word_count: usize,
    pub excluded_brams: Vec<u32>,
    pub runs: Vec<AssignmentRun>,
}

fn stripe(
    word_count: usize,
    geometry: BramGeometry,
    ecc: bool,
    spread: f64,
    excluded: BTreeSet<u32>,
) -> Result<MemoryMap, MapError> {
    if !(spread > 0.0 && spread <= 1.0) {
        return Err(MapError::BadSpread(spread));
    }
    let candidates: Vec<u32> = (0..geometry.brams).filter(|b| !excluded.contains(b)).collect();
    let slots = slots_for(ecc);
    let capacity = candidates.len() * slots as usize;
    if word_count > capacity {
        return Err(MapError::CapacityExceeded {
            words: word_count,
            brams: candidates.len(),
            slots,
        });
    }
    // ceil(spread * n), guarding against 0.9 * 2030 = 1827.0000000000002
    let spread_brams = ((spread * candidates.len() as f64) - 1e-9).ceil() as usize;
    let used = spread_brams
        .max(word_count.div_ceil(slots as usize))
        .clamp(1, candidates.len().max(1));
    let assignment = (0..word_count)
        .map(|w| (candidates[w % used], (w / used) as u32))
        .collect();
    Ok(MemoryMap::build(geometry, ecc, assignment, excluded))
}

/// Stripes words round-robin over the first `ceil(spread * brams)` BRAMs.
pub fn map_default(words: &WordImage, geometry: BramGeometry, spread: f64) -> Result<MemoryMap, MapError> {
    stripe(words.len(), geometry, words.ecc(), spread, BTreeSet::new())
}

/// Like [`map_default`], but High-vulnerable BRAMs receive no words.
pub fn map_imm(
    words: &WordImage,
    geometry: BramGeometry,
    classes: &[VulnerabilityClass],
    spread: f64,
) -> Result<MemoryMap, MapError> {
    if classes.len() != geometry.brams as usize {
        return Err(MapError::ClassificationMismatch {
            expected: geometry.brams,
            got: classes.len(),
        });
    }
    let excluded = classes
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == VulnerabilityClass::High)
        .map(|(i, _)| i as u32)
        .collect();
    stripe(words.len(), geometry, words.ecc(), spread, excluded)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EccPolicy {
    Off,
    On,
}

/// Outcome counts over all assigned words.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EccStats {
    /// Words read back with their original data and no correction.
    pub clean: u64,
    /// Words the decoder repaired to their original data.
    pub corrected: u64,
    /// Words flagged uncorrectable and replaced by zero.
    pub uncorrectable: u64,
    /// Words delivered with wrong data and no error flag.
    pub silently_corrupt: u64,
    /// Words with at least one faulty cell.
    pub faulty_words: u64,
}

/// Applies the stuck-at cells of `faults` to every word they touch and
/// returns the model as read back, plus per-word outcome counts.
///
/// With [`EccPolicy::On`] each faulty codeword goes through the SECDED
/// decoder; words it flags uncorrectable are zeroed.
pub fn corrupt_model(
    model: &MlpModel,
    map: &MemoryMap,
    faults: &FaultSet,
    policy: EccPolicy,
) -> Result<(MlpModel, EccStats), MapError> {
    if faults.bram_count != map.geometry.brams {
        return Err(MapError::GeometryMismatch {
            faults: faults.bram_count,
            map: map.geometry.brams,
        });
    }
    if policy == EccPolicy::On && !map.ecc_enabled {
        return Err(MapError::EccUnavailable);
    }
    let image = pack_words(model, map.ecc_enabled)?;
    let mut touched: BTreeMap<usize, (u128, u128)> = BTreeMap::new();
    for cell in &faults.cells {
        if cell.bram >= map.geometry.brams || cell.bit >= BITS_PER_BRAM {
            return Err(MapError::CellOutOfRange {
                bram: cell.bram,
                bit: cell.bit,
            });
        }
        if let Some((w, offset)) = map.locate(cell.bram, cell.bit) {
            let entry = touched.entry(w).or_default();
            entry.0 |= 1 << offset;
            if cell.stuck {
                entry.1 |= 1 << offset;
            }
        }
    }

    let mut stats = EccStats {
        faulty_words: touched.len() as u64,
        ..EccStats::default()
    };
    let mut corrupted = model.clone();
    let fmt = model.format();
    for (&w, &(mask, stuck)) in &touched {
        let original = image.data(w);
        let stored = (image.stored(w) & !mask) | stuck;
        let data = match policy {
            EccPolicy::Off => {
                let data = stored as u64;
                if data == original {
                    stats.clean += 1;
                } else {
                    stats.silently_corrupt += 1;
                }
                data
            }
            EccPolicy::On => match ecc::decode72(Codeword72::from_u128(stored)) {
                (_, DecodeStatus::Uncorrectable) => {
                    stats.uncorrectable += 1;
                    0
                }
                (data, _) if data != original => {
                    stats.silently_corrupt += 1;
                    data
                }
                (data, DecodeStatus::Clean) => {
                    stats.clean += 1;
                    data
                }
                (data, DecodeStatus::Corrected(_)) => {
                    stats.corrected += 1;
                    data
                }
            },
        };
        if data != original {
            for k in 0..WEIGHTS_PER_WORD {
                let index = w * WEIGHTS_PER_WORD + k;
                if index < model.param_count() {
                    corrupted.set_param_raw(index, fmt.sign_extend((data >> (8 * k)) as u32 & 0xff));
                }
            }
        }
    }
    stats.clean += (map.word_count() - touched.len()) as u64;
    Ok((corrupted, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::FaultCell;
    use crate::fxp::FixedPointFormat;
    use crate::model::Topology;
    use proptest::prelude::*;

    fn small_model() -> MlpModel {
        let topo = Topology::new(vec![784, 12, 10]).unwrap();
        let mut m = MlpModel::zeros(topo, FixedPointFormat::Q1_7).unwrap();
        for i in 0..m.param_count() {
            m.set_param_raw(i, ((i * 97 + 13) % 256) as i32 - 128);
        }
        m
    }

    #[test]
    fn geometry_constants() {
        let g = BramGeometry::new(2030);
        assert_eq!(g.bits_per_bram(), 18_432);
        assert_eq!(BITS_PER_BRAM / PLAIN_WORD_BITS, 288);
        assert_eq!(BITS_PER_BRAM / ECC_WORD_BITS, 256);
        assert_eq!(BITS_PER_BRAM % PLAIN_WORD_BITS, 0);
        assert_eq!(BITS_PER_BRAM % ECC_WORD_BITS, 0);
    }

    #[test]
    fn default_topology_word_count() {
        let m = MlpModel::zeros(Topology::default(), FixedPointFormat::Q1_7).unwrap();
        let plain = pack_words(&m, false).unwrap();
        assert_eq!(plain.len(), 186_770);
        assert_eq!(plain.data(0), 0);
        let ecc = pack_words(&m, true).unwrap();
        assert_eq!(ecc.len(), 186_770);
        assert_eq!(ecc.word_bits(), 72);

        let map = map_default(&plain, BramGeometry::new(2030), DEFAULT_SPREAD).unwrap();
        let per = map.words_per_bram();
        assert_eq!(per.iter().filter(|&&c| c > 0).count(), 1827);
        assert_eq!(*per.iter().max().unwrap(), 103);
    }

    #[test]
    fn byte_order_inside_words() {
        let topo = Topology::new(vec![3, 3]).unwrap();
        let mut m = MlpModel::zeros(topo, FixedPointFormat::Q1_7).unwrap();
        for i in 0..12 {
            m.set_param_raw(i, i as i32 - 1);
        }
        let WordImage::Plain(words) = pack_words(&m, false).unwrap() else {
            panic!()
        };
        assert_eq!(words, vec![0x0605_0403_0201_00ff, 0x0000_0000_0a09_0807]);
    }

    #[test]
    fn single_word_uses_one_bram() {
        let words = WordImage::Plain(vec![7]);
        let map = map_default(&words, BramGeometry::new(100), 0.9).unwrap();
        assert_eq!(map.words_per_bram().iter().filter(|&&c| c > 0).count(), 1);
    }

    #[test]
    fn capacity_errors() {
        let words = WordImage::Plain(vec![0; 289]);
        assert!(matches!(map_default(&words, BramGeometry::new(1), 0.9), Err(MapError::CapacityExceeded { .. })));
        // spread expands when the striped subset alone is too small
        let map = map_default(&words, BramGeometry::new(4), 0.25).unwrap();
        assert_eq!(map.words_per_bram().iter().filter(|&&c| c > 0).count(), 2);
        let all_high = vec![VulnerabilityClass::High; 4];
        assert!(matches!(map_imm(&words, BramGeometry::new(4), &all_high, 0.9), Err(MapError::CapacityExceeded { .. })));
        assert!(matches!(map_default(&words, BramGeometry::new(4), 0.0), Err(MapError::BadSpread(_))));
    }

    #[test]
    fn imm_excludes_high_brams() {
        let m = MlpModel::zeros(Topology::default(), FixedPointFormat::Q1_7).unwrap();
        let words = pack_words(&m, false).unwrap();
        let mut classes = vec![VulnerabilityClass::Low; 2030];
        for b in (0..2030).step_by(55).take(37) {
            classes[b] = VulnerabilityClass::High;
        }
        let map = map_imm(&words, BramGeometry::new(2030), &classes, 0.9).unwrap();
        assert_eq!(map.excluded_brams().len(), 37);
        let per = map.words_per_bram();
        for &b in map.excluded_brams() {
            assert_eq!(per[b as usize], 0);
        }
        assert_eq!(per.iter().filter(|&&c| c > 0).count(), 1794);

        let none = vec![VulnerabilityClass::Low; 2030];
        let imm = map_imm(&words, BramGeometry::new(2030), &none, 0.9).unwrap();
        assert_eq!(imm, map_default(&words, BramGeometry::new(2030), 0.9).unwrap());
    }

    #[test]
    fn empty_faultset_is_identity() {
        let m = small_model();
        for ecc in [false, true] {
            let words = pack_words(&m, ecc).unwrap();
            let map = map_default(&words, BramGeometry::new(8), 0.9).unwrap();
            let policy = if ecc { EccPolicy::On } else { EccPolicy::Off };
            let (out, stats) = corrupt_model(&m, &map, &FaultSet::empty(600, 8), policy).unwrap();
            assert!(out.same_parameters(&m));
            assert_eq!(stats.clean, map.word_count() as u64);
            assert_eq!(stats.faulty_words, 0);
        }
    }

    /// Cell holding storage bit `offset` of word `w`, and the stuck value that
    /// flips it.
    fn flipping_cell(map: &MemoryMap, words: &WordImage, w: usize, offset: u32) -> FaultCell {
        let (bram, slot) = map.assignment()[w];
        let current = words.stored(w) >> offset & 1 == 1;
        FaultCell {
            bram,
            bit: slot * map.word_bits() + offset,
            stuck: !current,
        }
    }

    #[test]
    fn ecc_corrects_every_single_bit_fault() {
        let m = small_model();
        let words = pack_words(&m, true).unwrap();
        let map = map_default(&words, BramGeometry::new(8), 0.9).unwrap();
        for offset in 0..72 {
            let cell = flipping_cell(&map, &words, 5, offset);
            let faults = FaultSet::from_cells(550, 8, vec![cell]);
            let (out, stats) = corrupt_model(&m, &map, &faults, EccPolicy::On).unwrap();
            assert!(out.same_parameters(&m), "offset {offset}");
            assert_eq!(stats.corrected, 1);
        }
    }

    #[test]
    fn ecc_zeroes_double_bit_faults() {
        let m = small_model();
        let words = pack_words(&m, true).unwrap();
        let map = map_default(&words, BramGeometry::new(8), 0.9).unwrap();
        let w = 3;
        for (a, b) in [(0u32, 1u32), (10, 70), (64, 71), (5, 63)] {
            let cells = vec![flipping_cell(&map, &words, w, a), flipping_cell(&map, &words, w, b)];
            let faults = FaultSet::from_cells(550, 8, cells);
            let (out, stats) = corrupt_model(&m, &map, &faults, EccPolicy::On).unwrap();
            assert_eq!(stats.uncorrectable, 1);
            for k in 0..8 {
                assert_eq!(out.param_raw(w * 8 + k), Some(0));
            }
            assert_eq!(out.param_raw(w * 8 + 8), m.param_raw(w * 8 + 8));
        }
    }

    #[test]
    fn plain_faults_flip_weights() {
        let m = small_model();
        let words = pack_words(&m, false).unwrap();
        let map = map_default(&words, BramGeometry::new(8), 0.9).unwrap();
        let cell = flipping_cell(&map, &words, 2, 15);
        let (out, stats) = corrupt_model(&m, &map, &FaultSet::from_cells(550, 8, vec![cell]), EccPolicy::Off).unwrap();
        assert_eq!(stats.silently_corrupt, 1);
        let before = m.param_raw(2 * 8 + 1).unwrap();
        let after = out.param_raw(2 * 8 + 1).unwrap();
        assert_eq!(FixedPointFormat::Q1_7.to_bits(before) ^ FixedPointFormat::Q1_7.to_bits(after), 0x80);
        // a stuck value equal to the stored bit changes nothing
        let quiet = FaultCell { stuck: !cell.stuck, ..cell };
        let (out, stats) = corrupt_model(&m, &map, &FaultSet::from_cells(550, 8, vec![quiet]), EccPolicy::Off).unwrap();
        assert!(out.same_parameters(&m));
        assert_eq!(stats.clean, map.word_count() as u64);
    }

    #[test]
    fn corrupt_errors() {
        let m = small_model();
        let words = pack_words(&m, false).unwrap();
        let map = map_default(&words, BramGeometry::new(8), 0.9).unwrap();
        assert!(matches!(corrupt_model(&m, &map, &FaultSet::empty(550, 9), EccPolicy::Off), Err(MapError::GeometryMismatch { .. })));
        assert!(matches!(corrupt_model(&m, &map, &FaultSet::empty(550, 8), EccPolicy::On), Err(MapError::EccUnavailable)));
        let bad = FaultSet::from_cells(550, 8, vec![FaultCell { bram: 8, bit: 0, stuck: true }]);
        assert!(matches!(corrupt_model(&m, &map, &bad, EccPolicy::Off), Err(MapError::CellOutOfRange { .. })));
    }

    #[test]
    fn export_round_trip() {
        let m = small_model();
        let words = pack_words(&m, true).unwrap();
        let mut classes = vec![VulnerabilityClass::Low; 9];
        classes[4] = VulnerabilityClass::High;
        let map = map_imm(&words, BramGeometry::new(9), &classes, 0.9).unwrap();
        let json = serde_json::to_string(&map.to_export()).unwrap();
        let back: MemoryMapExport = serde_json::from_str(&json).unwrap();
        assert_eq!(MemoryMap::from_export(&back), map);
        assert_eq!(back.excluded_brams, vec![4]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn read_back_round_trip(n in 1usize..3000, brams in 2u32..40, spread in 0.05f64..=1.0, ecc: bool) {
            let words = if ecc {
                WordImage::Ecc((0..n as u64).map(|i| ecc::encode64(i.wrapping_mul(0x9E37_79B9_7F4A_7C15))).collect())
            } else {
                WordImage::Plain((0..n as u64).map(|i| i.wrapping_mul(0x9E37_79B9_7F4A_7C15)).collect())
            };
            let map = match map_default(&words, BramGeometry::new(brams), spread) {
                Ok(m) => m,
                Err(MapError::CapacityExceeded { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let back = map.read_back(&map.write_image(&words));
            let expected: Vec<u128> = (0..n).map(|i| words.stored(i)).collect();
            prop_assert_eq!(back, expected);
            let unique: BTreeSet<_> = map.assignment().iter().collect();
            prop_assert_eq!(unique.len(), n);
        }

        #[test]
        fn uncovered_cells_never_matter(bit in 0u32..BITS_PER_BRAM, stuck: bool) {
            let m = small_model();
            let words = pack_words(&m, false).unwrap();
            let map = map_default(&words, BramGeometry::new(10), 0.9).unwrap();
            // BRAM 9 is outside the striped subset
            prop_assert_eq!(map.words_per_bram()[9], 0);
            let faults = FaultSet::from_cells(550, 10, vec![FaultCell { bram: 9, bit, stuck }]);
            let (out, _) = corrupt_model(&m, &map, &faults, EccPolicy::Off).unwrap();
            prop_assert!(out.same_parameters(&m));
        }
    }
}

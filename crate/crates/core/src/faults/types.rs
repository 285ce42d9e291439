use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FaultSet;
use crate::ecc::DATA_BITS;
use crate::memmap::MemoryMap;

/// Faulty words by number of faulty cells. Cells outside any assigned word
/// are not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultTypeHistogram {
    pub single_bit: u64,
    pub double_bit: u64,
    pub multi_bit: u64,
    /// Words with a faulty cell among the 8 check bits; overlaps the counts
    /// above.
    pub ecc_parity_region: u64,
}

impl FaultTypeHistogram {
    pub fn faulty_words(&self) -> u64 {
        self.single_bit + self.double_bit + self.multi_bit
    }

    /// Fraction of faulty words hit by exactly one fault, or `None` when no
    /// word is faulty.
    pub fn single_bit_share(&self) -> Option<f64> {
        match self.faulty_words() {
            0 => None,
            n => Some(self.single_bit as f64 / n as f64),
        }
    }
}

pub fn classify_fault_types(faults: &FaultSet, map: &MemoryMap) -> FaultTypeHistogram {
    let mut per_word: BTreeMap<usize, (u32, bool)> = BTreeMap::new();
    for cell in &faults.cells {
        if let Some((w, offset)) = map.locate(cell.bram, cell.bit) {
            let entry = per_word.entry(w).or_default();
            entry.0 += 1;
            entry.1 |= offset >= DATA_BITS;
        }
    }
    let mut h = FaultTypeHistogram::default();
    for &(n, parity) in per_word.values() {
        match n {
            1 => h.single_bit += 1,
            2 => h.double_bit += 1,
            _ => h.multi_bit += 1,
        }
        h.ecc_parity_region += parity as u64;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::faults::FaultCell;
    use crate::memmap::{map_default, BramGeometry, WordImage};

    fn cell(bram: u32, bit: u32) -> FaultCell {
        FaultCell { bram, bit, stuck: true }
    }

    #[test]
    fn one_fault_is_single_bit() {
        let map = map_default(&WordImage::Plain(vec![0; 10]), BramGeometry::new(4), 1.0).unwrap();
        let h = classify_fault_types(&FaultSet::from_cells(550, 4, vec![cell(0, 3)]), &map);
        assert_eq!(
            h,
            FaultTypeHistogram {
                single_bit: 1,
                ..Default::default()
            }
        );
        assert_eq!(h.single_bit_share(), Some(1.0));
        assert_eq!(classify_fault_types(&FaultSet::empty(550, 4), &map).single_bit_share(), None);
    }

    #[test]
    fn grouping_by_word() {
        // 4 BRAMs, 10 words: word w sits in BRAM w % 4, slot w / 4
        let map = map_default(&WordImage::Plain(vec![0; 10]), BramGeometry::new(4), 1.0).unwrap();
        let cells = vec![
            cell(0, 0),
            cell(0, 63),
            cell(1, 64),
            cell(1, 65),
            cell(1, 127),
            cell(2, 5),
            // slot 3 of BRAM 3 is unassigned
            cell(3, 3 * 64),
        ];
        let h = classify_fault_types(&FaultSet::from_cells(550, 4, cells), &map);
        assert_eq!((h.single_bit, h.double_bit, h.multi_bit, h.ecc_parity_region), (1, 1, 1, 0));
    }

    #[test]
    fn parity_region_only_with_ecc() {
        let words = WordImage::Ecc(vec![crate::ecc::encode64(0); 4]);
        let map = map_default(&words, BramGeometry::new(2), 1.0).unwrap();
        let cells = vec![cell(0, 64), cell(0, 72 + 70), cell(0, 72 + 3), cell(1, 10)];
        let h = classify_fault_types(&FaultSet::from_cells(550, 2, cells), &map);
        assert_eq!((h.single_bit, h.double_bit, h.ecc_parity_region), (2, 1, 2));
    }
}

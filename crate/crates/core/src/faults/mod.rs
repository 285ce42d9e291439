//! Voltage-dependent stuck-at faults in BRAM cells.
//!
//! A platform is described by a handful of voltage anchors and measured fault
//! rates. Between anchors the device-wide rate (faults per 2^20 bits) is
//! interpolated log-linearly. Each BRAM scales that rate by its own
//! vulnerability weight, and each cell compares a hash-derived uniform draw
//! against the resulting probability. Because the probability only grows as
//! the voltage drops, the fault set at a lower voltage always contains the
//! fault set at a higher one.

pub mod hash;
mod kmeans;
mod types;

pub use kmeans::{classify_brams_kmeans, Classification, KMeansError, VulnerabilityClass};
pub use types::{classify_fault_types, FaultTypeHistogram};

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::memmap::BITS_PER_BRAM;
use crate::power::PowerModel;
use hash::CellHasher;

/// Bits per "Mbit" in fault rates.
pub const MBIT: f64 = (1u64 << 20) as f64;

#[derive(Debug, Error)]
pub enum FaultError {
    #[error("voltage {v_mv} mV outside [{lo}, {hi}] mV")]
    VoltageOutOfRange { v_mv: u32, lo: u32, hi: u32 },
    #[error("invalid platform profile: {0}")]
    InvalidProfile(String),
    #[error("cannot read platform file {path}: {message}")]
    Config { path: String, message: String },
    #[error("unknown built-in platform {0:?}")]
    UnknownPlatform(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VulnerabilityParams {
    /// Fraction of BRAMs in the high-vulnerability group.
    pub high_fraction: f64,
    /// Share of the total weight carried by the high group.
    pub high_share: f64,
    /// Log-space spread inside the high group.
    pub high_sigma: f64,
    /// Log-space spread inside the low group.
    pub low_sigma: f64,
    /// Seed of the per-BRAM weights, i.e. the identity of the physical chip.
    pub seed: u64,
}

impl Default for VulnerabilityParams {
    fn default() -> Self {
        Self {
            high_fraction: 0.018,
            high_share: 0.925,
            high_sigma: 0.25,
            low_sigma: 0.5,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams {
    pub p_nom_w: f64,
    /// Saving reached at `v_crash_mv`; used when `alpha` is absent.
    pub saving_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            p_nom_w: 1.0,
            saving_target: 0.90,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformProfile {
    pub name: String,
    pub bram_count: u32,
    pub v_nom_mv: u32,
    pub v_first_fault_mv: u32,
    pub v_min_ref_mv: u32,
    pub v_crash_mv: u32,
    /// Faults per Mbit at `v_min_ref_mv`.
    pub rate_at_vmin: f64,
    /// Faults per Mbit at `v_crash_mv`.
    pub rate_at_vcrash: f64,
    #[serde(default)]
    pub vulnerability: VulnerabilityParams,
    #[serde(default)]
    pub power: PowerParams,
}

const BUILTIN: &[(&str, &str)] = &[
    ("VC707", include_str!("../../configs/platforms/vc707.toml")),
    ("ZC702", include_str!("../../configs/platforms/zc702.toml")),
    ("KC705-A", include_str!("../../configs/platforms/kc705a.toml")),
    ("KC705-B", include_str!("../../configs/platforms/kc705b.toml")),
];

impl PlatformProfile {
    /// One of the shipped platform files, by name (case-insensitive,
    /// dashes optional).
    pub fn builtin(name: &str) -> Result<Self, FaultError> {
        let norm = |s: &str| s.to_ascii_lowercase().replace('-', "");
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| norm(n) == norm(name))
            .ok_or_else(|| FaultError::UnknownPlatform(name.to_owned()))?;
        Self::from_toml_str(text)
    }

    pub fn vc707() -> Self {
        Self::builtin("VC707").expect("shipped VC707 profile")
    }

    pub fn kc705b() -> Self {
        Self::builtin("KC705-B").expect("shipped KC705-B profile")
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN.iter().map(|(n, _)| *n)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, FaultError> {
        let p: Self = toml::from_str(text).map_err(|e| FaultError::Config {
            path: "<toml>".into(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    /// Reads a `.toml` or `.json` platform file; a bare built-in name such as
    /// `vc707` is accepted too.
    pub fn load(path: &Path) -> Result<Self, FaultError> {
        if !path.exists() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if path.parent().is_none_or(|p| p.as_os_str().is_empty()) {
                    return Self::builtin(stem);
                }
            }
        }
        let config_err = |message: String| FaultError::Config {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| config_err(e.to_string()))?;
        let p: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| config_err(e.to_string()))?
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FaultError> {
        let bad = |m: String| Err(FaultError::InvalidProfile(m));
        if self.bram_count == 0 {
            return bad("bram_count must be positive".into());
        }
        if !(self.v_crash_mv < self.v_min_ref_mv
            && self.v_min_ref_mv < self.v_first_fault_mv
            && self.v_first_fault_mv < self.v_nom_mv)
        {
            return bad(format!(
                "need v_crash < v_min_ref < v_first_fault < v_nom, got {} / {} / {} / {}",
                self.v_crash_mv, self.v_min_ref_mv, self.v_first_fault_mv, self.v_nom_mv
            ));
        }
        if !(self.first_fault_rate() < self.rate_at_vmin && self.rate_at_vmin < self.rate_at_vcrash) {
            return bad(format!(
                "rates must increase toward v_crash: {:.4} / {} / {}",
                self.first_fault_rate(),
                self.rate_at_vmin,
                self.rate_at_vcrash
            ));
        }
        let v = &self.vulnerability;
        if !(0.0..1.0).contains(&v.high_fraction) || !(0.0..1.0).contains(&v.high_share) {
            return bad("vulnerability fractions must lie in [0, 1)".into());
        }
        if v.high_sigma < 0.0 || v.low_sigma < 0.0 {
            return bad("vulnerability sigmas must be non-negative".into());
        }
        Ok(())
    }

    /// Total BRAM capacity in Mbit.
    pub fn device_mbit(&self) -> f64 {
        self.bram_count as f64 * BITS_PER_BRAM as f64 / MBIT
    }

    /// Rate giving one expected fault in the whole device.
    pub fn first_fault_rate(&self) -> f64 {
        1.0 / self.device_mbit()
    }

    pub fn power_model(&self) -> PowerModel {
        match self.power.alpha {
            Some(alpha) => PowerModel::new(self.power.p_nom_w, alpha, self.v_nom_mv),
            None => PowerModel::calibrated(self.power.p_nom_w, self.v_nom_mv, self.v_crash_mv, self.power.saving_target)
                .expect("validated profile calibrates"),
        }
    }

    /// Sweep grid from `v_nom` down in `step_mv` steps, descending. The grid
    /// is anchored at `v_nom`; `v_crash` is appended when it falls between
    /// grid points.
    pub fn sweep_voltages(&self, step_mv: u32) -> Vec<u32> {
        assert!(step_mv > 0, "sweep step must be positive");
        let mut v: Vec<u32> = (0..)
            .map(|i| self.v_nom_mv as i64 - i as i64 * step_mv as i64)
            .take_while(|&v| v >= self.v_crash_mv as i64)
            .map(|v| v as u32)
            .collect();
        if v.last() != Some(&self.v_crash_mv) {
            v.push(self.v_crash_mv);
        }
        v
    }
}

fn log_interp(v: f64, (v1, r1): (f64, f64), (v2, r2): (f64, f64)) -> f64 {
    let t = (v1 - v) / (v1 - v2);
    (r1.ln() + (r2.ln() - r1.ln()) * t).exp()
}

/// Device-wide fault rate (faults per Mbit) at `v_mv`.
///
/// Zero above `v_first_fault_mv`; from there down it passes log-linearly
/// through one expected device fault at `v_first_fault_mv`, `rate_at_vmin` at
/// `v_min_ref_mv`, and `rate_at_vcrash` at `v_crash_mv`.
pub fn rate_curve(profile: &PlatformProfile, v_mv: u32) -> Result<f64, FaultError> {
    if v_mv < profile.v_crash_mv || v_mv > profile.v_nom_mv {
        return Err(FaultError::VoltageOutOfRange {
            v_mv,
            lo: profile.v_crash_mv,
            hi: profile.v_nom_mv,
        });
    }
    let v = v_mv as f64;
    let first = (profile.v_first_fault_mv as f64, profile.first_fault_rate());
    let vmin = (profile.v_min_ref_mv as f64, profile.rate_at_vmin);
    let crash = (profile.v_crash_mv as f64, profile.rate_at_vcrash);
    Ok(if v_mv > profile.v_first_fault_mv {
        0.0
    } else if v_mv == profile.v_min_ref_mv {
        profile.rate_at_vmin
    } else if v_mv == profile.v_crash_mv {
        profile.rate_at_vcrash
    } else if v_mv > profile.v_min_ref_mv {
        log_interp(v, first, vmin)
    } else {
        log_interp(v, vmin, crash)
    })
}

/// Per-BRAM vulnerability weights of one chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityProfile {
    pub platform: PlatformProfile,
    /// Positive weights with mean 1.
    pub weights: Vec<f64>,
    /// Seed the weights were drawn with.
    pub seed: u64,
}

/// Draws per-BRAM weights from a two-group lognormal mixture.
///
/// `round(high_fraction * bram_count)` randomly chosen BRAMs form the high
/// group. Each group's lognormal draws are rescaled so that the high group
/// carries exactly `high_share` of the total; the whole vector has mean 1.
/// With an empty high group every weight is 1.
pub fn make_vulnerability_profile(
    platform: &PlatformProfile,
    params: &VulnerabilityParams,
    seed: u64,
) -> VulnerabilityProfile {
    let n = platform.bram_count as usize;
    let n_high = (params.high_fraction * n as f64).round() as usize;
    let weights = if n_high == 0 || n_high == n {
        vec![1.0; n]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let high_ids = sample(&mut rng, n, n_high).into_vec();
        let mut is_high = vec![false; n];
        for &i in &high_ids {
            is_high[i] = true;
        }
        let high = LogNormal::new(0.0, params.high_sigma).unwrap();
        let low = LogNormal::new(0.0, params.low_sigma).unwrap();
        let mut w: Vec<f64> = is_high
            .iter()
            .map(|&h| if h { high.sample(&mut rng) } else { low.sample(&mut rng) })
            .collect();
        let high_sum: f64 = w.iter().zip(&is_high).filter(|(_, &h)| h).map(|(x, _)| x).sum();
        let low_sum: f64 = w.iter().zip(&is_high).filter(|(_, &h)| !h).map(|(x, _)| x).sum();
        let high_scale = params.high_share * n as f64 / high_sum;
        let low_scale = (1.0 - params.high_share) * n as f64 / low_sum;
        for (x, &h) in w.iter_mut().zip(&is_high) {
            *x *= if h { high_scale } else { low_scale };
        }
        w
    };
    VulnerabilityProfile {
        platform: platform.clone(),
        weights,
        seed,
    }
}

impl VulnerabilityProfile {
    /// The chip described by the platform's own vulnerability parameters.
    pub fn for_platform(platform: &PlatformProfile) -> Self {
        make_vulnerability_profile(platform, &platform.vulnerability, platform.vulnerability.seed)
    }

    /// Per-cell fault probability of `bram` at `v_mv`.
    pub fn cell_probability(&self, bram: u32, v_mv: u32) -> Result<f64, FaultError> {
        let rate = rate_curve(&self.platform, v_mv)?;
        Ok((rate * self.weights[bram as usize] / MBIT).min(1.0))
    }

    /// BRAM ids sorted by descending weight, ties by id.
    pub fn ranked_brams(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = (0..self.weights.len() as u32).collect();
        ids.sort_by(|&a, &b| {
            self.weights[b as usize]
                .total_cmp(&self.weights[a as usize])
                .then(a.cmp(&b))
        });
        ids
    }

    /// The `round(fraction * bram_count)` heaviest BRAMs.
    pub fn top_brams(&self, fraction: f64) -> Vec<u32> {
        let n = (fraction * self.weights.len() as f64).round() as usize;
        let mut top = self.ranked_brams();
        top.truncate(n);
        top.sort_unstable();
        top
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellAddr {
    pub bram: u32,
    /// `row * 18 + col`.
    pub bit: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaultCell {
    pub bram: u32,
    pub bit: u32,
    /// Value the cell reads back regardless of what was written.
    pub stuck: bool,
}

/// Stuck-at value of `cell` at `v_mv`, or `None` when the cell works.
pub fn is_cell_faulty(
    profile: &VulnerabilityProfile,
    cell: CellAddr,
    v_mv: u32,
    seed: u64,
) -> Result<Option<bool>, FaultError> {
    debug_assert!(cell.bit < BITS_PER_BRAM);
    let p = profile.cell_probability(cell.bram, v_mv)?;
    let h = CellHasher::new(seed);
    Ok((h.uniform(cell.bram, cell.bit) < p).then(|| h.stuck_value(cell.bram, cell.bit)))
}

/// All faulty cells of a device at one voltage, sorted by address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSet {
    pub voltage_mv: u32,
    pub bram_count: u32,
    pub cells: Vec<FaultCell>,
}

impl FaultSet {
    pub fn empty(voltage_mv: u32, bram_count: u32) -> Self {
        Self {
            voltage_mv,
            bram_count,
            cells: Vec::new(),
        }
    }

    /// Builds a set from arbitrary cells; sorts and deduplicates them.
    pub fn from_cells(voltage_mv: u32, bram_count: u32, mut cells: Vec<FaultCell>) -> Self {
        cells.sort_unstable();
        cells.dedup_by_key(|c| (c.bram, c.bit));
        Self {
            voltage_mv,
            bram_count,
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn counts_per_bram(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.bram_count as usize];
        for c in &self.cells {
            counts[c.bram as usize] += 1;
        }
        counts
    }

    /// Faults per Mbit of total device capacity.
    pub fn rate_per_mbit(&self) -> f64 {
        self.len() as f64 / (self.bram_count as f64 * BITS_PER_BRAM as f64 / MBIT)
    }

    pub fn contains(&self, bram: u32, bit: u32) -> bool {
        self.cells
            .binary_search_by(|c| (c.bram, c.bit).cmp(&(bram, bit)))
            .is_ok()
    }

    /// CSV rows `voltage_mv,bram,bit,stuck`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "voltage_mv,bram,bit,stuck")?;
        for c in &self.cells {
            writeln!(out, "{},{},{},{}", self.voltage_mv, c.bram, c.bit, c.stuck as u8)?;
        }
        Ok(())
    }
}

/// Enumerates every faulty cell of the device at `v_mv`.
pub fn generate_faults(profile: &VulnerabilityProfile, v_mv: u32, seed: u64) -> Result<FaultSet, FaultError> {
    let bram_count = profile.weights.len() as u32;
    let rate = rate_curve(&profile.platform, v_mv)?;
    if rate == 0.0 {
        return Ok(FaultSet::empty(v_mv, bram_count));
    }
    let hasher = CellHasher::new(seed);
    let scale = (53f64).exp2();
    let per_bram: Vec<Vec<FaultCell>> = (0..bram_count)
        .into_par_iter()
        .map(|bram| {
            let p = (rate * profile.weights[bram as usize] / MBIT).min(1.0);
            // u < p  <=>  bits < p * 2^53, exact because bits < 2^53
            let threshold = p * scale;
            (0..BITS_PER_BRAM)
                .filter(|&bit| (hasher.uniform_bits(bram, bit) as f64) < threshold)
                .map(|bit| FaultCell {
                    bram,
                    bit,
                    stuck: hasher.stuck_value(bram, bit),
                })
                .collect()
        })
        .collect();
    Ok(FaultSet {
        voltage_mv: v_mv,
        bram_count,
        cells: per_bram.into_iter().flatten().collect(),
    })
}

/// Writes a fault set as CSV to `path`.
pub fn export_faults_csv(faults: &FaultSet, path: &Path) -> Result<(), FaultError> {
    let file = std::fs::File::create(path)?;
    faults.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shipped_profiles_validate() {
        for name in PlatformProfile::builtin_names() {
            let p = PlatformProfile::builtin(name).unwrap();
            assert_eq!(p.name, name);
            assert_eq!(p.v_nom_mv, 1000);
        }
        let vc = PlatformProfile::vc707();
        assert_eq!((vc.bram_count, vc.v_first_fault_mv, vc.v_min_ref_mv, vc.v_crash_mv), (2030, 610, 590, 540));
        assert!(PlatformProfile::builtin("kc705b").is_ok());
        assert!(matches!(PlatformProfile::builtin("xyz"), Err(FaultError::UnknownPlatform(_))));
        assert!((vc.device_mbit() - 35.684).abs() < 1e-3);
    }

    #[test]
    fn sweep_grid() {
        let vc = PlatformProfile::vc707().sweep_voltages(10);
        assert_eq!(vc.len(), 47);
        assert_eq!((vc[0], vc[46]), (1000, 540));
        let zc = PlatformProfile::builtin("ZC702").unwrap().sweep_voltages(10);
        assert_eq!(&zc[45..], &[550, 540, 535]);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        let mut p = PlatformProfile::vc707();
        p.v_min_ref_mv = 620;
        assert!(p.validate().is_err());
        let mut p = PlatformProfile::vc707();
        p.rate_at_vcrash = 1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rate_curve_anchors() {
        let vc = PlatformProfile::vc707();
        assert_eq!(rate_curve(&vc, 540).unwrap(), 334.7);
        assert_eq!(rate_curve(&vc, 590).unwrap(), 1.4);
        assert_eq!(rate_curve(&vc, 1000).unwrap(), 0.0);
        assert_eq!(rate_curve(&vc, 620).unwrap(), 0.0);
        let at_first = rate_curve(&vc, 610).unwrap();
        assert!((at_first * vc.device_mbit() - 1.0).abs() < 1e-9);
        assert!(rate_curve(&vc, 530).is_err());
        assert!(rate_curve(&vc, 1001).is_err());
        // geometric midpoint between anchors
        let mid = rate_curve(&vc, 565).unwrap();
        assert!((mid - (1.4f64 * 334.7).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn rate_curve_is_continuous_and_decreasing() {
        let vc = PlatformProfile::vc707();
        let mut prev = f64::INFINITY;
        for v in 540..=610 {
            let r = rate_curve(&vc, v).unwrap();
            assert!(r < prev, "{v}");
            if v > 540 {
                // steepest segment: 50x over 20 mV
                assert!(prev / r < 1.25, "jump at {v}");
            }
            prev = r;
        }
    }

    #[test]
    fn vulnerability_mixture() {
        let vc = PlatformProfile::vc707();
        let prof = VulnerabilityProfile::for_platform(&vc);
        let mean = prof.weights.iter().sum::<f64>() / prof.weights.len() as f64;
        assert!((mean - 1.0).abs() < 1e-9);
        let top = prof.top_brams(0.018);
        assert_eq!(top.len(), 37);
        let share: f64 = top.iter().map(|&b| prof.weights[b as usize]).sum::<f64>() / prof.weights.len() as f64;
        assert!((0.90..=0.95).contains(&share), "{share}");
        assert!(prof.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn uniform_when_no_high_group() {
        let vc = PlatformProfile::vc707();
        let params = VulnerabilityParams {
            high_fraction: 0.0,
            ..VulnerabilityParams::default()
        };
        let prof = make_vulnerability_profile(&vc, &params, 3);
        assert!(prof.weights.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn no_faults_at_nominal() {
        let prof = VulnerabilityProfile::for_platform(&PlatformProfile::vc707());
        assert!(generate_faults(&prof, 1000, 1).unwrap().is_empty());
        assert!(generate_faults(&prof, 620, 1).unwrap().is_empty());
        for bit in 0..1000 {
            assert_eq!(is_cell_faulty(&prof, CellAddr { bram: 5, bit }, 1000, 9).unwrap(), None);
        }
    }

    #[test]
    fn generate_matches_pointwise_predicate() {
        let mut vc = PlatformProfile::vc707();
        vc.bram_count = 120;
        let prof = VulnerabilityProfile::for_platform(&vc);
        let set = generate_faults(&prof, 545, 4).unwrap();
        assert!(!set.is_empty());
        let mut brute = Vec::new();
        for bram in 0..120 {
            for bit in 0..BITS_PER_BRAM {
                if let Some(stuck) = is_cell_faulty(&prof, CellAddr { bram, bit }, 545, 4).unwrap() {
                    brute.push(FaultCell { bram, bit, stuck });
                }
            }
        }
        assert_eq!(set.cells, brute);
        assert_eq!(generate_faults(&prof, 545, 4).unwrap(), set);
    }

    #[test]
    fn csv_export() {
        let set = FaultSet::from_cells(550, 4, vec![FaultCell { bram: 2, bit: 9, stuck: true }, FaultCell { bram: 0, bit: 1, stuck: false }]);
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "voltage_mv,bram,bit,stuck\n550,0,1,0\n550,2,9,1\n");
        assert!(set.contains(2, 9));
        assert!(!set.contains(2, 8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nesting(bram in 0u32..2030, bit in 0u32..BITS_PER_BRAM, seed in 0u64..1000, hi in 541u32..=620, drop in 1u32..80) {
            let prof = VulnerabilityProfile::for_platform(&PlatformProfile::vc707());
            let lo = hi.saturating_sub(drop).max(540);
            let cell = CellAddr { bram, bit };
            if let Some(stuck) = is_cell_faulty(&prof, cell, hi, seed).unwrap() {
                prop_assert_eq!(is_cell_faulty(&prof, cell, lo, seed).unwrap(), Some(stuck));
            }
        }
    }
}

//! Voltage sweeps: fault generation, placement, corruption and evaluation at
//! every `(voltage, seed)` point, plus aggregation and region detection.

mod cache;
mod regions;
mod report;
mod stats;

pub use cache::{default_cache_dir, PointCache, CACHE_ENV, DEFAULT_CACHE_DIR};
pub use regions::{classify_voltage, detect_regions, Region, RegionTable};
pub use report::{export_report, read_report, write_csv, ReportFormat, CSV_HEADER};
pub use stats::{median, quantile};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::faults::{
    classify_brams_kmeans, classify_fault_types, generate_faults, Classification, FaultError, FaultTypeHistogram,
    KMeansError, PlatformProfile, VulnerabilityProfile,
};
use crate::memmap::{self, corrupt_model, BramGeometry, EccPolicy, EccStats, MapError, MemoryMap};
use crate::mnist::{Dataset, MnistError};
use crate::model::{evaluate, write_model, MlpModel, ModelFileError};

pub const DEFAULT_STEP_MV: u32 = 10;
pub const DEFAULT_LOSS_THRESHOLD_PP: f64 = 0.1;
const KMEANS_K: usize = 3;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Model(#[from] ModelFileError),
    #[error(transparent)]
    Dataset(#[from] MnistError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    KMeans(#[from] KMeansError),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("mitigation {0} needs a BRAM classification")]
    MissingClassification(Mitigation),
    #[error("no faults at {voltage_mv} mV; nothing to characterize")]
    NoFaults { voltage_mv: u32 },
    #[error("malformed {what}: {message}")]
    Parse { what: &'static str, message: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl SweepError {
    /// True for problems with input data files rather than with the
    /// experiment configuration or device capacity.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            SweepError::Model(_) | SweepError::Dataset(_) | SweepError::Parse { .. } | SweepError::Io { .. }
        )
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SweepError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mitigation {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "imm")]
    Imm,
    #[serde(rename = "ecc")]
    Ecc,
    #[serde(rename = "imm+ecc")]
    ImmEcc,
}

impl Mitigation {
    pub const ALL: [Mitigation; 4] = [Mitigation::None, Mitigation::Imm, Mitigation::Ecc, Mitigation::ImmEcc];

    pub fn uses_imm(self) -> bool {
        matches!(self, Mitigation::Imm | Mitigation::ImmEcc)
    }

    pub fn uses_ecc(self) -> bool {
        matches!(self, Mitigation::Ecc | Mitigation::ImmEcc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mitigation::None => "none",
            Mitigation::Imm => "imm",
            Mitigation::Ecc => "ecc",
            Mitigation::ImmEcc => "imm+ecc",
        }
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mitigation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mitigation::ALL
            .into_iter()
            .find(|m| m.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown mitigation {s:?}; expected none, imm, ecc or imm+ecc"))
    }
}

/// Parses `1..10` (inclusive), `3` or `1,4,9`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("bad seed list {s:?}; expected e.g. 1..10 or 1,2,5");
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub platform: PlatformProfile,
    pub mitigation: Mitigation,
    pub seeds: Vec<u64>,
    pub step_mv: u32,
    pub accuracy_loss_threshold_pp: f64,
    /// Fraction of the usable BRAMs the weights are striped over.
    pub spread: f64,
    /// Evaluate on the first `n` images only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_limit: Option<usize>,
    /// Restrict the sweep to these voltages instead of the full grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voltages_mv: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_path: Option<String>,
}

impl ExperimentConfig {
    pub fn new(platform: PlatformProfile, mitigation: Mitigation, seeds: Vec<u64>) -> Self {
        Self {
            platform,
            mitigation,
            seeds,
            step_mv: DEFAULT_STEP_MV,
            accuracy_loss_threshold_pp: DEFAULT_LOSS_THRESHOLD_PP,
            spread: memmap::DEFAULT_SPREAD,
            image_limit: None,
            voltages_mv: None,
            model_path: None,
            dataset_path: None,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::Config(m));
        self.platform.validate()?;
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.step_mv == 0 {
            return bad("voltage step must be positive".into());
        }
        if self.accuracy_loss_threshold_pp.is_nan() || self.accuracy_loss_threshold_pp < 0.0 {
            return bad(format!("loss threshold {} must be >= 0", self.accuracy_loss_threshold_pp));
        }
        if self.image_limit == Some(0) {
            return bad("image limit must be positive".into());
        }
        if let Some(vs) = &self.voltages_mv {
            let p = &self.platform;
            if let Some(v) = vs.iter().find(|&&v| v < p.v_crash_mv || v > p.v_nom_mv) {
                return bad(format!("voltage {v} mV outside [{}, {}] mV", p.v_crash_mv, p.v_nom_mv));
            }
        }
        Ok(())
    }

    /// Swept voltages, descending.
    pub fn voltages(&self) -> Vec<u32> {
        match &self.voltages_mv {
            Some(v) => {
                let mut v = v.clone();
                v.sort_unstable_by(|a, b| b.cmp(a));
                v.dedup();
                v
            }
            None => self.platform.sweep_voltages(self.step_mv),
        }
    }
}

/// Outcome of one `(voltage, seed)` point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub fault_count: u64,
    pub fault_rate_per_mbit: f64,
    pub accuracy: f64,
    pub loss_pp: f64,
    pub ecc: EccStats,
    pub fault_types: FaultTypeHistogram,
}

/// Seed-aggregated outcome at one voltage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub voltage_mv: u32,
    pub fault_count_median: f64,
    pub fault_rate_per_mbit: f64,
    pub accuracy_median: f64,
    pub loss_pp_median: f64,
    pub loss_pp_p90: f64,
    pub power_saving: f64,
    pub ecc_corrected: f64,
    pub ecc_uncorrectable: f64,
    pub per_seed: Vec<SeedResult>,
}

impl PointResult {
    pub fn aggregate(voltage_mv: u32, power_saving: f64, mut per_seed: Vec<SeedResult>) -> Self {
        per_seed.sort_by_key(|r| r.seed);
        let col = |f: fn(&SeedResult) -> f64| -> Vec<f64> { per_seed.iter().map(f).collect() };
        let med = |f| median(&col(f)).unwrap_or(0.0);
        Self {
            voltage_mv,
            fault_count_median: med(|r| r.fault_count as f64),
            fault_rate_per_mbit: med(|r| r.fault_rate_per_mbit),
            accuracy_median: med(|r| r.accuracy),
            loss_pp_median: med(|r| r.loss_pp),
            loss_pp_p90: quantile(&col(|r| r.loss_pp), 0.9).unwrap_or(0.0),
            power_saving,
            ecc_corrected: med(|r| r.ecc.corrected as f64),
            ecc_uncorrectable: med(|r| r.ecc.uncorrectable as f64),
            per_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointFailure {
    pub voltage_mv: u32,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub model_sha256: String,
    pub dataset_fingerprint: String,
    pub dataset_size: usize,
    pub clean_accuracy: f64,
    /// Descending voltage.
    pub points: Vec<PointResult>,
    pub regions: RegionTable,
    #[serde(default)]
    pub failures: Vec<PointFailure>,
}

impl SweepReport {
    pub fn point(&self, v_mv: u32) -> Option<&PointResult> {
        self.points.iter().find(|p| p.voltage_mv == v_mv)
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Saved output of [`characterize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    pub platform: String,
    pub bram_count: u32,
    pub voltage_mv: u32,
    pub seed: u64,
    pub fault_count: usize,
    pub counts_per_bram: Vec<u32>,
    pub classification: Classification,
}

impl Characterization {
    pub fn save(&self, path: &Path) -> Result<(), SweepError> {
        let json = serde_json::to_vec_pretty(self).expect("characterization serializes");
        std::fs::write(path, json).map_err(|e| SweepError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let bytes = std::fs::read(path).map_err(|e| SweepError::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| SweepError::Parse {
            what: "classification file",
            message: e.to_string(),
        })
    }
}

/// Off-line characterization: faults at `v_crash` with hash seed `seed`,
/// counted per BRAM and clustered into Low / Medium / High.
pub fn characterize(platform: &PlatformProfile, seed: u64) -> Result<Characterization, SweepError> {
    characterize_at(platform, platform.v_crash_mv, seed)
}

/// [`characterize`] at an arbitrary voltage.
pub fn characterize_at(platform: &PlatformProfile, v_mv: u32, seed: u64) -> Result<Characterization, SweepError> {
    let vuln = VulnerabilityProfile::for_platform(platform);
    let faults = generate_faults(&vuln, v_mv, seed)?;
    if faults.is_empty() {
        return Err(SweepError::NoFaults { voltage_mv: v_mv });
    }
    let counts = faults.counts_per_bram();
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let classification = classify_brams_kmeans(&values, KMEANS_K)?;
    Ok(Characterization {
        platform: platform.name.clone(),
        bram_count: platform.bram_count,
        voltage_mv: v_mv,
        seed,
        fault_count: faults.len(),
        counts_per_bram: counts,
        classification,
    })
}

/// Everything a sweep needs, loaded and validated once.
#[derive(Debug, Clone)]
pub struct SweepContext {
    cfg: ExperimentConfig,
    model: MlpModel,
    data: Dataset,
    vuln: VulnerabilityProfile,
    map: MemoryMap,
    classification: Option<Classification>,
    clean_accuracy: f64,
    model_sha256: String,
    dataset_fingerprint: String,
}

impl SweepContext {
    pub fn new(
        cfg: ExperimentConfig,
        model: MlpModel,
        data: Dataset,
        classification: Option<Classification>,
    ) -> Result<Self, SweepError> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(SweepError::Config("evaluation dataset is empty".into()));
        }
        let data = match cfg.image_limit {
            Some(n) if n < data.len() => data.head(n),
            _ => data,
        };
        let geometry = BramGeometry::new(cfg.platform.bram_count);
        let words = memmap::pack_words(&model, cfg.mitigation.uses_ecc())?;
        let map = if cfg.mitigation.uses_imm() {
            let c = classification
                .as_ref()
                .ok_or(SweepError::MissingClassification(cfg.mitigation))?;
            memmap::map_imm(&words, geometry, &c.labels, cfg.spread)?
        } else {
            memmap::map_default(&words, geometry, cfg.spread)?
        };
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes)?;
        let model_sha256 = hex::encode(Sha256::digest(&bytes));
        let clean_accuracy = evaluate(&model, &data);
        Ok(Self {
            vuln: VulnerabilityProfile::for_platform(&cfg.platform),
            dataset_fingerprint: data.fingerprint(),
            cfg,
            model,
            data,
            map,
            classification,
            clean_accuracy,
            model_sha256,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn clean_accuracy(&self) -> f64 {
        self.clean_accuracy
    }

    pub fn memory_map(&self) -> &MemoryMap {
        &self.map
    }

    pub fn vulnerability(&self) -> &VulnerabilityProfile {
        &self.vuln
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    /// Digest of everything a point result depends on except voltage and
    /// seed; names the cache directory.
    pub fn cache_key(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            crate_version: &'a str,
            platform: &'a PlatformProfile,
            mitigation: Mitigation,
            spread: f64,
            model: &'a str,
            dataset: &'a str,
            classification: Option<&'a [crate::faults::VulnerabilityClass]>,
        }
        let key = Key {
            crate_version: env!("CARGO_PKG_VERSION"),
            platform: &self.cfg.platform,
            mitigation: self.cfg.mitigation,
            spread: self.cfg.spread,
            model: &self.model_sha256,
            dataset: &self.dataset_fingerprint,
            classification: self
                .classification
                .as_ref()
                .filter(|_| self.cfg.mitigation.uses_imm())
                .map(|c| c.labels.as_slice()),
        };
        let json = serde_json::to_vec(&key).expect("cache key serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Runs the full pipeline at one point. Deterministic in `(self, v, seed)`.
    pub fn run_point(&self, v_mv: u32, seed: u64) -> Result<SeedResult, SweepError> {
        let faults = generate_faults(&self.vuln, v_mv, seed)?;
        let fault_types = classify_fault_types(&faults, &self.map);
        let policy = if self.cfg.mitigation.uses_ecc() {
            EccPolicy::On
        } else {
            EccPolicy::Off
        };
        let (corrupted, ecc) = corrupt_model(&self.model, &self.map, &faults, policy)?;
        let accuracy = if corrupted.same_parameters(&self.model) {
            self.clean_accuracy
        } else {
            evaluate(&corrupted, &self.data)
        };
        Ok(SeedResult {
            seed,
            fault_count: faults.len() as u64,
            fault_rate_per_mbit: faults.rate_per_mbit(),
            accuracy,
            loss_pp: 100.0 * (self.clean_accuracy - accuracy),
            ecc,
            fault_types,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means the rayon default.
    pub workers: usize,
    pub cache: Option<std::path::PathBuf>,
}

/// Runs every voltage x seed point and aggregates the results. Points that
/// fail are listed in `failures` and left out of the aggregates.
pub fn run_sweep(ctx: &SweepContext, opts: &RunOptions) -> Result<SweepReport, SweepError> {
    let cfg = &ctx.cfg;
    let voltages = cfg.voltages();
    let tasks: Vec<(u32, u64)> = voltages
        .iter()
        .flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let cache = opts.cache.as_ref().map(|root| PointCache::new(root, &ctx.cache_key()));

    let run = |&(v, seed): &(u32, u64)| -> Result<SeedResult, SweepError> {
        if let Some(hit) = cache.as_ref().and_then(|c| c.get(v, seed)) {
            return Ok(hit);
        }
        let r = ctx.run_point(v, seed)?;
        if let Some(c) = &cache {
            if let Err(e) = c.put(v, seed, &r) {
                log::warn!("cannot write cache entry for {v} mV seed {seed}: {e}");
            }
        }
        log::debug!("{v} mV seed {seed}: {} faults, loss {:.3} pp", r.fault_count, r.loss_pp);
        Ok(r)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| SweepError::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<SeedResult, SweepError>> = pool.install(|| tasks.par_iter().map(run).collect());

    let power = cfg.platform.power_model();
    let mut failures = Vec::new();
    let mut points = Vec::new();
    for (i, &v) in voltages.iter().enumerate() {
        let n = cfg.seeds.len();
        let mut ok = Vec::with_capacity(n);
        for (&(_, seed), outcome) in tasks[i * n..(i + 1) * n].iter().zip(&outcomes[i * n..(i + 1) * n]) {
            match outcome {
                Ok(r) => ok.push(r.clone()),
                Err(e) => failures.push(PointFailure {
                    voltage_mv: v,
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        if !ok.is_empty() {
            let saving = power.saving(v).map_err(|e| SweepError::Config(e.to_string()))?;
            points.push(PointResult::aggregate(v, saving, ok));
        }
    }
    let regions = detect_regions(&points, cfg.platform.v_crash_mv, cfg.step_mv, cfg.accuracy_loss_threshold_pp);
    Ok(SweepReport {
        format_version: report::REPORT_VERSION,
        config: cfg.clone(),
        model_sha256: ctx.model_sha256.clone(),
        dataset_fingerprint: ctx.dataset_fingerprint.clone(),
        dataset_size: ctx.data.len(),
        clean_accuracy: ctx.clean_accuracy,
        points,
        regions,
        failures,
    })
}

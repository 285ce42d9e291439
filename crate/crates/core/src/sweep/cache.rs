//! Per-point result cache: one JSON file per `(voltage, seed)` under a
//! directory named by the experiment key.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::SeedResult;

pub const CACHE_ENV: &str = "VOLTSIM_CACHE_DIR";
pub const DEFAULT_CACHE_DIR: &str = ".voltsim-cache";

/// `$VOLTSIM_CACHE_DIR`, or `.voltsim-cache` in the working directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

#[derive(Debug, Clone)]
pub struct PointCache {
    dir: PathBuf,
}

impl PointCache {
    pub fn new(root: &Path, key: &str) -> Self {
        Self { dir: root.join(key) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, v_mv: u32, seed: u64) -> PathBuf {
        self.dir.join(format!("{v_mv}_{seed}.json"))
    }

    /// Cached result, if present and readable. Corrupt entries are ignored.
    pub fn get(&self, v_mv: u32, seed: u64) -> Option<SeedResult> {
        let bytes = std::fs::read(self.path(v_mv, seed)).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(r) => Some(r),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {v_mv}_{seed}: {e}");
                None
            }
        }
    }

    /// Publishes a result atomically (write to a temp file, then rename), so
    /// concurrent writers never expose partial files.
    pub fn put(&self, v_mv: u32, seed: u64, result: &SeedResult) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        serde_json::to_writer(&mut tmp, result)?;
        tmp.flush()?;
        tmp.persist(self.path(v_mv, seed)).map_err(|e| e.error)?;
        Ok(())
    }
}

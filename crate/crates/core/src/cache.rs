//! On-disk cache of Monte Carlo calibrations.
//!
//! Each entry is a versioned JSON file named after its key: the first 16 hex
//! digits of the SHA-256 of the canonical JSON of the calibration settings
//! (object keys sorted, no whitespace). For example the `Tₙ` null sample for
//! `{"kind":"tn","master_seed":1,"n":128,"runs":100000,"s":5,"t_frac":0.95}`
//! lives in `null-tn-<key>.json`; barrier tables use `barrier-<key>.json`
//! keyed by `{"alpha_side", "master_seed", "n", "runs", "s"}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::diagram::{calibrate_barriers, BarrierTable};
use crate::error::{QdepError, Result};
use crate::global_test::{null_distributions, NullSample, StatisticKind, TestConfig};
use crate::io::sha256_hex;

pub const ENV_CACHE_DIR: &str = "QDEP_CACHE_DIR";

/// Canonical JSON: keys sorted, compact.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default map is ordered by key
    let v: Value = serde_json::to_value(value).map_err(|e| QdepError::Cache(e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| QdepError::Cache(e.to_string()))
}

pub fn cache_key<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(canonical_json(value)?.as_bytes())[..16].to_string())
}

#[derive(Serialize)]
struct NullKey<'a> {
    kind: StatisticKind,
    #[serde(flatten)]
    config: &'a TestConfig,
}

#[derive(Serialize)]
struct BarrierKey {
    n: usize,
    s: u32,
    alpha_side: f64,
    runs: usize,
    master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

/// Whether a lookup was served from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Cached,
    Computed,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// `$QDEP_CACHE_DIR` when set, otherwise `fallback`.
    pub fn from_env_or(fallback: impl Into<PathBuf>) -> Self {
        match std::env::var_os(ENV_CACHE_DIR) {
            Some(dir) if !dir.is_empty() => Self::new(dir),
            _ => Self::new(fallback),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn null_path(&self, config: &TestConfig, kind: StatisticKind) -> Result<PathBuf> {
        let key = cache_key(&NullKey { kind, config })?;
        Ok(self.root.join(format!("null-{}-{key}.json", kind.name())))
    }

    pub fn barrier_path(&self, n: usize, s: u32, alpha_side: f64, runs: usize, master_seed: u64) -> Result<PathBuf> {
        let key = cache_key(&BarrierKey {
            n,
            s,
            alpha_side,
            runs,
            master_seed,
        })?;
        Ok(self.root.join(format!("barrier-{key}.json")))
    }

    fn write(&self, path: &Path, text: &str) -> Result<()> {
        fs::create_dir_all(&self.root)
            .map_err(|e| QdepError::Cache(format!("cannot create {}: {e}", self.root.display())))?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, path))
            .map_err(|e| QdepError::Cache(format!("cannot write {}: {e}", path.display())))
    }

    fn read(path: &Path) -> Result<Option<String>> {
        match fs::read_to_string(path) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(QdepError::Cache(format!("cannot read {}: {e}", path.display()))),
        }
    }

    pub fn load_null(&self, config: &TestConfig, kind: StatisticKind) -> Result<Option<NullSample>> {
        let path = self.null_path(config, kind)?;
        let Some(text) = Self::read(&path)? else {
            return Ok(None);
        };
        let sample = NullSample::from_json(&text)
            .map_err(|e| QdepError::Cache(format!("{}: {e}", path.display())))?;
        if &sample.config != config || sample.kind != kind || sample.runs() != config.runs {
            return Err(QdepError::Cache(format!(
                "{} does not match the requested calibration",
                path.display()
            )));
        }
        Ok(Some(sample))
    }

    pub fn store_null(&self, sample: &NullSample) -> Result<PathBuf> {
        let path = self.null_path(&sample.config, sample.kind)?;
        self.write(&path, &sample.to_json()?)?;
        Ok(path)
    }

    /// Null samples for `kinds`, simulating the missing ones in one pass.
    pub fn null_samples(&self, config: &TestConfig, kinds: &[StatisticKind]) -> Result<Vec<(NullSample, Origin)>> {
        let mut found: Vec<Option<NullSample>> = kinds
            .iter()
            .map(|&k| self.load_null(config, k))
            .collect::<Result<_>>()?;
        let missing: Vec<StatisticKind> = kinds
            .iter()
            .zip(&found)
            .filter(|(_, f)| f.is_none())
            .map(|(&k, _)| k)
            .collect();
        let mut fresh = if missing.is_empty() {
            Vec::new()
        } else {
            null_distributions(config, &missing)?
        };
        for s in &fresh {
            self.store_null(s)?;
        }
        Ok(found
            .iter_mut()
            .map(|f| match f.take() {
                Some(s) => (s, Origin::Cached),
                None => (fresh.remove(0), Origin::Computed),
            })
            .collect())
    }

    pub fn null_sample(&self, config: &TestConfig, kind: StatisticKind) -> Result<(NullSample, Origin)> {
        Ok(self.null_samples(config, &[kind])?.remove(0))
    }

    pub fn barriers(
        &self,
        n: usize,
        s: u32,
        alpha_side: f64,
        runs: usize,
        master_seed: u64,
    ) -> Result<(BarrierTable, Origin)> {
        let path = self.barrier_path(n, s, alpha_side, runs, master_seed)?;
        if let Some(text) = Self::read(&path)? {
            let t = BarrierTable::from_json(&text)
                .map_err(|e| QdepError::Cache(format!("{}: {e}", path.display())))?;
            let m = &t.meta;
            if m.n != n || m.s != s || m.alpha_side != alpha_side || m.runs != runs || m.master_seed != master_seed {
                return Err(QdepError::Cache(format!(
                    "{} does not match the requested calibration",
                    path.display()
                )));
            }
            return Ok((t, Origin::Cached));
        }
        let t = calibrate_barriers(n, s, alpha_side, runs, master_seed)?;
        self.write(&path, &t.to_json()?)?;
        Ok((t, Origin::Computed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_sorts_keys() {
        let cfg = TestConfig::new(128, 63, 0.95, 100_000, 1).unwrap();
        assert_eq!(
            canonical_json(&NullKey { kind: StatisticKind::Tn, config: &cfg }).unwrap(),
            r#"{"kind":"tn","master_seed":1,"n":128,"runs":100000,"s":5,"t_frac":0.95}"#
        );
        let key = cache_key(&NullKey { kind: StatisticKind::Tn, config: &cfg }).unwrap();
        assert_eq!(key.len(), 16);
        assert_ne!(key, cache_key(&NullKey { kind: StatisticKind::Vn, config: &cfg }).unwrap());
    }

    #[test]
    fn null_samples_are_reused() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path().join("c"));
        let cfg = TestConfig::new(20, 7, 0.95, 1000, 5).unwrap();
        let first = cache.null_samples(&cfg, &[StatisticKind::Tn, StatisticKind::Vn]).unwrap();
        assert!(first.iter().all(|(_, o)| *o == Origin::Computed));
        let again = cache
            .null_samples(&cfg, &[StatisticKind::Vn, StatisticKind::MaxBet, StatisticKind::Tn])
            .unwrap();
        assert_eq!(again[0], (first[1].0.clone(), Origin::Cached));
        assert_eq!(again[1].1, Origin::Computed);
        assert_eq!(again[2], (first[0].0.clone(), Origin::Cached));
    }

    #[test]
    fn barriers_are_reused_and_validated() {
        let dir = tempfile::tempdir().unwrap();
        let cache = Cache::new(dir.path());
        let (a, o) = cache.barriers(32, 3, 0.05, 1000, 9).unwrap();
        assert_eq!(o, Origin::Computed);
        let (b, o) = cache.barriers(32, 3, 0.05, 1000, 9).unwrap();
        assert_eq!((a, o), (b, Origin::Cached));
        let path = cache.barrier_path(32, 3, 0.05, 1000, 9).unwrap();
        fs::write(&path, "{not json").unwrap();
        assert!(matches!(cache.barriers(32, 3, 0.05, 1000, 9), Err(QdepError::Cache(_))));
    }

    #[test]
    fn unwritable_cache_is_a_cache_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let cache = Cache::new(blocker.join("sub"));
        assert!(matches!(cache.barriers(32, 3, 0.05, 1000, 9), Err(QdepError::Cache(_))));
    }
}

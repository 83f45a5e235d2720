//! Flat key=value run configuration with flag and environment overrides.
//!
//! Recognized keys: system, out, grid, seed, degree, perturbation, tol,
//! threads, eps, samples, reps, pairs, h_min, h_max. Lines starting with `#`
//! and blank lines are ignored. Precedence: defaults < config file < flags <
//! MELNIKOV_THREADS (threads only).

use anyhow::{bail, Context, Result};
use melnikov_core::SystemId;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key = value", path.display(), lineno + 1);
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| anyhow::anyhow!("config key {key}: cannot parse {raw:?}")),
        }
    }
}

/// Effective settings of one run after all overrides.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: Option<SystemId>,
    pub out: PathBuf,
    pub grid: Option<usize>,
    pub seed: u64,
    pub degree: u32,
    pub perturbation: Option<PathBuf>,
    pub tol: f64,
    pub threads: usize,
    pub eps: Option<f64>,
    pub samples: Option<usize>,
    pub reps: Option<usize>,
}

pub fn parse_system(s: &str) -> Result<SystemId> {
    match s.to_ascii_lowercase().as_str() {
        "lv" => Ok(SystemId::Lv),
        "bt" => Ok(SystemId::Bt),
        other => bail!("unknown system {other:?} (expected lv or bt)"),
    }
}

pub fn resolve(file: &FileConfig, common: &crate::CommonArgs) -> Result<RunConfig> {
    let system = match (&common.system, file.get("system")) {
        (Some(s), _) => Some(parse_system(s)?),
        (None, Some(s)) => Some(parse_system(s)?),
        (None, None) => None,
    };
    let mut threads = common
        .threads
        .or(file.parsed::<usize>("threads")?)
        .unwrap_or(1);
    if let Ok(env_threads) = std::env::var("MELNIKOV_THREADS") {
        threads = env_threads
            .parse()
            .context("MELNIKOV_THREADS must be a positive integer")?;
    }
    Ok(RunConfig {
        system,
        out: common
            .out
            .clone()
            .or_else(|| file.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out")),
        grid: match common.grid {
            Some(g) => Some(g),
            None => file.parsed::<usize>("grid")?,
        },
        seed: common.seed.or(file.parsed::<u64>("seed")?).unwrap_or(1),
        degree: common.degree.or(file.parsed::<u32>("degree")?).unwrap_or(2),
        perturbation: common
            .perturbation
            .clone()
            .or_else(|| file.get("perturbation").map(PathBuf::from)),
        tol: common.tol.or(file.parsed::<f64>("tol")?).unwrap_or(1e-10),
        threads: threads.max(1),
        eps: file.parsed::<f64>("eps")?,
        samples: file.parsed::<usize>("samples")?,
        reps: file.parsed::<usize>("reps")?,
    })
}

pub fn require_system(cfg: &RunConfig) -> Result<SystemId> {
    cfg.system
        .ok_or_else(|| anyhow::anyhow!("a system is required (--system lv|bt or config key system)"))
}

//! Declarative run configuration (TOML) shared by the command-line tool.
//!
//! Every field is optional; command-line flags override what the file sets and
//! built-in defaults fill the rest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ProxyTask;
use crate::metrics::FourierConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub probe_size: Option<usize>,
    pub task: ProxyTask,
    pub fourier: FourierConfig,
    pub score: ScoreSection,
    pub correlate: CorrelateSection,
    pub search: SearchSection,
    pub spectral: SpectralSection,
    pub spiked: SpikedSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub genotype: Option<String>,
    pub metric: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateSection {
    pub space: Option<String>,
    pub n: Option<usize>,
    pub metrics: Option<Vec<String>>,
    /// Ground-truth cache file reused across runs.
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub space: Option<String>,
    /// `evolutionary` or `random`.
    pub algorithm: Option<String>,
    pub metric: Option<String>,
    pub population: Option<usize>,
    pub generations: Option<usize>,
    pub mutation_prob: Option<f64>,
    pub crossover_prob: Option<f64>,
    pub mac_cap: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSection {
    /// `genotype:<encoding>` or `file:<path>`.
    pub gram: Option<String>,
    pub eta: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikedSection {
    pub d: Option<usize>,
    pub d0: Option<usize>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub n: Option<usize>,
    pub n_test: Option<usize>,
    pub noise_std: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub regimes: Option<Vec<String>>,
    pub width: Option<usize>,
    pub steps: Option<usize>,
    pub lr: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("reading '{}': {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    /// The flag value if given, else the file value; a seed must come from one of them.
    pub fn require_seed(&self, flag: Option<u64>) -> Result<u64> {
        flag.or(self.seed)
            .ok_or_else(|| Error::Config("a seed is required (--seed or `seed = ...` in the config file)".into()))
    }
}

/// Parses `a,b,c`, an inclusive range `a..b`, or `start:stop:count` (evenly spaced, endpoints included).
pub fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse number list '{text}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return match count {
            0 => Err(bad()),
            1 => Ok(vec![a]),
            _ => Ok((0..count)
                .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
                .collect()),
        };
    }
    text.split(',').map(num).collect()
}

pub fn parse_u64_list(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse seed list '{text}'"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(num).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c =
            RunConfig::parse("seed = 3\n[task]\nn_train = 8\n[task.budget]\nsteps = 10\n[search]\nmac_cap = 5000\n")
                .unwrap();
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.task.n_train, 8);
        assert_eq!(c.task.n_test, ProxyTask::default().n_test);
        assert_eq!(c.task.budget.steps, 10);
        assert_eq!(c.task.budget.lr, 0.01);
        assert_eq!(c.search.mac_cap, Some(5000));
        assert_eq!(c.fourier, FourierConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::parse("sed = 1"), Err(Error::Config(_))));
        assert!(RunConfig::parse("[search]\npopulaton = 3").is_err());
    }

    #[test]
    fn seed_resolution() {
        let c = RunConfig::parse("seed = 4").unwrap();
        assert_eq!(c.require_seed(None).unwrap(), 4);
        assert_eq!(c.require_seed(Some(9)).unwrap(), 9);
        assert!(RunConfig::default().require_seed(None).is_err());
    }

    #[test]
    fn list_syntax() {
        assert_eq!(parse_f64_list("0, 1.5,3").unwrap(), vec![0.0, 1.5, 3.0]);
        assert_eq!(parse_f64_list("0:10:3").unwrap(), vec![0.0, 5.0, 10.0]);
        assert!(parse_f64_list("a,b").is_err());
        assert_eq!(parse_u64_list("0..4").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_u64_list("2,7").unwrap(), vec![2, 7]);
        assert!(parse_u64_list("4..1").is_err());
    }
}

//! Ground-truth training of sampled architectures and rank correlation of proxy
//! scores against the resulting accuracies.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::archspace::{build_network, count_cost, Genotype, SearchSpaceDef, DEFAULT_ENUMERATION_CAP};
use crate::dataset::{blob_texture_dataset, BlobTextureConfig, ImageDataset};
use crate::error::{Error, Result};
use crate::metrics::{FourierConfig, Metric};
use crate::nn::CompiledNetwork;
use crate::search::{ProbeSpec, Scorer};
use crate::train::{accuracy, train_classifier, TrainBudget};

/// Smallest sample for which a correlation is reported.
pub const MIN_TAU_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KendallTau {
    pub tau: f64,
    pub p_value: f64,
    pub n: usize,
    pub concordant: usize,
    pub discordant: usize,
}

/// Tie-corrected Kendall tau-b with a two-sided normal-approximation p-value.
///
/// The statistic `S = concordant - discordant` is shrunk by one toward zero before
/// standardizing, with the tie-corrected variance of `S`.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<KendallTau> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidArgument(format!(
            "rankings of length {n} and {} differ",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 items, got {n}")));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("rankings contain NaN".into()));
    }
    let (mut nc, mut nd, mut tx, mut ty) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].partial_cmp(&x[j]).expect("no NaN");
            let dy = y[i].partial_cmp(&y[j]).expect("no NaN");
            use std::cmp::Ordering::Equal;
            if dx == Equal {
                tx += 1;
            }
            if dy == Equal {
                ty += 1;
            }
            if dx != Equal && dy != Equal {
                if dx == dy {
                    nc += 1;
                } else {
                    nd += 1;
                }
            }
        }
    }
    let n0 = n * (n - 1) / 2;
    if tx == n0 || ty == n0 {
        return Err(Error::UndefinedTau(format!(
            "{} ranking has all {n} values equal",
            if tx == n0 { "first" } else { "second" }
        )));
    }
    let s = nc as f64 - nd as f64;
    let tau = s / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt();

    let groups = |v: &[f64]| -> Vec<f64> {
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        let mut out = Vec::new();
        let mut run = 1.0;
        for k in 1..sorted.len() {
            if sorted[k] == sorted[k - 1] {
                run += 1.0;
            } else {
                out.push(run);
                run = 1.0;
            }
        }
        out.push(run);
        out
    };
    let (gx, gy) = (groups(x), groups(y));
    let nf = n as f64;
    let sum = |g: &[f64], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum(&gx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&gy, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&gx, &|t| t * (t - 1.0)) * sum(&gy, &|t| t * (t - 1.0)) / (2.0 * nf * (nf - 1.0));
    let v2 = if n > 2 {
        sum(&gx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&gy, &|t| t * (t - 1.0) * (t - 2.0))
            / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
    } else {
        0.0
    };
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let z = (s.abs() - 1.0).max(0.0) / var.sqrt();
    let p_value = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(KendallTau {
        tau: tau.clamp(-1.0, 1.0),
        p_value,
        n,
        concordant: nc,
        discordant: nd,
    })
}

/// Fixed-budget classification task used as ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyTask {
    pub name: String,
    pub data: BlobTextureConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub budget: TrainBudget,
    pub seed: u64,
}

impl Default for ProxyTask {
    fn default() -> Self {
        ProxyTask {
            name: "blob-texture".into(),
            data: BlobTextureConfig::default(),
            n_train: 32,
            n_test: 256,
            budget: TrainBudget::default(),
            seed: 0,
        }
    }
}

impl ProxyTask {
    pub fn validate(&self) -> Result<()> {
        if self.name != "blob-texture" {
            return Err(Error::InvalidArgument(format!("unknown task dataset '{}'", self.name)));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument("train and test splits must be non-empty".into()));
        }
        if !(self.budget.lr >= 0.0) || !self.budget.lr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be finite and non-negative",
                self.budget.lr
            )));
        }
        Ok(())
    }

    /// Train and test splits cut from one seeded stream, so they never share an image.
    pub fn splits(&self) -> Result<(ImageDataset, ImageDataset)> {
        self.validate()?;
        let all = blob_texture_dataset(&self.data, self.n_train + self.n_test, self.seed)?;
        let test = ImageDataset {
            input: all.input,
            classes: all.classes,
            images: all.images[self.n_train..].to_vec(),
            labels: all.labels[self.n_train..].to_vec(),
        };
        Ok((all.take(self.n_train), test))
    }

    /// Canonical key: every field that affects a trained accuracy.
    pub fn fingerprint(&self) -> String {
        serde_json::to_string(self).expect("task serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyOutcome {
    /// Held-out accuracy; chance level when training diverged.
    pub accuracy: f64,
    pub diverged: bool,
    /// Last training loss; absent when it was not finite.
    pub final_loss: Option<f64>,
}

fn train_on(g: &Genotype, task: &ProxyTask, train: &ImageDataset, test: &ImageDataset) -> Result<ProxyOutcome> {
    let net = CompiledNetwork::compile(&build_network(g, train.classes, train.input)?)?;
    let out = train_classifier(&net, net.init_params(task.seed), train, task.budget)?;
    if out.diverged {
        return Ok(ProxyOutcome {
            accuracy: 1.0 / train.classes as f64,
            diverged: true,
            final_loss: Some(out.final_loss).filter(|l| l.is_finite()),
        });
    }
    Ok(ProxyOutcome {
        accuracy: accuracy(&net, &out.params, test)?,
        diverged: false,
        final_loss: Some(out.final_loss).filter(|l| l.is_finite()),
    })
}

/// Trains `g` on the task under its fixed budget and measures held-out accuracy.
pub fn train_proxy(g: &Genotype, task: &ProxyTask) -> Result<ProxyOutcome> {
    let (train, test) = task.splits()?;
    train_on(g, task, &train, &test)
}

/// Trained outcomes keyed by task fingerprint, then genotype encoding.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    tasks: BTreeMap<String, BTreeMap<String, ProxyOutcome>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        GroundTruth::default()
    }

    /// Reads a cache file; a missing file gives an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read(path) {
            Ok(bytes) => Ok(serde_json::from_slice(&bytes)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(GroundTruth::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn get(&self, task: &ProxyTask, g: &Genotype) -> Option<ProxyOutcome> {
        self.tasks.get(&task.fingerprint())?.get(&g.to_string()).copied()
    }

    pub fn len(&self) -> usize {
        self.tasks.values().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trains every genotype not yet cached for `task` (in parallel) and returns all outcomes in input order.
    pub fn ensure(&mut self, task: &ProxyTask, genotypes: &[Genotype]) -> Result<Vec<ProxyOutcome>> {
        let key = task.fingerprint();
        let mut missing: Vec<Genotype> = {
            let have = self.tasks.get(&key);
            genotypes
                .iter()
                .filter(|g| have.is_none_or(|h| !h.contains_key(&g.to_string())))
                .cloned()
                .collect()
        };
        missing.sort();
        missing.dedup();
        if !missing.is_empty() {
            let (train, test) = task.splits()?;
            let outcomes: Vec<ProxyOutcome> = missing
                .par_iter()
                .map(|g| train_on(g, task, &train, &test))
                .collect::<Result<_>>()?;
            let entry = self.tasks.entry(key.clone()).or_default();
            for (g, o) in missing.iter().zip(outcomes) {
                entry.insert(g.to_string(), o);
            }
        }
        let entry = &self.tasks[&key];
        Ok(genotypes.iter().map(|g| entry[&g.to_string()]).collect())
    }

    /// Accuracy table for every cached genotype of `task`.
    pub fn accuracy_table(&self, task: &ProxyTask) -> Result<BTreeMap<Genotype, f64>> {
        self.tasks
            .get(&task.fingerprint())
            .map(|t| t.iter().map(|(g, o)| Ok((g.parse()?, o.accuracy))).collect())
            .unwrap_or_else(|| Ok(BTreeMap::new()))
    }
}

/// Columns a correlation can be computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HarnessMetric {
    Proxy(Metric),
    /// Self-correlation oracle.
    Accuracy,
    Mac,
}

impl HarnessMetric {
    pub fn name(&self) -> &'static str {
        match self {
            HarnessMetric::Proxy(m) => m.name(),
            HarnessMetric::Accuracy => "accuracy",
            HarnessMetric::Mac => "mac",
        }
    }
}

impl fmt::Display for HarnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HarnessMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(HarnessMetric::Accuracy),
            "mac" => Ok(HarnessMetric::Mac),
            other => Ok(HarnessMetric::Proxy(other.parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub genotype: Genotype,
    pub mac: u64,
    pub accuracy: f64,
    pub diverged: bool,
    /// Proxy score per metric name.
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauEntry {
    pub metric: String,
    pub tau: Option<f64>,
    pub p_value: Option<f64>,
    /// `ok`, `insufficient-sample` or the reason the correlation is undefined.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub space_id: String,
    pub task: ProxyTask,
    pub seed: u64,
    pub n_samples: usize,
    pub probe: ProbeSpec,
    pub fourier: FourierConfig,
    pub rows: Vec<CorrelationRow>,
    pub taus: Vec<TauEntry>,
}

pub const CORRELATION_CSV_HEADER: [&str; 8] = [
    "genotype",
    "mac",
    "accuracy",
    "score_fnorm",
    "score_mean",
    "score_ncn",
    "score_relu",
    "score_vintk",
];

impl CorrelationReport {
    pub fn tau(&self, metric: &str) -> Option<f64> {
        self.taus.iter().find(|t| t.metric == metric)?.tau
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CORRELATION_CSV_HEADER)?;
        for r in &self.rows {
            let mut rec = vec![r.genotype.to_string(), r.mac.to_string(), r.accuracy.to_string()];
            for m in Metric::ALL {
                rec.push(r.scores.get(m.name()).map(|v| v.to_string()).unwrap_or_default());
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn tau_entry(metric: HarnessMetric, xs: &[f64], acc: &[f64]) -> TauEntry {
    let name = metric.name().to_string();
    if xs.len() < MIN_TAU_SAMPLES {
        return TauEntry {
            metric: name,
            tau: None,
            p_value: None,
            status: "insufficient-sample".into(),
        };
    }
    match kendall_tau(xs, acc) {
        Ok(k) => TauEntry {
            metric: name,
            tau: Some(k.tau),
            p_value: Some(k.p_value),
            status: "ok".into(),
        },
        Err(e) => TauEntry {
            metric: name,
            tau: None,
            p_value: None,
            status: e.to_string(),
        },
    }
}

/// Draws `n` distinct genotypes uniformly; returned in canonical (encoding) order.
pub fn sample_distinct(space: &SearchSpaceDef, n: usize, seed: u64) -> Result<Vec<Genotype>> {
    let all = space.enumerate(DEFAULT_ENUMERATION_CAP)?;
    if n > all.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {n} distinct genotypes from a space of cardinality {}",
            all.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, all.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| all[i].clone()).collect())
}

/// Samples `n` genotypes, trains each, scores each with every metric on a probe
/// batch shared by the whole report, and correlates every metric with accuracy.
pub fn correlate_space(
    space: &SearchSpaceDef,
    task: &ProxyTask,
    n: usize,
    metrics: &[HarnessMetric],
    seed: u64,
    truth: &mut GroundTruth,
) -> Result<CorrelationReport> {
    let genotypes = sample_distinct(space, n, seed)?;
    let outcomes = truth.ensure(task, &genotypes)?;
    let probe = ProbeSpec {
        seed,
        data: task.data,
        ..Default::default()
    };
    let fourier = FourierConfig::default();
    let proxies: Vec<Metric> = metrics
        .iter()
        .filter_map(|m| match m {
            HarnessMetric::Proxy(p) => Some(*p),
            _ => None,
        })
        .collect();
    let scorer = if proxies.is_empty() {
        None
    } else {
        Some(Scorer::new(&probe, fourier, seed)?)
    };
    let scored: Vec<(u64, BTreeMap<String, f64>)> = genotypes
        .par_iter()
        .map(|g| {
            let mac = count_cost(g)?.mac_count;
            let mut scores = BTreeMap::new();
            if let Some(s) = &scorer {
                for (m, v) in proxies.iter().zip(s.score_many(g, &proxies)?) {
                    scores.insert(m.name().to_string(), v.value);
                }
            }
            Ok((mac, scores))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<CorrelationRow> = genotypes
        .into_iter()
        .zip(outcomes)
        .zip(scored)
        .map(|((genotype, o), (mac, scores))| CorrelationRow {
            genotype,
            mac,
            accuracy: o.accuracy,
            diverged: o.diverged,
            scores,
        })
        .collect();
    let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
    let taus = metrics
        .iter()
        .map(|m| {
            let xs: Vec<f64> = match m {
                HarnessMetric::Proxy(p) => rows.iter().map(|r| r.scores[p.name()]).collect(),
                HarnessMetric::Accuracy => acc.clone(),
                HarnessMetric::Mac => rows.iter().map(|r| r.mac as f64).collect(),
            };
            tau_entry(*m, &xs, &acc)
        })
        .collect();
    Ok(CorrelationReport {
        space_id: space.id.clone(),
        task: task.clone(),
        seed,
        n_samples: rows.len(),
        probe,
        fourier,
        rows,
        taus,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub seed: u64,
    pub tau_full: Option<f64>,
    pub tau_msa_only: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub base_space: String,
    pub msa_space: String,
    pub metric: String,
    pub n_full: usize,
    pub n_msa_only: usize,
    pub rows: Vec<ContrastRow>,
    pub median_delta: Option<f64>,
    pub status: String,
}

/// Median of the finite values, `None` if there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Correlates `metric` on the full space and on `msa` (its MSA-only restriction)
/// under the same task and seeds. The restricted sample is capped at its cardinality.
pub fn msa_only_contrast_with(
    base: &SearchSpaceDef,
    msa: &SearchSpaceDef,
    task: &ProxyTask,
    n: usize,
    metric: HarnessMetric,
    seeds: &[u64],
    truth: &mut GroundTruth,
) -> Result<ContrastReport> {
    let n_msa = n.min(usize::try_from(msa.cardinality()).unwrap_or(usize::MAX));
    let mut report = ContrastReport {
        base_space: base.id.clone(),
        msa_space: msa.id.clone(),
        metric: metric.name().to_string(),
        n_full: n,
        n_msa_only: n_msa,
        rows: Vec::new(),
        median_delta: None,
        status: "ok".into(),
    };
    if n_msa < MIN_TAU_SAMPLES {
        report.status = format!("insufficient-sample: MSA-only space yields {n_msa} genotypes");
        return Ok(report);
    }
    for &seed in seeds {
        let full = correlate_space(base, task, n, &[metric], seed, truth)?;
        let restricted = correlate_space(msa, task, n_msa, &[metric], seed, truth)?;
        let (tf, tm) = (full.tau(metric.name()), restricted.tau(metric.name()));
        report.rows.push(ContrastRow {
            seed,
            tau_full: tf,
            tau_msa_only: tm,
            delta: tf.zip(tm).map(|(f, m)| m - f),
        });
    }
    let deltas: Vec<f64> = report.rows.iter().filter_map(|r| r.delta).collect();
    report.median_delta = median(&deltas);
    Ok(report)
}

pub fn msa_only_contrast(
    base: &SearchSpaceDef,
    task: &ProxyTask,
    n: usize,
    metric: HarnessMetric,
    seeds: &[u64],
    truth: &mut GroundTruth,
) -> Result<ContrastReport> {
    let msa = base
        .msa_only_variant()
        .ok_or_else(|| Error::InvalidArgument(format!("space '{}' has no MSA-only variant", base.id)))?;
    msa_only_contrast_with(base, &msa, task, n, metric, seeds, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archspace::builtin_space;

    #[test]
    fn tau_examples() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().tau, 1.0);
        assert_eq!(kendall_tau(&[3.0, 2.0, 1.0], &[10.0, 20.0, 30.0]).unwrap().tau, -1.0);
        let k = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!((k.concordant, k.discordant), (5, 1));
        assert!((k.tau - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tau_errors() {
        assert!(matches!(
            kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedTau(_))
        ));
        assert!(kendall_tau(&[1.0], &[1.0]).is_err());
        assert!(kendall_tau(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn tau_b_with_ties() {
        // x ties one pair, y ties one pair: n0 = 6, tx = ty = 1
        let k = kendall_tau(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert_eq!((k.concordant, k.discordant), (4, 0));
        assert!((k.tau - 4.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn splits_are_disjoint_and_balanced() {
        let task = ProxyTask {
            n_train: 8,
            n_test: 12,
            ..Default::default()
        };
        let (tr, te) = task.splits().unwrap();
        assert_eq!((tr.len(), te.len()), (8, 12));
        for a in &tr.images {
            assert!(te.images.iter().all(|b| a != b));
        }
        assert!(ProxyTask {
            n_test: 0,
            ..task.clone()
        }
        .splits()
        .is_err());
    }

    #[test]
    fn untrained_network_is_near_chance() {
        let task = ProxyTask {
            n_train: 4,
            n_test: 200,
            budget: TrainBudget { steps: 0, lr: 0.01 },
            ..Default::default()
        };
        let g = builtin_space("pure-vit").unwrap().default_genotype();
        let a = train_proxy(&g, &task).unwrap();
        assert!((a.accuracy - 0.25).abs() <= 0.1, "{}", a.accuracy);
        assert_eq!(a, train_proxy(&g, &task).unwrap());
    }

    #[test]
    fn sampling_is_distinct_canonical_and_bounded() {
        let space = builtin_space("pure-vit").unwrap();
        let s = sample_distinct(&space, 20, 4).unwrap();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, sample_distinct(&space, 20, 4).unwrap());
        assert!(sample_distinct(&space, 97, 0).is_err());
        assert_eq!(sample_distinct(&space, 96, 0).unwrap().len(), 96);
    }

    #[test]
    fn degenerate_msa_space_is_flagged() {
        let base = builtin_space("pure-vit").unwrap();
        let mut msa = builtin_space("pure-vit-msa-only").unwrap();
        for d in &mut msa.dimensions {
            d.searchable = false;
        }
        let task = ProxyTask {
            budget: TrainBudget { steps: 1, lr: 0.01 },
            n_train: 4,
            n_test: 4,
            ..Default::default()
        };
        let mut gt = GroundTruth::new();
        let r = msa_only_contrast_with(&base, &msa, &task, 30, HarnessMetric::Accuracy, &[0], &mut gt).unwrap();
        assert!(r.status.starts_with("insufficient-sample"));
        assert!(r.rows.is_empty() && r.median_delta.is_none());
    }

    #[test]
    fn harness_metric_names() {
        assert_eq!("accuracy".parse::<HarnessMetric>().unwrap(), HarnessMetric::Accuracy);
        assert_eq!(
            "vintk".parse::<HarnessMetric>().unwrap(),
            HarnessMetric::Proxy(Metric::Vintk)
        );
        assert!("x".parse::<HarnessMetric>().is_err());
    }
}

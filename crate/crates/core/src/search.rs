//! Scoring genotypes against a shared probe batch, and MAC-constrained random and
//! evolutionary search over a space.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archspace::{
    build_network, count_cost, crossover_with, mutate_with, Genotype, SearchSpaceDef, DEFAULT_CLASSES,
};
use crate::dataset::{blob_texture_dataset, BlobTextureConfig};
use crate::error::{Error, Result};
use crate::metrics::{
    empirical_ntk_gram, fnorm_score, fourier_gram, mean_score, ncn_score, relu_ntk_gram, relu_score, vintk_gram,
    vintk_score, FourierConfig, GramMatrix, Metric, MetricScore, MinMax, ProbeBatch,
};
use crate::nn::{CompiledNetwork, Layer, NetworkSpec, OutputReduction};

/// Consecutive rejected proposals after which sampling gives up.
pub const STARVATION_LIMIT: usize = 1000;

/// Probe inputs drawn from the task generator with their own seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub size: usize,
    pub seed: u64,
    pub data: BlobTextureConfig,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            size: 16,
            seed: 0,
            data: BlobTextureConfig::default(),
        }
    }
}

impl ProbeSpec {
    pub fn batch(&self) -> Result<ProbeBatch> {
        let ds = blob_texture_dataset(&self.data, self.size, self.seed)?;
        ProbeBatch::new((0..ds.len()).map(|i| ds.tensor(i)).collect(), None)
    }
}

/// Number of weight-bearing layers, counted through blocks.
pub fn weight_depth(layers: &[Layer]) -> usize {
    layers
        .iter()
        .map(|l| match l {
            Layer::Linear { .. } | Layer::Conv { .. } | Layer::DepthwiseConv { .. } | Layer::Attention { .. } => 1,
            Layer::SqueezeExcite { .. } => 2,
            Layer::Block { layers, .. } => weight_depth(layers),
            _ => 0,
        })
        .sum()
}

/// Scores genotypes at a fixed initialization seed on one shared probe batch.
///
/// The Fourier Gram depends only on the probes, so it is built once.
#[derive(Debug, Clone)]
pub struct Scorer {
    probe: ProbeBatch,
    fourier: GramMatrix,
    minmax: MinMax,
    fourier_cfg: FourierConfig,
    init_seed: u64,
    reduction: OutputReduction,
}

impl Scorer {
    pub fn new(probe: &ProbeSpec, fourier_cfg: FourierConfig, init_seed: u64) -> Result<Self> {
        Scorer::with_probe(probe.batch()?, fourier_cfg, init_seed)
    }

    pub fn with_probe(probe: ProbeBatch, fourier_cfg: FourierConfig, init_seed: u64) -> Result<Self> {
        let (normalized, minmax) = probe.min_max_normalized();
        let fourier = fourier_gram(&normalized, &fourier_cfg)?;
        Ok(Scorer {
            probe,
            fourier,
            minmax,
            fourier_cfg,
            init_seed,
            reduction: OutputReduction::SumLogits,
        })
    }

    /// Replaces the Fourier Gram used by `vintk`.
    pub fn with_fourier_override(mut self, fourier: GramMatrix) -> Result<Self> {
        if fourier.dim() != self.probe.len() {
            return Err(Error::Shape(format!(
                "Fourier override is {}x{}, probe batch has {} inputs",
                fourier.dim(),
                fourier.dim(),
                self.probe.len()
            )));
        }
        self.fourier = fourier;
        Ok(self)
    }

    pub fn probe(&self) -> &ProbeBatch {
        &self.probe
    }

    pub fn fourier_gram(&self) -> &GramMatrix {
        &self.fourier
    }

    pub fn fourier_config(&self) -> FourierConfig {
        self.fourier_cfg
    }

    pub fn minmax(&self) -> &MinMax {
        &self.minmax
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    fn network(&self, g: &Genotype) -> Result<NetworkSpec> {
        let shape = self.probe.inputs()[0].shape();
        let input = crate::nn::InputSig {
            height: shape[0],
            width: shape[1],
            channels: shape[2],
        };
        build_network(g, DEFAULT_CLASSES, input)
    }

    pub fn ntk_gram(&self, g: &Genotype) -> Result<GramMatrix> {
        let net = CompiledNetwork::compile(&self.network(g)?)?;
        let params = net.init_params(self.init_seed);
        empirical_ntk_gram(&net, &params, &self.probe, self.reduction)
    }

    pub fn score(&self, g: &Genotype, metric: Metric) -> Result<MetricScore> {
        Ok(self.score_many(g, &[metric])?.remove(0))
    }

    /// Scores `g` under every metric in order, computing the NTK Gram at most once.
    pub fn score_many(&self, g: &Genotype, metrics: &[Metric]) -> Result<Vec<MetricScore>> {
        let spec = self.network(g)?;
        let ntk = if metrics.iter().any(|m| *m != Metric::Relu) {
            Some(self.ntk_gram(g)?)
        } else {
            None
        };
        metrics
            .iter()
            .map(|m| {
                let k = || ntk.as_ref().expect("computed above");
                match m {
                    Metric::Fnorm => fnorm_score(k()),
                    Metric::Mean => mean_score(k()),
                    Metric::Ncn => ncn_score(k()),
                    Metric::Vintk => vintk_score(&vintk_gram(k(), &self.fourier)?),
                    Metric::Relu => relu_score(&relu_ntk_gram(&self.probe, weight_depth(&spec.layers).max(1))?),
                }
            })
            .collect()
    }
}

/// Builds a scorer for `probe` and `seed` with the default Fourier kernel, then scores `g`.
pub fn score_genotype(g: &Genotype, metric: Metric, probe: &ProbeSpec, seed: u64) -> Result<MetricScore> {
    Scorer::new(probe, FourierConfig::default(), seed)?.score(g, metric)
}

/// Flat JSON report of one score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub metric: String,
    pub value: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub trace: f64,
    #[serde(rename = "D")]
    pub d: usize,
    pub seed: u64,
    pub genotype: Genotype,
    pub degenerate: bool,
}

impl ScoreReport {
    pub fn new(score: &MetricScore, seed: u64, genotype: &Genotype) -> Self {
        ScoreReport {
            metric: score.metric.clone(),
            value: score.value,
            lambda_min: score.diagnostics.lambda_min,
            lambda_max: score.diagnostics.lambda_max,
            trace: score.diagnostics.trace,
            d: score.diagnostics.d,
            seed,
            genotype: genotype.clone(),
            degenerate: score.diagnostics.degenerate,
        }
    }
}

/// What a search maximizes.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Metric(Metric),
    /// MAC count itself.
    Mac,
    /// Precomputed ground-truth accuracy per genotype.
    Accuracy(BTreeMap<Genotype, f64>),
}

impl Objective {
    /// `mac`, `accuracy` (needs `table`) or any proxy metric name.
    pub fn from_name(name: &str, table: Option<BTreeMap<Genotype, f64>>) -> Result<Self> {
        match name {
            "mac" => Ok(Objective::Mac),
            "accuracy" => table
                .map(Objective::Accuracy)
                .ok_or_else(|| Error::InvalidArgument("metric 'accuracy' needs a ground-truth table".into())),
            other => Ok(Objective::Metric(other.parse()?)),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Metric(m) => m.name(),
            Objective::Mac => "mac",
            Objective::Accuracy(_) => "accuracy",
        }
    }

    fn evaluate(&self, g: &Genotype, mac: u64, scorer: &Scorer) -> Result<f64> {
        match self {
            Objective::Metric(m) => Ok(scorer.score(g, *m)?.value),
            Objective::Mac => Ok(mac as f64),
            Objective::Accuracy(t) => t
                .get(g)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("no ground-truth accuracy for {g}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub metric: String,
    pub population: usize,
    pub generations: usize,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    /// `None` means unconstrained.
    pub mac_cap: Option<u64>,
    pub probe: ProbeSpec,
    pub fourier: FourierConfig,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            metric: "vintk".into(),
            population: 8,
            generations: 4,
            mutation_prob: 0.9,
            crossover_prob: 0.5,
            mac_cap: None,
            probe: ProbeSpec::default(),
            fourier: FourierConfig::default(),
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.population < 2 {
            return bad(format!("population {} must be at least 2", self.population));
        }
        if self.generations == 0 {
            return bad("generations must be at least 1".into());
        }
        for (name, p) in [
            ("mutation_prob", self.mutation_prob),
            ("crossover_prob", self.crossover_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} must lie in [0, 1]"));
            }
        }
        if self.mac_cap == Some(0) {
            return bad("mac_cap must be positive".into());
        }
        self.fourier.validate()
    }

    /// Distinct evaluations allowed: `population x generations`.
    pub fn budget(&self) -> usize {
        self.population * self.generations
    }

    pub fn scorer(&self) -> Result<Scorer> {
        Scorer::new(&self.probe, self.fourier, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub ordinal: usize,
    pub genotype: Genotype,
    pub score: f64,
    pub mac: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_genotype: Genotype,
    pub best_score: f64,
    pub metric: String,
    pub mac_cap: Option<u64>,
    pub evaluations: usize,
    /// Proposals turned down as infeasible or already evaluated.
    pub rejections: usize,
    /// Sampling stopped early because no new feasible genotype could be found.
    pub exhausted: bool,
    pub history: Vec<HistoryEntry>,
}

enum Admission {
    Accepted(Genotype, u64),
    Rejected,
    Exhausted,
}

struct SearchState<'a> {
    cfg: &'a SearchConfig,
    objective: &'a Objective,
    scorer: &'a Scorer,
    seen: HashSet<Genotype>,
    history: Vec<HistoryEntry>,
    consecutive: usize,
    rejections: usize,
    exhausted: bool,
}

impl<'a> SearchState<'a> {
    fn new(cfg: &'a SearchConfig, objective: &'a Objective, scorer: &'a Scorer) -> Self {
        SearchState {
            cfg,
            objective,
            scorer,
            seen: HashSet::new(),
            history: Vec::new(),
            consecutive: 0,
            rejections: 0,
            exhausted: false,
        }
    }

    fn admit(&mut self, g: Genotype) -> Result<Admission> {
        let mac = count_cost(&g)?.mac_count;
        let feasible = self.cfg.mac_cap.is_none_or(|cap| mac <= cap);
        if feasible && !self.seen.contains(&g) {
            self.consecutive = 0;
            self.seen.insert(g.clone());
            return Ok(Admission::Accepted(g, mac));
        }
        self.rejections += 1;
        self.consecutive += 1;
        if self.consecutive < STARVATION_LIMIT {
            return Ok(Admission::Rejected);
        }
        if self.seen.is_empty() {
            return Err(Error::Starvation {
                rejections: self.consecutive,
                mac_cap: self.cfg.mac_cap.unwrap_or(u64::MAX),
            });
        }
        self.exhausted = true;
        Ok(Admission::Exhausted)
    }

    /// Scores a batch in parallel and appends it to the history in proposal order.
    fn evaluate(&mut self, batch: Vec<(Genotype, u64)>) -> Result<Vec<HistoryEntry>> {
        let scores: Vec<f64> = batch
            .par_iter()
            .map(|(g, mac)| self.objective.evaluate(g, *mac, self.scorer))
            .collect::<Result<_>>()?;
        let start = self.history.len();
        let entries: Vec<HistoryEntry> = batch
            .into_iter()
            .zip(scores)
            .enumerate()
            .map(|(k, ((genotype, mac), score))| HistoryEntry {
                ordinal: start + k,
                genotype,
                score,
                mac,
            })
            .collect();
        self.history.extend(entries.iter().cloned());
        Ok(entries)
    }

    fn finish(self) -> Result<SearchResult> {
        let best = best_entry(&self.history)
            .ok_or_else(|| Error::InvalidArgument("search evaluated no genotype".into()))?
            .clone();
        Ok(SearchResult {
            best_genotype: best.genotype,
            best_score: best.score,
            metric: self.objective.name().to_string(),
            mac_cap: self.cfg.mac_cap,
            evaluations: self.history.len(),
            rejections: self.rejections,
            exhausted: self.exhausted,
            history: self.history,
        })
    }
}

/// Highest score; the earliest entry wins ties.
fn best_entry(entries: &[HistoryEntry]) -> Option<&HistoryEntry> {
    entries.iter().fold(None, |best: Option<&HistoryEntry>, e| match best {
        Some(b) if b.score >= e.score => Some(b),
        _ => Some(e),
    })
}

/// Draws fresh feasible genotypes until `want` are collected or sampling starves.
fn sample_fresh(
    state: &mut SearchState,
    space: &SearchSpaceDef,
    rng: &mut ChaCha8Rng,
    want: usize,
) -> Result<Vec<(Genotype, u64)>> {
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        match state.admit(space.sample_with(rng))? {
            Admission::Accepted(g, mac) => out.push((g, mac)),
            Admission::Rejected => {}
            Admission::Exhausted => break,
        }
    }
    Ok(out)
}

/// Scores `population x generations` distinct feasible random genotypes and keeps the best.
pub fn random_search(
    space: &SearchSpaceDef,
    cfg: &SearchConfig,
    objective: &Objective,
    scorer: &Scorer,
) -> Result<SearchResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = SearchState::new(cfg, objective, scorer);
    let batch = sample_fresh(&mut state, space, &mut rng, cfg.budget())?;
    state.evaluate(batch)?;
    state.finish()
}

fn tournament<'a>(pop: &'a [HistoryEntry], rng: &mut ChaCha8Rng) -> &'a HistoryEntry {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if b.score > a.score {
        b
    } else {
        a
    }
}

/// Generational search: binary tournaments pick parents, children come from
/// uniform crossover and single-dimension mutation, and the best individual
/// survives unchanged. Every scored genotype is feasible and scored once, and
/// exactly `population x generations` genotypes are scored unless the space runs dry.
pub fn evolutionary_search(
    space: &SearchSpaceDef,
    cfg: &SearchConfig,
    objective: &Objective,
    scorer: &Scorer,
) -> Result<SearchResult> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = SearchState::new(cfg, objective, scorer);
    let first = sample_fresh(&mut state, space, &mut rng, cfg.population)?;
    let mut population = state.evaluate(first)?;
    // the elite occupies one slot, so generations continue until the budget is spent
    while state.history.len() < cfg.budget() && !state.exhausted {
        let elite = best_entry(&population).expect("non-empty population").clone();
        let want = (cfg.population - 1).min(cfg.budget() - state.history.len());
        let mut children = Vec::with_capacity(want);
        while children.len() < want {
            let p1 = tournament(&population, &mut rng);
            let mut child = if rng.random_bool(cfg.crossover_prob) {
                let p2 = tournament(&population, &mut rng);
                crossover_with(&p1.genotype, &p2.genotype, &mut rng)
            } else {
                p1.genotype.clone()
            };
            if rng.random_bool(cfg.mutation_prob) {
                child = mutate_with(space, &child, &mut rng);
            }
            match state.admit(child)? {
                Admission::Accepted(g, mac) => children.push((g, mac)),
                Admission::Rejected => {}
                Admission::Exhausted => break,
            }
        }
        let mut next = vec![elite];
        next.extend(state.evaluate(children)?);
        population = next;
    }
    state.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archspace::{builtin_space, enumerate_space};

    fn scorer() -> Scorer {
        Scorer::new(
            &ProbeSpec {
                size: 4,
                ..Default::default()
            },
            FourierConfig::default(),
            0,
        )
        .unwrap()
    }

    fn cfg(population: usize, generations: usize, seed: u64) -> SearchConfig {
        SearchConfig {
            metric: "mac".into(),
            population,
            generations,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig {
            population: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SearchConfig {
            mutation_prob: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SearchConfig {
            mac_cap: Some(0),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SearchConfig::default().validate().is_ok());
    }

    #[test]
    fn mac_oracle_random_search_returns_max_mac_sampled() {
        let space = builtin_space("pure-vit").unwrap();
        let c = cfg(4, 5, 3);
        let r = random_search(&space, &c, &Objective::Mac, &scorer()).unwrap();
        assert_eq!(r.evaluations, 20);
        assert_eq!(r.history.len(), 20);
        let max = r.history.iter().map(|e| e.mac).max().unwrap();
        assert_eq!(r.best_score, max as f64);
        let set: HashSet<_> = r.history.iter().map(|e| e.genotype.clone()).collect();
        assert_eq!(set.len(), 20);
    }

    #[test]
    fn cap_is_respected_and_starvation_reported() {
        let space = builtin_space("pure-vit").unwrap();
        let macs: Vec<u64> = enumerate_space(&space)
            .unwrap()
            .iter()
            .map(|g| count_cost(g).unwrap().mac_count)
            .collect();
        let mut sorted = macs.clone();
        sorted.sort_unstable();
        let cap = sorted[sorted.len() / 2];
        let c = SearchConfig {
            mac_cap: Some(cap),
            ..cfg(4, 4, 1)
        };
        let r = evolutionary_search(&space, &c, &Objective::Mac, &scorer()).unwrap();
        assert!(r.history.iter().all(|e| e.mac <= cap));
        assert_eq!(r.best_score, r.history.iter().map(|e| e.mac).max().unwrap() as f64);

        let c = SearchConfig {
            mac_cap: Some(sorted[0] - 1),
            ..cfg(4, 4, 1)
        };
        assert!(matches!(
            random_search(&space, &c, &Objective::Mac, &scorer()),
            Err(Error::Starvation { .. })
        ));
        assert!(matches!(
            evolutionary_search(&space, &c, &Objective::Mac, &scorer()),
            Err(Error::Starvation { .. })
        ));
    }

    #[test]
    fn small_space_is_exhausted_without_duplicates() {
        let space = builtin_space("pure-vit-msa-only").unwrap();
        let r = random_search(&space, &cfg(10, 3, 0), &Objective::Mac, &scorer()).unwrap();
        assert_eq!(r.evaluations, 16);
        assert!(r.exhausted);
        let r = evolutionary_search(&space, &cfg(10, 3, 0), &Objective::Mac, &scorer()).unwrap();
        assert!(r.evaluations <= 16);
    }

    #[test]
    fn single_point_space() {
        let mut space = builtin_space("pure-vit").unwrap();
        for d in &mut space.dimensions {
            d.searchable = false;
        }
        let r = random_search(&space, &cfg(2, 2, 0), &Objective::Mac, &scorer()).unwrap();
        assert_eq!(r.best_genotype, space.default_genotype());
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn equal_scores_terminate_normally() {
        let space = builtin_space("pure-vit").unwrap();
        let table: BTreeMap<_, _> = enumerate_space(&space).unwrap().into_iter().map(|g| (g, 0.5)).collect();
        let r = evolutionary_search(&space, &cfg(4, 3, 2), &Objective::Accuracy(table), &scorer()).unwrap();
        assert_eq!(r.evaluations, 12);
        assert_eq!(r.best_score, 0.5);
        assert_eq!(r.best_genotype, r.history[0].genotype);
    }

    #[test]
    fn one_dimension_space_finds_argmax_in_one_generation() {
        let mut space = builtin_space("pure-vit").unwrap();
        for (k, d) in space.dimensions.iter_mut().enumerate() {
            d.searchable = k == 1;
        }
        let table: BTreeMap<_, _> = enumerate_space(&space)
            .unwrap()
            .into_iter()
            .map(|g| {
                let v = g.choices[1] as f64;
                (g, v)
            })
            .collect();
        let r = evolutionary_search(&space, &cfg(3, 1, 0), &Objective::Accuracy(table), &scorer()).unwrap();
        assert_eq!(r.best_genotype.choices[1], 2);
    }

    #[test]
    fn scoring_is_deterministic_and_vintk_with_ones_is_mean() {
        let space = builtin_space("pure-vit").unwrap();
        let g = space.default_genotype();
        let s = scorer();
        let a = s.score_many(&g, &Metric::ALL).unwrap();
        let b = s.score_many(&g, &Metric::ALL).unwrap();
        assert_eq!(a, b);
        let ones = GramMatrix::new(4, vec![1.0; 16], crate::metrics::GramKind::Custom).unwrap();
        let s1 = s.clone().with_fourier_override(ones).unwrap();
        assert_eq!(
            s1.score(&g, Metric::Vintk).unwrap().value,
            s.score(&g, Metric::Mean).unwrap().value
        );
        assert!(s.clone().with_fourier_override(GramMatrix::identity(3)).is_err());
    }

    #[test]
    fn depth_counts_weights_through_blocks() {
        let layers = vec![
            Layer::Linear { out: 2, bias: true },
            Layer::Block {
                name: "b".into(),
                layers: vec![
                    Layer::LayerNorm,
                    Layer::Attention { heads: 1 },
                    Layer::SqueezeExcite { reduction: 2 },
                ],
                residual: true,
            },
            Layer::GlobalAvgPool,
        ];
        assert_eq!(weight_depth(&layers), 4);
    }

    #[test]
    fn objective_names() {
        assert_eq!(Objective::from_name("mac", None).unwrap(), Objective::Mac);
        assert!(Objective::from_name("accuracy", None).is_err());
        assert!(matches!(Objective::from_name("zz", None), Err(Error::UnknownMetric(_))));
        assert_eq!(Objective::from_name("ncn", None).unwrap().name(), "ncn");
    }
}

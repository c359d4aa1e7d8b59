use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vintk::archspace::{builtin_space, resolve_genotype};
use vintk::config::{parse_f64_list, parse_u64_list, RunConfig};
use vintk::harness::{correlate_space, CorrelationReport, GroundTruth, HarnessMetric, ProxyTask};
use vintk::io::write_atomic;
use vintk::metrics::{FourierConfig, GramKind, GramMatrix, Metric, MinMax};
use vintk::search::{
    evolutionary_search, random_search, Objective, ProbeSpec, ScoreReport, Scorer, SearchConfig, SearchResult,
};
use vintk::spectral::{
    simulate_residual_dynamics, spiked_experiment, write_spiked_csv, GapConfig, Regime, SpikedConfig, SpikedRow,
};
use vintk::Error;

#[derive(Parser)]
#[command(
    name = "vintk",
    version,
    about = "Training-free architecture scoring with neural tangent kernels"
)]
struct Cli {
    /// Worker threads; never changes any output.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one genotype with a proxy metric.
    Score(ScoreArgs),
    /// Train sampled architectures and rank-correlate proxy scores with accuracy.
    Correlate(CorrelateArgs),
    /// Search a space under a MAC cap.
    Search(SearchArgs),
    /// Eigenmode residual decay of kernel gradient descent.
    Spectral(SpectralArgs),
    /// Network versus NTK risk on spiked covariates.
    Spiked(SpikedArgs),
}

#[derive(Args)]
struct ScoreArgs {
    /// Genotype encoding, e.g. `pure-vit:0.2.1.1`.
    genotype: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    probe_size: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    #[arg(long)]
    space: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated metric names.
    #[arg(long)]
    metrics: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Ground-truth cache file, read and updated.
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    space: Option<String>,
    /// `evolutionary` or `random`.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    mac_cap: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectralArgs {
    /// `genotype:<encoding>` (empirical NTK on the probe batch) or `file:<path>` (JSON `{gram, labels}`).
    #[arg(long)]
    gram: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    /// `t0,t1,...` or `start:stop:count`.
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpikedArgs {
    /// `a..b` (inclusive) or `a,b,c`.
    #[arg(long)]
    seeds: Option<String>,
    /// Comma-separated: low, high, null.
    #[arg(long)]
    regimes: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    d0: Option<usize>,
    #[arg(long)]
    r1: Option<f64>,
    #[arg(long)]
    r2: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Starvation { .. } => 4,
        e if e.is_numeric() => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool configured once");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> vintk::Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Score(a) => score(&cfg, a),
        Command::Correlate(a) => correlate(&cfg, a),
        Command::Search(a) => search(&cfg, a),
        Command::Spectral(a) => spectral(&cfg, a),
        Command::Spiked(a) => spiked(&cfg, a),
    }
}

fn to_json<T: Serialize>(v: &T) -> vintk::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Writes to `out` atomically, or to stdout.
fn emit(out: Option<&Path>, text: &str) -> vintk::Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// CSV output cannot carry the configuration, so it goes to a sidecar file (or stderr).
fn emit_csv<C: Serialize>(out: Option<&Path>, csv: Vec<u8>, config: &C) -> vintk::Result<()> {
    let echo = to_json(config)?;
    match out {
        Some(p) => {
            write_atomic(p, &csv)?;
            let mut side = p.as_os_str().to_owned();
            side.push(".config.json");
            write_atomic(Path::new(&side), echo.as_bytes())
        }
        None => {
            print!("{}", String::from_utf8_lossy(&csv));
            eprint!("{echo}");
            Ok(())
        }
    }
}

fn probe_spec(cfg: &RunConfig, size: Option<usize>, seed: u64) -> ProbeSpec {
    ProbeSpec {
        size: size.or(cfg.probe_size).unwrap_or(ProbeSpec::default().size),
        seed,
        data: cfg.task.data,
    }
}

#[derive(Serialize)]
struct ScoreEcho {
    genotype: String,
    metric: String,
    seed: u64,
    probe: ProbeSpec,
    fourier: FourierConfig,
    /// Per-component min-max constants of the probe batch.
    normalization: MinMax,
}

#[derive(Serialize)]
struct ScoreOutput {
    #[serde(flatten)]
    report: ScoreReport,
    config: ScoreEcho,
}

fn score(cfg: &RunConfig, a: ScoreArgs) -> vintk::Result<()> {
    let text = a
        .genotype
        .or_else(|| cfg.score.genotype.clone())
        .ok_or_else(|| Error::Config("a genotype is required".into()))?;
    let (_, g) = resolve_genotype(&text)?;
    let metric: Metric = a
        .metric
        .or_else(|| cfg.score.metric.clone())
        .unwrap_or_else(|| "vintk".into())
        .parse()?;
    let seed = cfg.require_seed(a.seed)?;
    let probe = probe_spec(cfg, a.probe_size, seed);
    let scorer = Scorer::new(&probe, cfg.fourier, seed)?;
    let s = scorer.score(&g, metric)?;
    let out = ScoreOutput {
        report: ScoreReport::new(&s, seed, &g),
        config: ScoreEcho {
            genotype: g.to_string(),
            metric: metric.name().into(),
            seed,
            probe,
            fourier: cfg.fourier,
            normalization: scorer.minmax().clone(),
        },
    };
    emit(a.out.as_deref(), &to_json(&out)?)
}

#[derive(Serialize)]
struct CorrelateEcho {
    space: String,
    n: usize,
    metrics: Vec<String>,
    seed: u64,
    task: ProxyTask,
}

#[derive(Serialize)]
struct CorrelateOutput<'a> {
    #[serde(flatten)]
    report: &'a CorrelationReport,
    config: CorrelateEcho,
}

fn correlate(cfg: &RunConfig, a: CorrelateArgs) -> vintk::Result<()> {
    let space = builtin_space(
        a.space
            .as_deref()
            .or(cfg.correlate.space.as_deref())
            .unwrap_or("pure-vit"),
    )?;
    let n = a.n.or(cfg.correlate.n).unwrap_or(60);
    let metrics: Vec<String> = match a.metrics {
        Some(m) => m.split(',').map(|s| s.trim().to_string()).collect(),
        None => cfg
            .correlate
            .metrics
            .clone()
            .unwrap_or_else(|| Metric::ALL.iter().map(|m| m.name().to_string()).collect()),
    };
    let parsed: Vec<HarnessMetric> = metrics.iter().map(|m| m.parse()).collect::<vintk::Result<_>>()?;
    let seed = cfg.require_seed(a.seed)?;
    let mut task = cfg.task.clone();
    if let Some(s) = a.steps {
        task.budget.steps = s;
    }
    if let Some(v) = a.n_train {
        task.n_train = v;
    }
    if let Some(v) = a.n_test {
        task.n_test = v;
    }
    let cache = a.cache.or_else(|| cfg.correlate.cache.clone());
    let mut truth = match &cache {
        Some(p) => GroundTruth::load(p)?,
        None => GroundTruth::new(),
    };
    let report = correlate_space(&space, &task, n, &parsed, seed, &mut truth)?;
    if let Some(p) = &cache {
        truth.save(p)?;
    }
    let dir = a
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let stem = format!("correlation_{}_seed{seed}", space.id);
    let echo = CorrelateEcho {
        space: space.id.clone(),
        n,
        metrics,
        seed,
        task,
    };
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_atomic(&dir.join(format!("{stem}.csv")), &csv)?;
    let json = to_json(&CorrelateOutput {
        report: &report,
        config: echo,
    })?;
    write_atomic(&dir.join(format!("{stem}.json")), json.as_bytes())?;
    for t in &report.taus {
        match t.tau {
            Some(v) => eprintln!("{}: tau = {v:.4} (p = {:.4})", t.metric, t.p_value.unwrap_or(f64::NAN)),
            None => eprintln!("{}: {}", t.metric, t.status),
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SearchEcho {
    space: String,
    algorithm: String,
    search: SearchConfig,
}

#[derive(Serialize)]
struct SearchOutput<'a> {
    #[serde(flatten)]
    result: &'a SearchResult,
    config: SearchEcho,
}

fn search(cfg: &RunConfig, a: SearchArgs) -> vintk::Result<()> {
    let s = &cfg.search;
    let space = builtin_space(a.space.as_deref().or(s.space.as_deref()).unwrap_or("pure-vit"))?;
    let algorithm = a
        .algorithm
        .or_else(|| s.algorithm.clone())
        .unwrap_or_else(|| "evolutionary".into());
    let seed = cfg.require_seed(a.seed)?;
    let d = SearchConfig::default();
    let sc = SearchConfig {
        metric: a.metric.or_else(|| s.metric.clone()).unwrap_or(d.metric),
        population: a.population.or(s.population).unwrap_or(d.population),
        generations: a.generations.or(s.generations).unwrap_or(d.generations),
        mutation_prob: s.mutation_prob.unwrap_or(d.mutation_prob),
        crossover_prob: s.crossover_prob.unwrap_or(d.crossover_prob),
        mac_cap: a.mac_cap.or(s.mac_cap),
        probe: probe_spec(cfg, None, seed),
        fourier: cfg.fourier,
        seed,
    };
    sc.validate()?;
    if sc.metric == "accuracy" {
        return Err(Error::InvalidArgument(
            "the accuracy oracle needs precomputed ground truth; use the library API".into(),
        ));
    }
    let objective = Objective::from_name(&sc.metric, None)?;
    let scorer = sc.scorer()?;
    let result = match algorithm.as_str() {
        "evolutionary" => evolutionary_search(&space, &sc, &objective, &scorer)?,
        "random" => random_search(&space, &sc, &objective, &scorer)?,
        other => return Err(Error::InvalidArgument(format!("unknown algorithm '{other}'"))),
    };
    let out = SearchOutput {
        result: &result,
        config: SearchEcho {
            space: space.id.clone(),
            algorithm,
            search: sc,
        },
    };
    emit(a.out.as_deref(), &to_json(&out)?)
}

#[derive(serde::Deserialize)]
struct GramFile {
    gram: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

#[derive(Serialize)]
struct SpectralEcho {
    gram: String,
    eta: f64,
    t_grid: Vec<f64>,
    seed: Option<u64>,
    eigenvalues: Vec<f64>,
    initial: Vec<f64>,
}

fn spectral(cfg: &RunConfig, a: SpectralArgs) -> vintk::Result<()> {
    let source = a
        .gram
        .or_else(|| cfg.spectral.gram.clone())
        .ok_or_else(|| Error::Config("a Gram source is required (--gram genotype:<enc> or file:<path>)".into()))?;
    let eta = a.eta.or(cfg.spectral.eta).unwrap_or(0.01);
    let t_grid = match a.t_grid {
        Some(t) => parse_f64_list(&t)?,
        None => cfg
            .spectral
            .t_grid
            .clone()
            .unwrap_or_else(|| parse_f64_list("0:100:11").expect("literal")),
    };
    let (gram, labels, seed) = if let Some(enc) = source.strip_prefix("genotype:") {
        let (_, g) = resolve_genotype(enc)?;
        let seed = cfg.require_seed(a.seed)?;
        let probe = probe_spec(cfg, None, seed);
        let scorer = Scorer::new(&probe, cfg.fourier, seed)?;
        let ds = vintk::dataset::blob_texture_dataset(&probe.data, probe.size, probe.seed)?;
        let labels: Vec<f64> = ds.labels.iter().map(|&l| l as f64).collect();
        (scorer.ntk_gram(&g)?, labels, Some(seed))
    } else if let Some(path) = source.strip_prefix("file:") {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("reading '{path}': {e}")))?;
        let f: GramFile = serde_json::from_str(&text).map_err(|e| Error::Config(format!("'{path}': {e}")))?;
        let n = f.gram.len();
        if f.gram.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("'{path}': Gram rows must all have length {n}")));
        }
        (GramMatrix::new(n, f.gram.concat(), GramKind::Custom)?, f.labels, None)
    } else {
        return Err(Error::Config(format!(
            "Gram source '{source}' must start with 'genotype:' or 'file:'"
        )));
    };
    let trace = simulate_residual_dynamics(&gram, &labels, eta, &t_grid)?;
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    let echo = SpectralEcho {
        gram: source,
        eta,
        t_grid,
        seed,
        eigenvalues: trace.eigenvalues.clone(),
        initial: trace.initial.clone(),
    };
    emit_csv(a.out.as_deref(), csv, &echo)
}

#[derive(Serialize)]
struct SpikedEcho {
    base: SpikedConfig,
    seeds: Vec<u64>,
    regimes: Vec<Regime>,
    gap: GapConfig,
}

fn spiked(cfg: &RunConfig, a: SpikedArgs) -> vintk::Result<()> {
    let s = &cfg.spiked;
    let d = SpikedConfig::default();
    let base = SpikedConfig {
        d: a.d.or(s.d).unwrap_or(d.d),
        d0: a.d0.or(s.d0).unwrap_or(d.d0),
        r1: a.r1.or(s.r1).unwrap_or(d.r1),
        r2: a.r2.or(s.r2).unwrap_or(d.r2),
        n: a.n.or(s.n).unwrap_or(d.n),
        n_test: s.n_test.unwrap_or(d.n_test),
        noise_std: s.noise_std.unwrap_or(d.noise_std),
        activation: d.activation,
        seed: 0,
    };
    base.validate()?;
    let mut seeds = match a.seeds {
        Some(t) => parse_u64_list(&t)?,
        None => match &s.seeds {
            Some(v) => v.clone(),
            None => vec![cfg.require_seed(None)?],
        },
    };
    seeds.sort_unstable();
    seeds.dedup();
    let regimes: Vec<Regime> = match a.regimes {
        Some(t) => t.split(',').map(|r| r.trim().parse()).collect::<vintk::Result<_>>()?,
        None => match &s.regimes {
            Some(v) => v.iter().map(|r| r.parse()).collect::<vintk::Result<_>>()?,
            None => vec![Regime::Low],
        },
    };
    let g = GapConfig::default();
    let gap = GapConfig {
        width: a.width.or(s.width).unwrap_or(g.width),
        steps: a.steps.or(s.steps).unwrap_or(g.steps),
        lr: a.lr.or(s.lr).unwrap_or(g.lr),
    };
    let rows: Vec<SpikedRow> = spiked_experiment(&base, &seeds, &regimes, &gap)?;
    let mut csv = Vec::new();
    write_spiked_csv(&rows, &mut csv)?;
    emit_csv(
        a.out.as_deref(),
        csv,
        &SpikedEcho {
            base,
            seeds,
            regimes,
            gap,
        },
    )
}

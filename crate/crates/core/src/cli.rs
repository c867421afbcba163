//! Command-line interface. [`run`] parses arguments, executes one command and
//! returns the process exit code: 0 on success, 2 for usage or input errors,
//! 3 for internal failures.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{pk_sweep, summarize, ts_sweep, write_rows_csv, PkSweepConfig, TsSweepConfig};
use crate::discovery::{discover, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::eval::{score_directed, score_lag_graph};
use crate::graph::{CausalGraph, Dataset, GroundTruth, PriorKnowledge};
use crate::manifest::{manifest_path, FileRecord, RunManifest};
use crate::simulate::{gen_camuv_instance, gen_ts_instance, LagGroundTruth, ScmConfig, TsScmConfig};
use crate::timeseries::{discover_ts_detailed, LagGraph, TimeEmbedding};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "camuv", version, about = "Causal discovery for additive models with unobserved variables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its ground truth.
    Simulate(SimulateArgs),
    /// Discover direct causes and latent-confounded pairs in i.i.d. data.
    Discover(DiscoverArgs),
    /// Discover a lagged causal graph in a multivariate time series.
    DiscoverTs(DiscoverTsArgs),
    /// Score an estimated graph against ground truth.
    Evaluate(EvaluateArgs),
    /// Run a repeated simulate/discover/score sweep.
    Benchmark(BenchmarkArgs),
    /// Re-run a command from its manifest and check the outputs match.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Dot,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Iid,
    Ts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Protocol {
    #[value(name = "pk-sweep")]
    #[serde(rename = "pk-sweep")]
    PkSweep,
    #[value(name = "ts-sweep")]
    #[serde(rename = "ts-sweep")]
    TsSweep,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "iid")]
    pub kind: Kind,
    /// Generator settings as JSON; omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the sample count in the config.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Data CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiscoveryArgs {
    /// Significance level of the independence tests.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Largest variable subset examined per step.
    #[arg(long, default_value_t = 2)]
    pub max_subset: usize,
    /// Forbidden cause/effect pairs, `{"forbidden": [[cause, effect], ...]}`.
    #[arg(long)]
    pub prior: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiscoverArgs {
    /// Data CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub discovery: DiscoveryArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Also write the graph in DOT.
    #[arg(long)]
    pub dot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiscoverTsArgs {
    /// Time series CSV, one column per variable, rows in time order.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub max_lag: usize,
    /// Forbidden pairs over embedded column names such as `X1_lag1`,
    /// added to the time-priority constraints.
    #[command(flatten)]
    pub discovery: DiscoveryArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub dot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// Ground truth written by `simulate`.
    #[arg(long)]
    pub truth: PathBuf,
    /// Graph written by `discover` or `discover-ts`.
    #[arg(long)]
    pub graph: PathBuf,
    /// Ordered pairs left out of the score, `[[cause, effect], ...]`.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Repetition r uses seed `seed + r`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample sizes (comma separated). Defaults: 1000 for pk-sweep,
    /// 200,2000 for ts-sweep.
    #[arg(long, value_delimiter = ',')]
    pub samples: Vec<usize>,
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2)]
    pub max_subset: usize,
    /// Time-series protocol only.
    #[arg(long, default_value_t = 2)]
    pub max_lag: usize,
    /// Row output; `json` writes the per-setting means instead.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// What a command touched, for its manifest.
struct Outcome {
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

fn snapshot<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(fs::File::open(path)?)
}

fn read_prior(path: &Path, variables: &[String]) -> Result<PriorKnowledge> {
    PriorKnowledge::from_json(&fs::read_to_string(path)?, variables)
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let text = a.config.as_deref().map(fs::read_to_string).transpose()?;
    let (config, seed) = match a.kind {
        Kind::Iid => {
            let mut cfg: ScmConfig = match &text {
                Some(t) => serde_json::from_str(t)?,
                None => ScmConfig::default(),
            };
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.n_samples = a.samples.unwrap_or(cfg.n_samples);
            let (data, truth) = gen_camuv_instance(&cfg)?;
            data.write_csv(fs::File::create(&a.out)?)?;
            write_text(&a.truth, &(truth.to_json()? + "\n"))?;
            (snapshot(&cfg)?, cfg.seed)
        }
        Kind::Ts => {
            let mut cfg: TsScmConfig = match &text {
                Some(t) => serde_json::from_str(t)?,
                None => TsScmConfig::default(),
            };
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.n_samples = a.samples.unwrap_or(cfg.n_samples);
            let (data, truth) = gen_ts_instance(&cfg)?;
            data.write_csv(fs::File::create(&a.out)?)?;
            write_text(&a.truth, &(truth.to_json()? + "\n"))?;
            (snapshot(&cfg)?, cfg.seed)
        }
    };
    log::info!("wrote {} and {}", a.out.display(), a.truth.display());
    Ok(Outcome {
        config,
        seed: Some(seed),
        inputs: a.config.iter().cloned().collect(),
        outputs: vec![a.out.clone(), a.truth.clone()],
    })
}

fn discovery_config(d: &DiscoveryArgs, prior: Option<PriorKnowledge>) -> DiscoveryConfig {
    let cfg = DiscoveryConfig::new(d.alpha, d.max_subset);
    match prior {
        Some(p) => cfg.with_prior(p),
        None => cfg,
    }
}

fn graph_format(format: Format) -> Result<Format> {
    match format {
        Format::Csv => Err(Error::InvalidInput("graphs are written as json or dot".into())),
        f => Ok(f),
    }
}

fn run_discover(a: &DiscoverArgs) -> Result<Outcome> {
    let format = graph_format(a.format)?;
    let data = read_dataset(&a.data)?;
    let prior = a.discovery.prior.as_deref().map(|p| read_prior(p, data.names())).transpose()?;
    let cfg = discovery_config(&a.discovery, prior);
    log::info!("discovering over {} variables and {} samples", data.n_vars(), data.n_samples());
    let g = discover(&data, &cfg)?;
    let body = match format {
        Format::Dot => g.to_dot(),
        _ => g.to_json()? + "\n",
    };
    write_text(&a.out, &body)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(dot) = &a.dot {
        write_text(dot, &g.to_dot())?;
        outputs.push(dot.clone());
    }
    log::info!("{} directed and {} dashed edges", g.directed.len(), g.dashed.len());
    let mut inputs = vec![a.data.clone()];
    inputs.extend(a.discovery.prior.iter().cloned());
    Ok(Outcome { config: snapshot(a)?, seed: None, inputs, outputs })
}

fn run_discover_ts(a: &DiscoverTsArgs) -> Result<Outcome> {
    let format = graph_format(a.format)?;
    let data = read_dataset(&a.data)?;
    let extra = match &a.discovery.prior {
        Some(p) => {
            let emb = TimeEmbedding::new(data.names(), a.max_lag);
            Some(read_prior(p, &emb.columns)?)
        }
        None => None,
    };
    let cfg = discovery_config(&a.discovery, None);
    log::info!("discovering over {} series with max lag {}", data.n_vars(), a.max_lag);
    let out = discover_ts_detailed(&data, a.max_lag, &cfg, extra.as_ref())?;
    let g = &out.lag_graph;
    if g.has_contemporaneous_cycle() {
        log::warn!("the lag-0 edges of the result contain a cycle");
    }
    let body = match format {
        Format::Dot => g.to_dot(),
        _ => g.to_json()? + "\n",
    };
    write_text(&a.out, &body)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(dot) = &a.dot {
        write_text(dot, &g.to_dot())?;
        outputs.push(dot.clone());
    }
    log::info!("{} lagged edges, {} dashed pairs", g.edges.len(), g.dashed.len());
    let mut inputs = vec![a.data.clone()];
    inputs.extend(a.discovery.prior.iter().cloned());
    Ok(Outcome { config: snapshot(a)?, seed: None, inputs, outputs })
}

fn run_evaluate(a: &EvaluateArgs) -> Result<Outcome> {
    let truth_text = fs::read_to_string(&a.truth)?;
    let graph_text = fs::read_to_string(&a.graph)?;
    let truth_value: serde_json::Value = serde_json::from_str(&truth_text)?;
    let score = if truth_value.get("max_lag").is_some() {
        if a.exclude.is_some() {
            return Err(Error::InvalidInput("--exclude applies to i.i.d. graphs only".into()));
        }
        let truth = LagGroundTruth::from_json(&truth_text)?;
        score_lag_graph(&truth, &LagGraph::from_json(&graph_text)?)?
    } else {
        let truth = GroundTruth::from_json(&truth_text)?;
        let excluded: BTreeSet<(String, String)> = match &a.exclude {
            Some(p) => serde_json::from_str::<Vec<(String, String)>>(&fs::read_to_string(p)?)?.into_iter().collect(),
            None => BTreeSet::new(),
        };
        score_directed(&truth, &CausalGraph::from_json(&graph_text)?, &excluded)?
    };
    let json = score.to_json()?;
    write_text(&a.out, &(json.clone() + "\n"))?;
    println!("{json}");
    let mut inputs = vec![a.truth.clone(), a.graph.clone()];
    inputs.extend(a.exclude.iter().cloned());
    Ok(Outcome { config: snapshot(a)?, seed: None, inputs, outputs: vec![a.out.clone()] })
}

fn run_benchmark(a: &BenchmarkArgs) -> Result<Outcome> {
    if a.format == Format::Dot {
        return Err(Error::InvalidInput("benchmark output is csv or json".into()));
    }
    let (rows, config) = match a.protocol {
        Protocol::PkSweep => {
            let n = match a.samples.as_slice() {
                [] => ScmConfig::default().n_samples,
                [n] => *n,
                _ => return Err(Error::InvalidInput("pk-sweep takes a single sample size".into())),
            };
            let cfg = PkSweepConfig {
                reps: a.reps,
                base_seed: a.seed,
                alpha: a.alpha,
                max_subset: a.max_subset,
                scm: ScmConfig { n_samples: n, ..Default::default() },
                ..Default::default()
            };
            (pk_sweep(&cfg)?, snapshot(&cfg)?)
        }
        Protocol::TsSweep => {
            let mut cfg = TsSweepConfig {
                reps: a.reps,
                base_seed: a.seed,
                alpha: a.alpha,
                max_subset: a.max_subset,
                ts: TsScmConfig { max_lag: a.max_lag, ..Default::default() },
                ..Default::default()
            };
            if !a.samples.is_empty() {
                cfg.sample_sizes = a.samples.clone();
            }
            (ts_sweep(&cfg)?, snapshot(&cfg)?)
        }
    };
    let summary = summarize(&rows);
    for s in &summary {
        eprintln!(
            "n={} pk={} reps={} precision={:.3} recall={:.3} f={:.3}",
            s.n, s.pk_count, s.rows, s.precision, s.recall, s.f_measure
        );
    }
    match a.format {
        Format::Json => write_text(&a.out, &(serde_json::to_string_pretty(&summary)? + "\n"))?,
        _ => write_rows_csv(&rows, fs::File::create(&a.out)?)?,
    }
    Ok(Outcome { config, seed: Some(a.seed), inputs: Vec::new(), outputs: vec![a.out.clone()] })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Discover(_) => "discover",
        Command::DiscoverTs(_) => "discover-ts",
        Command::Evaluate(_) => "evaluate",
        Command::Benchmark(_) => "benchmark",
        Command::Replay(_) => "replay",
    }
}

fn execute(command: &Command, argv: &[String]) -> Result<()> {
    if let Command::Replay(r) = command {
        return replay(&r.manifest);
    }
    let started = Instant::now();
    let started_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let outcome = match command {
        Command::Simulate(a) => simulate(a)?,
        Command::Discover(a) => run_discover(a)?,
        Command::DiscoverTs(a) => run_discover_ts(a)?,
        Command::Evaluate(a) => run_evaluate(a)?,
        Command::Benchmark(a) => run_benchmark(a)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command_name(command).to_string(),
        argv: argv.to_vec(),
        config: outcome.config,
        seed: outcome.seed,
        inputs: outcome.inputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
        outputs: outcome.outputs.iter().map(|p| FileRecord::of(p)).collect::<Result<_>>()?,
        started_at,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let path = manifest_path(&outcome.outputs[0]);
    manifest.write(&path)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn replay(path: &Path) -> Result<()> {
    let m = RunManifest::read(path)?;
    let changed = m.changed_inputs()?;
    if !changed.is_empty() {
        return Err(Error::InvalidInput(format!(
            "inputs changed since the recorded run: {}",
            changed.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
        )));
    }
    let cli = Cli::try_parse_from(std::iter::once("camuv".to_string()).chain(m.argv.iter().cloned()))
        .map_err(|e| Error::InvalidInput(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::InvalidInput("a manifest cannot replay another replay".into()));
    }
    execute(&cli.command, &m.argv)?;
    let differing = m.mismatched_outputs()?;
    if !differing.is_empty() {
        return Err(Error::Invariant(format!(
            "replay produced different outputs: {}",
            differing.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
        )));
    }
    eprintln!("replay reproduced {} output file(s)", m.outputs.len());
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli.command, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_INTERNAL
            }
        }
    }
}

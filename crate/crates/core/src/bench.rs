//! Repeated simulate/discover/score sweeps.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discovery::{discover, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::eval::{score_directed, score_lag_graph, Score};
use crate::graph::PriorKnowledge;
use crate::simulate::{gen_camuv_instance, gen_ts_instance, ScmConfig, TsScmConfig};
use crate::timeseries::discover_ts_detailed;

/// Environment variable capping the benchmark worker pool.
pub const THREADS_ENV: &str = "CAMUV_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub protocol: String,
    pub rep: usize,
    pub seed: u64,
    pub n: usize,
    pub pk_count: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl BenchRow {
    fn new(protocol: &str, rep: usize, seed: u64, n: usize, pk_count: usize, s: Score) -> Self {
        Self {
            protocol: protocol.to_string(),
            rep,
            seed,
            n,
            pk_count,
            tp: s.tp,
            fp: s.fp,
            fn_: s.fn_,
            precision: s.precision,
            recall: s.recall,
            f_measure: s.f_measure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkSweepConfig {
    pub reps: usize,
    pub base_seed: u64,
    /// Largest number of prior pairs; rows are emitted for 0..=max_pk.
    pub max_pk: usize,
    pub alpha: f64,
    pub max_subset: usize,
    /// Generator settings; its `seed` is replaced by `base_seed + rep`.
    pub scm: ScmConfig,
}

impl Default for PkSweepConfig {
    fn default() -> Self {
        Self { reps: 20, base_seed: 0, max_pk: 4, alpha: 0.01, max_subset: 2, scm: ScmConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsSweepConfig {
    pub reps: usize,
    pub base_seed: u64,
    pub sample_sizes: Vec<usize>,
    pub alpha: f64,
    pub max_subset: usize,
    /// Generator settings; `n_samples` and `seed` are set per row. Its
    /// `max_lag` is also the embedding depth.
    pub ts: TsScmConfig,
}

impl Default for TsSweepConfig {
    fn default() -> Self {
        Self {
            reps: 20,
            base_seed: 0,
            sample_sizes: vec![200, 2000],
            alpha: 0.01,
            max_subset: 2,
            ts: TsScmConfig::default(),
        }
    }
}

/// Thread pool honoring `CAMUV_THREADS` (unset or 0 means rayon's default).
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidInput(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))
}

/// The prior-knowledge candidates of one repetition: the first `k` true
/// direct edges after a seed-determined shuffle.
pub fn pk_candidates(directed: &[(String, String)], k: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut edges = directed.to_vec();
    edges.shuffle(&mut rng);
    edges.truncate(k);
    edges
}

fn pk_rep(cfg: &PkSweepConfig, rep: usize) -> Result<Vec<BenchRow>> {
    let seed = cfg.base_seed + rep as u64;
    let scm = ScmConfig { seed, ..cfg.scm.clone() };
    let (data, truth) = gen_camuv_instance(&scm)?;
    if truth.directed.len() < cfg.max_pk {
        return Err(Error::InfeasibleConfig(format!(
            "{} prior pairs requested but the instance has {} direct edges",
            cfg.max_pk,
            truth.directed.len()
        )));
    }
    let picked = pk_candidates(&truth.directed, cfg.max_pk, seed);
    // Both orientations of every candidate pair are left out of the score.
    let excluded: BTreeSet<(String, String)> = picked
        .iter()
        .flat_map(|(a, b)| [(a.clone(), b.clone()), (b.clone(), a.clone())])
        .collect();
    let mut rows = Vec::with_capacity(cfg.max_pk + 1);
    for k in 0..=cfg.max_pk {
        // A known edge a -> b means b cannot cause a.
        let forbidden: Vec<(String, String)> = picked[..k].iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        let prior = PriorKnowledge::from_pairs(data.names(), &forbidden)?;
        let dcfg = DiscoveryConfig::new(cfg.alpha, cfg.max_subset).with_prior(prior);
        let g = discover(&data, &dcfg)?;
        let s = score_directed(&truth, &g, &excluded)?;
        log::info!("pk-sweep rep {rep} k {k}: precision {:.3} recall {:.3}", s.precision, s.recall);
        rows.push(BenchRow::new("pk-sweep", rep, seed, scm.n_samples, k, s));
    }
    Ok(rows)
}

/// One row per (repetition, k), in that order.
pub fn pk_sweep(cfg: &PkSweepConfig) -> Result<Vec<BenchRow>> {
    if cfg.reps == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    let pool = worker_pool()?;
    let per_rep: Vec<Result<Vec<BenchRow>>> = pool.install(|| (0..cfg.reps).into_par_iter().map(|rep| pk_rep(cfg, rep)).collect());
    let mut rows = Vec::with_capacity(cfg.reps * (cfg.max_pk + 1));
    for r in per_rep {
        rows.extend(r?);
    }
    Ok(rows)
}

fn ts_row(cfg: &TsSweepConfig, n: usize, rep: usize) -> Result<BenchRow> {
    let seed = cfg.base_seed + rep as u64;
    let ts = TsScmConfig { n_samples: n, seed, ..cfg.ts.clone() };
    let (data, truth) = gen_ts_instance(&ts)?;
    let dcfg = DiscoveryConfig::new(cfg.alpha, cfg.max_subset);
    let out = discover_ts_detailed(&data, ts.max_lag, &dcfg, None)?;
    let s = score_lag_graph(&truth, &out.lag_graph)?;
    log::info!("ts-sweep n {n} rep {rep}: precision {:.3} recall {:.3}", s.precision, s.recall);
    Ok(BenchRow::new("ts-sweep", rep, seed, n, 0, s))
}

/// One row per (sample size, repetition), sample sizes in the given order.
pub fn ts_sweep(cfg: &TsSweepConfig) -> Result<Vec<BenchRow>> {
    if cfg.reps == 0 {
        return Err(Error::InvalidInput("repetitions must be at least 1".into()));
    }
    if cfg.sample_sizes.is_empty() {
        return Err(Error::InvalidInput("no sample sizes given".into()));
    }
    let jobs: Vec<(usize, usize)> =
        cfg.sample_sizes.iter().flat_map(|&n| (0..cfg.reps).map(move |rep| (n, rep))).collect();
    let pool = worker_pool()?;
    let rows: Vec<Result<BenchRow>> = pool.install(|| jobs.par_iter().map(|&(n, rep)| ts_row(cfg, n, rep)).collect());
    rows.into_iter().collect()
}

pub fn write_rows_csv<W: Write>(rows: &[BenchRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows_csv<R: std::io::Read>(reader: R) -> Result<Vec<BenchRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<std::result::Result<Vec<BenchRow>, _>>()?)
}

/// Mean metrics over the rows sharing `(n, pk_count)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub pk_count: usize,
    pub rows: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

pub fn summarize(rows: &[BenchRow]) -> Vec<Summary> {
    let keys: BTreeSet<(usize, usize)> = rows.iter().map(|r| (r.n, r.pk_count)).collect();
    keys.into_iter()
        .map(|(n, pk_count)| {
            let group: Vec<&BenchRow> = rows.iter().filter(|r| r.n == n && r.pk_count == pk_count).collect();
            let m = group.len() as f64;
            let mean = |f: fn(&BenchRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / m;
            Summary {
                n,
                pk_count,
                rows: group.len(),
                precision: mean(|r| r.precision),
                recall: mean(|r| r.recall),
                f_measure: mean(|r| r.f_measure),
            }
        })
        .collect()
}

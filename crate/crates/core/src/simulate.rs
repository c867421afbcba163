//! Synthetic additive-noise structural causal models with latent variables,
//! for both i.i.d. samples and stationary time series.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{default_names, Dataset, GroundTruth};
use crate::timeseries::{LagEdge, LagNode};

/// `c1 * sin(a1 (x + b1))^3 + c2 * (logistic(a2 (x + b2)) - 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CausalFunction {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub c2: f64,
}

impl CausalFunction {
    /// Draws `a ~ U(9, 11)`, `b ~ U(-0.1, 0.1)`, `c ~ U(3, 5)`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            a1: rng.random_range(9.0..11.0),
            a2: rng.random_range(9.0..11.0),
            b1: rng.random_range(-0.1..0.1),
            b2: rng.random_range(-0.1..0.1),
            c1: rng.random_range(3.0..5.0),
            c2: rng.random_range(3.0..5.0),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let s = (self.a1 * (x + self.b1)).sin();
        s * s * s * self.c1 + (1.0 / (1.0 + (-self.a2 * (x + self.b2)).exp()) - 0.5) * self.c2
    }

    /// Upper bound on `|eval(x)|`.
    pub fn bound(&self) -> f64 {
        self.c1.abs() + 0.5 * self.c2.abs()
    }

    pub fn params_in_range(&self) -> bool {
        (9.0..11.0).contains(&self.a1)
            && (9.0..11.0).contains(&self.a2)
            && (-0.1..0.1).contains(&self.b1)
            && (-0.1..0.1).contains(&self.b2)
            && (3.0..5.0).contains(&self.c1)
            && (3.0..5.0).contains(&self.c2)
    }
}

pub fn causal_fn_eval(f: &CausalFunction, x: f64) -> f64 {
    f.eval(x)
}

/// Largest possible `|f|` over the parameter ranges (`c1 + c2 / 2` with `c <= 5`).
pub const MAX_EFFECT: f64 = 7.5;

/// Acyclic additive-noise SCM over observed nodes `0..n_observed` and latent
/// nodes appended after them.
#[derive(Debug, Clone)]
pub struct Scm {
    n_observed: usize,
    parents: Vec<Vec<(usize, CausalFunction)>>,
}

impl Scm {
    pub fn new(n_observed: usize) -> Self {
        Self { n_observed, parents: vec![Vec::new(); n_observed] }
    }

    pub fn add_latent(&mut self) -> usize {
        self.parents.push(Vec::new());
        self.parents.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize, f: CausalFunction) {
        self.parents[to].push((from, f));
    }

    pub fn n_nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn max_indegree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn topological_order(&self) -> Result<Vec<usize>> {
        let edges: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().map(move |&(from, _)| (from, to)))
            .collect();
        topological_sort(self.n_nodes(), &edges)
            .ok_or_else(|| Error::InfeasibleConfig("causal structure contains a cycle".into()))
    }

    /// Samples `n` rows of all nodes (observed first, then latent).
    pub fn sample_all<R: Rng + ?Sized>(&self, n: usize, noise_scale: f64, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let order = self.topological_order()?;
        let mut values = vec![Vec::new(); self.n_nodes()];
        for v in order {
            let mut col = Vec::with_capacity(n);
            for i in 0..n {
                let e: f64 = StandardNormal.sample(rng);
                let signal: f64 = self.parents[v].iter().map(|(p, f)| f.eval(values[*p][i])).sum();
                col.push(signal + noise_scale * e);
            }
            values[v] = col;
        }
        Ok(values)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, noise_scale: f64, rng: &mut R) -> Result<Dataset> {
        let mut all = self.sample_all(n, noise_scale, rng)?;
        all.truncate(self.n_observed);
        Dataset::from_columns(&all)
    }
}

/// Kahn's algorithm, smallest ready index first. `None` on a cycle.
fn topological_sort(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut out = vec![Vec::new(); n];
    for &(a, b) in edges {
        indeg[b] += 1;
        out[a].push(b);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }
    (order.len() == n).then_some(order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScmConfig {
    pub n_samples: usize,
    pub n_observed: usize,
    pub n_confounded_pairs: usize,
    pub n_intermediate_pairs: usize,
    pub n_direct_pairs: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for ScmConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            n_observed: 10,
            n_confounded_pairs: 4,
            n_intermediate_pairs: 2,
            n_direct_pairs: 10,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

fn check_noise(noise_scale: f64) -> Result<()> {
    if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
        return Err(Error::InfeasibleConfig(format!("noise_scale must be non-negative, got {noise_scale}")));
    }
    Ok(())
}

/// Random i.i.d. instance: disjoint confounded, intermediate and direct pairs
/// oriented along a random total order of the observed variables.
pub fn gen_camuv_instance(cfg: &ScmConfig) -> Result<(Dataset, GroundTruth)> {
    let p = cfg.n_observed;
    let budget = cfg.n_confounded_pairs + cfg.n_intermediate_pairs + cfg.n_direct_pairs;
    let available = p * p.saturating_sub(1) / 2;
    if p == 0 || budget > available {
        return Err(Error::InfeasibleConfig(format!(
            "{budget} pairs requested but only {available} distinct pairs among {p} variables"
        )));
    }
    if cfg.n_samples == 0 {
        return Err(Error::InfeasibleConfig("n_samples must be positive".into()));
    }
    check_noise(cfg.noise_scale)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut rank = vec![0usize; p];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    pairs.shuffle(&mut rng);
    let orient = |(a, b): (usize, usize)| if rank[a] < rank[b] { (a, b) } else { (b, a) };
    let confounded: Vec<_> = pairs[..cfg.n_confounded_pairs].iter().map(|&q| orient(q)).collect();
    let rest = &pairs[cfg.n_confounded_pairs..];
    let intermediate: Vec<_> = rest[..cfg.n_intermediate_pairs].iter().map(|&q| orient(q)).collect();
    let rest = &rest[cfg.n_intermediate_pairs..];
    let mut direct: Vec<_> = rest[..cfg.n_direct_pairs].iter().map(|&q| orient(q)).collect();
    direct.sort_unstable();

    let mut scm = Scm::new(p);
    for &(a, b) in &confounded {
        let u = scm.add_latent();
        scm.add_edge(u, a, CausalFunction::sample(&mut rng));
        scm.add_edge(u, b, CausalFunction::sample(&mut rng));
    }
    for &(a, b) in &intermediate {
        let u = scm.add_latent();
        scm.add_edge(a, u, CausalFunction::sample(&mut rng));
        scm.add_edge(u, b, CausalFunction::sample(&mut rng));
    }
    for &(a, b) in &direct {
        scm.add_edge(a, b, CausalFunction::sample(&mut rng));
    }
    let data = scm.sample(cfg.n_samples, cfg.noise_scale, &mut rng)?;

    let names = default_names(p);
    let named = |v: &[(usize, usize)]| -> Vec<(String, String)> {
        v.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect()
    };
    let truth = GroundTruth {
        variables: names.clone(),
        directed: named(&direct),
        confounded_pairs: named(&confounded),
        intermediate_pairs: named(&intermediate),
    };
    Ok((data, truth))
}

/// Stationary time-series SCM: every edge carries a lag and is applied at each
/// time step. Lag-0 edges must be acyclic.
#[derive(Debug, Clone)]
pub struct TsScm {
    n_observed: usize,
    parents: Vec<Vec<(usize, usize, CausalFunction)>>,
}

impl TsScm {
    pub fn new(n_observed: usize) -> Self {
        Self { n_observed, parents: vec![Vec::new(); n_observed] }
    }

    pub fn add_latent(&mut self) -> usize {
        self.parents.push(Vec::new());
        self.parents.len() - 1
    }

    /// `from` at time `t - lag` drives `to` at time `t`.
    pub fn add_edge(&mut self, from: usize, lag: usize, to: usize, f: CausalFunction) {
        self.parents[to].push((from, lag, f));
    }

    pub fn n_nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn max_indegree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn contemporaneous_order(&self) -> Option<Vec<usize>> {
        let edges: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(to, ps)| ps.iter().filter(|e| e.1 == 0).map(move |&(from, _, _)| (from, to)))
            .collect();
        topological_sort(self.n_nodes(), &edges)
    }

    /// Simulates `burn_in + n` steps from zero history and returns the last
    /// `n` steps of every node (observed first).
    pub fn simulate_all<R: Rng + ?Sized>(
        &self,
        n: usize,
        burn_in: usize,
        noise_scale: f64,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        let order = self
            .contemporaneous_order()
            .ok_or_else(|| Error::InfeasibleConfig("contemporaneous edges contain a cycle".into()))?;
        let total = burn_in + n;
        let mut values = vec![vec![0.0; total]; self.n_nodes()];
        for t in 0..total {
            for &v in &order {
                let e: f64 = StandardNormal.sample(rng);
                let mut x = noise_scale * e;
                for &(p, lag, ref f) in &self.parents[v] {
                    if t >= lag {
                        x += f.eval(values[p][t - lag]);
                    }
                }
                values[v][t] = x;
            }
        }
        Ok(values.into_iter().map(|mut s| s.split_off(burn_in)).collect())
    }

    pub fn simulate<R: Rng + ?Sized>(&self, n: usize, burn_in: usize, noise_scale: f64, rng: &mut R) -> Result<Dataset> {
        let mut all = self.simulate_all(n, burn_in, noise_scale, rng)?;
        all.truncate(self.n_observed);
        Dataset::from_columns(&all)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsScmConfig {
    pub n_samples: usize,
    pub n_observed: usize,
    pub max_lag: usize,
    pub n_confounded_pairs: usize,
    pub n_intermediate_pairs: usize,
    pub n_direct_pairs: usize,
    pub noise_scale: f64,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for TsScmConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            n_observed: 3,
            max_lag: 2,
            n_confounded_pairs: 2,
            n_intermediate_pairs: 2,
            n_direct_pairs: 5,
            noise_scale: 1.0,
            burn_in: 200,
            seed: 0,
        }
    }
}

/// Generating structure of a simulated time series, over (variable, lag) nodes
/// where lag 0 is the effect time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagGroundTruth {
    pub variables: Vec<String>,
    pub max_lag: usize,
    pub directed: Vec<LagEdge>,
    pub confounded_pairs: Vec<(LagNode, LagNode)>,
    /// Oriented `(cause side, effect side)` through a latent intermediate.
    pub intermediate_pairs: Vec<(LagNode, LagNode)>,
}

impl LagGroundTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn pair_sets_disjoint(&self) -> bool {
        let key = |a: &LagNode, b: &LagNode| if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        let mut seen = BTreeSet::new();
        self.directed
            .iter()
            .map(|e| key(&LagNode::new(&e.cause, e.lag), &LagNode::new(&e.effect, 0)))
            .chain(self.confounded_pairs.iter().map(|(a, b)| key(a, b)))
            .chain(self.intermediate_pairs.iter().map(|(a, b)| key(a, b)))
            .all(|k| seen.insert(k))
    }
}

/// Canonical window pair: `(var_a, lag_a)` and `(var_b, 0)`, oriented
/// cause-first (earlier or, for lag 0, by the contemporaneous order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct WindowPair {
    cause: usize,
    lag: usize,
    effect: usize,
}

const STRUCTURE_RETRIES: usize = 100;

/// Random time-series instance with disjoint pair sets drawn among the
/// shift-distinct pairs of the `q x (r + 1)` window.
pub fn gen_ts_instance(cfg: &TsScmConfig) -> Result<(Dataset, LagGroundTruth)> {
    let q = cfg.n_observed;
    let r = cfg.max_lag;
    if q == 0 || cfg.n_samples == 0 {
        return Err(Error::InfeasibleConfig("need at least one variable and one sample".into()));
    }
    if cfg.burn_in < r {
        return Err(Error::InfeasibleConfig(format!("burn_in {} is shorter than max_lag {r}", cfg.burn_in)));
    }
    check_noise(cfg.noise_scale)?;
    let budget = cfg.n_confounded_pairs + cfg.n_intermediate_pairs + cfg.n_direct_pairs;
    let available = q * q * r + q * (q - 1) / 2;
    if budget > available {
        return Err(Error::InfeasibleConfig(format!(
            "{budget} pairs requested but the window has only {available} distinct pairs"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..STRUCTURE_RETRIES {
        let mut contemporaneous: Vec<usize> = (0..q).collect();
        contemporaneous.shuffle(&mut rng);
        let mut rank = vec![0usize; q];
        for (k, &v) in contemporaneous.iter().enumerate() {
            rank[v] = k;
        }
        let mut pairs: Vec<WindowPair> = Vec::with_capacity(available);
        for a in 0..q {
            for b in (a + 1)..q {
                let (cause, effect) = if rank[a] < rank[b] { (a, b) } else { (b, a) };
                pairs.push(WindowPair { cause, lag: 0, effect });
            }
        }
        for lag in 1..=r {
            for cause in 0..q {
                for effect in 0..q {
                    pairs.push(WindowPair { cause, lag, effect });
                }
            }
        }
        pairs.shuffle(&mut rng);
        let confounded = pairs[..cfg.n_confounded_pairs].to_vec();
        let rest = &pairs[cfg.n_confounded_pairs..];
        let intermediate = rest[..cfg.n_intermediate_pairs].to_vec();
        let mut direct = rest[cfg.n_intermediate_pairs..][..cfg.n_direct_pairs].to_vec();
        direct.sort_by_key(|w| (w.effect, w.lag, w.cause));

        let mut scm = TsScm::new(q);
        for w in &confounded {
            let u = scm.add_latent();
            // U at time s reaches the lagged member at s and the lag-0 member at s + lag.
            scm.add_edge(u, 0, w.cause, CausalFunction::sample(&mut rng));
            scm.add_edge(u, w.lag, w.effect, CausalFunction::sample(&mut rng));
        }
        for w in &intermediate {
            let u = scm.add_latent();
            scm.add_edge(w.cause, 0, u, CausalFunction::sample(&mut rng));
            scm.add_edge(u, w.lag, w.effect, CausalFunction::sample(&mut rng));
        }
        for w in &direct {
            scm.add_edge(w.cause, w.lag, w.effect, CausalFunction::sample(&mut rng));
        }
        if scm.contemporaneous_order().is_none() {
            continue;
        }
        let data = scm.simulate(cfg.n_samples, cfg.burn_in, cfg.noise_scale, &mut rng)?;
        let names = default_names(q);
        let node = |v: usize, lag: usize| LagNode::new(&names[v], lag);
        let truth = LagGroundTruth {
            variables: names.clone(),
            max_lag: r,
            directed: direct.iter().map(|w| LagEdge::new(&names[w.cause], w.lag, &names[w.effect])).collect(),
            confounded_pairs: confounded.iter().map(|w| (node(w.cause, w.lag), node(w.effect, 0))).collect(),
            intermediate_pairs: intermediate.iter().map(|w| (node(w.cause, w.lag), node(w.effect, 0))).collect(),
        };
        return Ok((data, truth));
    }
    Err(Error::InfeasibleConfig(format!(
        "no acyclic contemporaneous structure found in {STRUCTURE_RETRIES} attempts"
    )))
}

//! Time-series discovery by lag embedding.
//!
//! A `q`-variable series is unrolled into `q * (r + 1)` columns (`X_lag0` is
//! time `t`, `X_lagℓ` is time `t - ℓ`). Discovery then runs with the prior
//! knowledge that no column can cause a column earlier in time, and the
//! window graph is folded back into lagged edges into time `t`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::discovery::{discover, DiscoveryConfig};
use crate::error::{Error, Result};
use crate::graph::{CausalGraph, Dataset, PriorKnowledge};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LagNode {
    pub variable: String,
    pub lag: usize,
}

impl LagNode {
    pub fn new(variable: &str, lag: usize) -> Self {
        Self { variable: variable.to_string(), lag }
    }
}

/// `cause` at time `t - lag` directly causes `effect` at time `t`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LagEdge {
    pub cause: String,
    pub lag: usize,
    pub effect: String,
}

impl LagEdge {
    pub fn new(cause: &str, lag: usize, effect: &str) -> Self {
        Self { cause: cause.to_string(), lag, effect: effect.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagGraph {
    pub variables: Vec<String>,
    pub max_lag: usize,
    pub edges: BTreeSet<LagEdge>,
    /// Unordered pairs stored smaller-first; at least one member has lag 0.
    pub dashed: BTreeSet<(LagNode, LagNode)>,
}

impl LagGraph {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// True when the lag-0 edges contain a directed cycle (self-loops excluded,
    /// since a lag-0 self edge cannot be emitted).
    pub fn has_contemporaneous_cycle(&self) -> bool {
        let idx = |v: &str| self.variables.iter().position(|x| x == v);
        let q = self.variables.len();
        let mut adj = vec![Vec::new(); q];
        for e in self.edges.iter().filter(|e| e.lag == 0) {
            if let (Some(a), Some(b)) = (idx(&e.cause), idx(&e.effect)) {
                adj[a].push(b);
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        fn dfs(v: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
            state[v] = 1;
            for &w in &adj[v] {
                if state[w] == 1 || (state[w] == 0 && dfs(w, adj, state)) {
                    return true;
                }
            }
            state[v] = 2;
            false
        }
        let mut state = vec![0u8; q];
        (0..q).any(|v| state[v] == 0 && dfs(v, &adj, &mut state))
    }

    /// Graphviz rendering unrolled over time slices `t, t-1, ..., t-r`.
    pub fn to_dot(&self) -> String {
        let label = |v: &str, lag: usize| {
            if lag == 0 {
                format!("{v}(t)")
            } else {
                format!("{v}(t-{lag})")
            }
        };
        let mut out = String::from("digraph lagged {\n  rankdir=LR;\n");
        for lag in (0..=self.max_lag).rev() {
            let _ = writeln!(out, "  subgraph \"cluster_lag{lag}\" {{");
            let _ = writeln!(out, "    label=\"{}\";", if lag == 0 { "t".to_string() } else { format!("t-{lag}") });
            for v in &self.variables {
                let _ = writeln!(out, "    \"{}\";", label(v, lag));
            }
            out.push_str("  }\n");
        }
        for e in &self.edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", label(&e.cause, e.lag), label(&e.effect, 0));
        }
        for (a, b) in &self.dashed {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [style=dashed, dir=none];",
                label(&a.variable, a.lag),
                label(&b.variable, b.lag)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Bookkeeping for a lag-embedded dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeEmbedding {
    pub q: usize,
    pub r: usize,
    pub variables: Vec<String>,
    pub columns: Vec<String>,
}

impl TimeEmbedding {
    pub fn new(variables: &[String], r: usize) -> Self {
        let q = variables.len();
        let columns = (0..=r)
            .flat_map(|lag| variables.iter().map(move |v| format!("{v}_lag{lag}")))
            .collect();
        Self { q, r, variables: variables.to_vec(), columns }
    }

    #[inline]
    pub fn column_of(&self, var: usize, lag: usize) -> usize {
        lag * self.q + var
    }

    /// `(variable, lag)` of an embedded column.
    #[inline]
    pub fn split(&self, column: usize) -> (usize, usize) {
        (column % self.q, column / self.q)
    }

    pub fn node(&self, column: usize) -> LagNode {
        let (v, lag) = self.split(column);
        LagNode::new(&self.variables[v], lag)
    }
}

/// Unrolls `data` into `n - r` rows of lag-0..r copies of every variable.
pub fn embed(data: &Dataset, r: usize) -> Result<(Dataset, TimeEmbedding)> {
    let n = data.n_samples();
    if r == 0 {
        return Err(Error::InvalidInput("max lag must be at least 1".into()));
    }
    if n <= r {
        return Err(Error::InvalidInput(format!("series of length {n} is too short for max lag {r}")));
    }
    let emb = TimeEmbedding::new(data.names(), r);
    let src = data.values();
    let rows = n - r;
    let values = Array2::from_shape_fn((rows, emb.q * (r + 1)), |(s, c)| {
        let (var, lag) = emb.split(c);
        src[[s + r - lag, var]]
    });
    let out = Dataset::new(emb.columns.clone(), values)?;
    Ok((out, emb))
}

/// Recovers original rows `r..n` from the lag-0 block of an embedded dataset.
pub fn unembed(embedded: &Dataset, emb: &TimeEmbedding) -> Result<Dataset> {
    let order: Vec<usize> = (0..emb.q).map(|v| emb.column_of(v, 0)).collect();
    let lag0 = embedded.select_columns(&order)?;
    Dataset::new(emb.variables.clone(), lag0.values().clone())
}

/// Forbids every column from causing a column strictly earlier in time.
pub fn build_time_prior(emb: &TimeEmbedding) -> PriorKnowledge {
    let mut pairs = Vec::with_capacity(emb.q * emb.q * emb.r * (emb.r + 1) / 2);
    for cause_lag in 0..=emb.r {
        for effect_lag in (cause_lag + 1)..=emb.r {
            for cv in 0..emb.q {
                for ev in 0..emb.q {
                    pairs.push((emb.column_of(cv, cause_lag), emb.column_of(ev, effect_lag)));
                }
            }
        }
    }
    PriorKnowledge::from_indices(&emb.columns, pairs).expect("time prior indices are in range")
}

/// Keeps edges into lag-0 columns and dashed pairs touching lag 0.
pub fn collapse_to_lag_graph(window: &CausalGraph, emb: &TimeEmbedding) -> LagGraph {
    let mut edges = BTreeSet::new();
    for &(parent, child) in &window.directed {
        let (cv, cl) = emb.split(parent);
        let (ev, el) = emb.split(child);
        if el == 0 && cl >= el {
            edges.insert(LagEdge::new(&emb.variables[cv], cl, &emb.variables[ev]));
        }
    }
    let mut dashed = BTreeSet::new();
    for &(a, b) in &window.dashed {
        let (na, nb) = (emb.node(a), emb.node(b));
        if na.lag == 0 || nb.lag == 0 {
            dashed.insert(if na <= nb { (na, nb) } else { (nb, na) });
        }
    }
    LagGraph { variables: emb.variables.clone(), max_lag: emb.r, edges, dashed }
}

/// Directed window edges between two lagged columns; these are shifted copies
/// under stationarity and are not promoted to lag edges.
pub fn dropped_lagged_edges(window: &CausalGraph, emb: &TimeEmbedding) -> Vec<(LagNode, LagNode)> {
    window
        .directed
        .iter()
        .filter(|&&(_, child)| emb.split(child).1 > 0)
        .map(|&(p, c)| (emb.node(p), emb.node(c)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TsDiscovery {
    pub lag_graph: LagGraph,
    pub window_graph: CausalGraph,
    pub embedding: TimeEmbedding,
    pub dropped_edges: Vec<(LagNode, LagNode)>,
}

/// Embeds, discovers under time priority (plus `extra_prior`, expressed over
/// embedded column names), and folds the result into a lag graph.
pub fn discover_ts_detailed(
    data: &Dataset,
    r: usize,
    cfg: &DiscoveryConfig,
    extra_prior: Option<&PriorKnowledge>,
) -> Result<TsDiscovery> {
    let (embedded, emb) = embed(data, r)?;
    let mut prior = build_time_prior(&emb);
    if let Some(extra) = extra_prior {
        prior = prior.union(extra)?;
    }
    let cfg = DiscoveryConfig { prior: Some(prior), ..cfg.clone() };
    let window = discover(&embedded, &cfg)?;
    let lag_graph = collapse_to_lag_graph(&window, &emb);
    let dropped_edges = dropped_lagged_edges(&window, &emb);
    if !dropped_edges.is_empty() {
        log::info!("{} window edges between lagged copies were not promoted", dropped_edges.len());
    }
    if lag_graph.has_contemporaneous_cycle() {
        log::warn!("contemporaneous edges in the lag graph form a cycle");
    }
    if let Some(e) = lag_graph.edges.iter().find(|e| e.lag > r) {
        return Err(Error::Invariant(format!("edge {} -> {} exceeds max lag", e.cause, e.effect)));
    }
    Ok(TsDiscovery { lag_graph, window_graph: window, embedding: emb, dropped_edges })
}

pub fn discover_ts(
    data: &Dataset,
    r: usize,
    alpha: f64,
    max_subset: usize,
    extra_prior: Option<&PriorKnowledge>,
) -> Result<LagGraph> {
    let cfg = DiscoveryConfig::new(alpha, max_subset);
    Ok(discover_ts_detailed(data, r, &cfg, extra_prior)?.lag_graph)
}

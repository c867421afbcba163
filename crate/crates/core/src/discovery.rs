//! Parent-set discovery for causal additive models with unobserved variables,
//! optionally constrained by forbidden cause/effect pairs.
//!
//! Phase 1 grows candidate parent sets by finding, in each variable subset,
//! the member whose regression residual is most independent of the others'.
//! Phase 2 drops candidates whose removal leaves the residual independent.
//! Finally, non-adjacent pairs whose residuals remain dependent are reported
//! as dashed pairs (an unobserved causal or backdoor path).

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gam::{check_columns, fit_gam_smoothers, GamOptions, Smoother};
use crate::graph::{validate_graph, CausalGraph, Dataset, PriorKnowledge};
use crate::kernel::p_hsic_set;

#[derive(Debug, Clone)]
pub struct DiscoveryConfig {
    /// Significance level of the independence tests.
    pub alpha: f64,
    /// Largest variable subset examined in phase 1 (`d`).
    pub max_subset: usize,
    /// Forbidden cause/effect pairs; `None` behaves like an empty list.
    pub prior: Option<PriorKnowledge>,
    /// Memoize GAM residuals and p-values. Has no effect on results.
    pub memoize: bool,
    pub gam: GamOptions,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self { alpha: 0.01, max_subset: 2, prior: None, memoize: true, gam: GamOptions::default() }
    }
}

impl DiscoveryConfig {
    pub fn new(alpha: f64, max_subset: usize) -> Self {
        Self { alpha, max_subset, ..Default::default() }
    }

    pub fn with_prior(mut self, prior: PriorKnowledge) -> Self {
        self.prior = Some(prior);
        self
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        let p = data.n_vars();
        if p < 2 {
            return Err(Error::InvalidInput(format!("discovery needs at least 2 variables, got {p}")));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.max_subset < 2 || self.max_subset > p {
            return Err(Error::InvalidInput(format!(
                "max subset size must lie in [2, {p}], got {}",
                self.max_subset
            )));
        }
        if let Some(prior) = &self.prior {
            if prior.variables() != data.names() {
                return Err(Error::InvalidInput(
                    "prior knowledge refers to a different variable set than the data".into(),
                ));
            }
        }
        // Each spline term gets at most n/4 basis functions.
        let per_term = self.gam.n_basis.min(data.n_samples() / 4);
        if per_term < 10 {
            log::warn!(
                "{} samples leaves {} spline basis functions per term; fits will be coarse",
                data.n_samples(),
                per_term
            );
        }
        Ok(())
    }
}

/// Which cause/effect pairs phase 1 must not consider.
pub trait CauseFilter {
    fn blocks(&self, cause: usize, effect: usize) -> bool;
}

/// No restriction: the plain algorithm without prior knowledge.
pub struct Unconstrained;

impl CauseFilter for Unconstrained {
    #[inline]
    fn blocks(&self, _cause: usize, _effect: usize) -> bool {
        false
    }
}

impl CauseFilter for PriorKnowledge {
    #[inline]
    fn blocks(&self, cause: usize, effect: usize) -> bool {
        self.forbids(cause, effect)
    }
}

/// Phase-1 output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateState {
    /// Candidate parents per variable, in insertion order.
    pub candidates: Vec<Vec<usize>>,
    /// Subset size at termination (`max_subset + 1`).
    pub subset_size: usize,
    /// Whether the final sweep changed anything (always false on return).
    pub changed: bool,
    /// Every accepted update as `(sink, newly added parents)`, in order.
    pub additions: Vec<(usize, Vec<usize>)>,
    pub resets: usize,
}

type ResidualKey = (usize, Vec<usize>);

struct Engine<'a> {
    data: &'a Dataset,
    alpha: f64,
    gam: GamOptions,
    memoize: bool,
    smoothers: Vec<Option<Arc<Smoother>>>,
    residuals: HashMap<ResidualKey, Arc<Vec<f64>>>,
    pvalues: HashMap<(ResidualKey, Vec<ResidualKey>), f64>,
    tests: usize,
}

fn key(target: usize, set: impl IntoIterator<Item = usize>) -> ResidualKey {
    let mut s: Vec<usize> = set.into_iter().filter(|&j| j != target).collect();
    s.sort_unstable();
    s.dedup();
    (target, s)
}

impl<'a> Engine<'a> {
    fn new(data: &'a Dataset, cfg: &DiscoveryConfig) -> Self {
        Self {
            data,
            alpha: cfg.alpha,
            gam: cfg.gam,
            memoize: cfg.memoize,
            smoothers: vec![None; data.n_vars()],
            residuals: HashMap::new(),
            pvalues: HashMap::new(),
            tests: 0,
        }
    }

    fn residual(&mut self, k: &ResidualKey) -> Result<Arc<Vec<f64>>> {
        if let Some(r) = self.residuals.get(k) {
            return Ok(Arc::clone(r));
        }
        let ids = check_columns(self.data, k.0, &k.1)?;
        let smoothers = ids.iter().map(|&j| self.smoother(j)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Smoother> = smoothers.iter().map(|s| s.as_ref()).collect();
        let mut fit = fit_gam_smoothers(&self.data.column_vec(k.0), &refs, &self.gam)?;
        fit.predictor_ids = ids;
        fit.target = Some(k.0);
        let r = Arc::new(fit.residual(self.data)?);
        if self.memoize {
            self.residuals.insert(k.clone(), Arc::clone(&r));
        }
        Ok(r)
    }

    fn smoother(&mut self, j: usize) -> Result<Arc<Smoother>> {
        if let Some(s) = &self.smoothers[j] {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(Smoother::new(&self.data.column_vec(j), &self.gam)?);
        if self.memoize {
            self.smoothers[j] = Some(Arc::clone(&s));
        }
        Ok(s)
    }

    /// p-value of the joint test between residual `a` and the residual set `bs`.
    fn p_hsic(&mut self, a: ResidualKey, bs: Vec<ResidualKey>) -> Result<f64> {
        let cache_key = (a, bs);
        if let Some(&p) = self.pvalues.get(&cache_key) {
            return Ok(p);
        }
        let ra = self.residual(&cache_key.0)?;
        let rbs = cache_key.1.iter().map(|k| self.residual(k)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = rbs.iter().map(|r| r.as_slice()).collect();
        let p = p_hsic_set(&ra, &refs)?;
        self.tests += 1;
        if self.memoize {
            self.pvalues.insert(cache_key, p);
        }
        Ok(p)
    }

    /// Independence of `X_i - G(M_i ∪ K \ {X_i})` from `{X_j - G(M_j) : X_j ∈ K \ {X_i}}`.
    fn sink_independence(&mut self, i: usize, subset: &[usize], m: &[Vec<usize>]) -> Result<f64> {
        let a = key(i, m[i].iter().copied().chain(subset.iter().copied()));
        let bs = subset.iter().filter(|&&j| j != i).map(|&j| key(j, m[j].iter().copied())).collect();
        self.p_hsic(a, bs)
    }

    fn phase1<F: CauseFilter + ?Sized>(&mut self, filter: &F, max_subset: usize) -> Result<CandidateState> {
        let p = self.data.n_vars();
        let mut m: Vec<Vec<usize>> = vec![Vec::new(); p];
        let mut additions = Vec::new();
        let limit = 10 * p * (1usize << max_subset.min(20));
        let mut resets = 0usize;
        let mut t = 2;
        while t <= max_subset {
            let mut changed = false;
            for subset in Combinations::new(p, t) {
                let mut max_independence = 0.0;
                let mut sink = None;
                for &i in &subset {
                    if subset.iter().any(|&j| j != i && filter.blocks(j, i)) {
                        continue;
                    }
                    let indep = self.sink_independence(i, &subset, &m)?;
                    if max_independence < indep {
                        max_independence = indep;
                        sink = Some(i);
                    }
                }
                let Some(b) = sink else { continue };
                let e = self.sink_independence(b, &subset, &m)?;
                let mut h = f64::NEG_INFINITY;
                for &j in subset.iter().filter(|&&j| j != b) {
                    let pv = self.p_hsic(key(b, m[b].iter().copied()), vec![key(j, m[j].iter().copied())])?;
                    h = h.max(pv);
                }
                if self.alpha < e && self.alpha > h {
                    let new: Vec<usize> =
                        subset.iter().copied().filter(|&j| j != b && !m[b].contains(&j)).collect();
                    if !new.is_empty() {
                        m[b].extend(&new);
                        additions.push((b, new));
                        changed = true;
                    }
                }
            }
            if changed {
                resets += 1;
                if resets > limit {
                    return Err(Error::Watchdog { resets, limit });
                }
                t = 2;
            } else {
                t += 1;
            }
        }
        Ok(CandidateState { candidates: m, subset_size: t, changed: false, additions, resets })
    }

    fn phase2(&mut self, state: &CandidateState) -> Result<Vec<Vec<usize>>> {
        let mut m = state.candidates.clone();
        for i in 0..m.len() {
            let snapshot = m[i].clone();
            for j in snapshot {
                let a = key(i, m[i].iter().copied().filter(|&x| x != j));
                let b = key(j, m[j].iter().copied());
                if self.alpha < self.p_hsic(a, vec![b])? {
                    m[i].retain(|&x| x != j);
                }
            }
        }
        Ok(m)
    }

    fn dashed(&mut self, parents: &[Vec<usize>]) -> Result<BTreeSet<(usize, usize)>> {
        let p = parents.len();
        let mut out = BTreeSet::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if parents[i].contains(&j) || parents[j].contains(&i) {
                    continue;
                }
                let a = key(i, parents[i].iter().copied());
                let b = key(j, parents[j].iter().copied());
                if self.p_hsic(a, vec![b])? <= self.alpha {
                    out.insert((i, j));
                }
            }
        }
        Ok(out)
    }
}

/// Lexicographic `t`-subsets of `0..p`.
struct Combinations {
    p: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(p: usize, t: usize) -> Self {
        Self { p, current: (t <= p && t > 0).then(|| (0..t).collect()) }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let t = out.len();
        let mut next = out.clone();
        let mut i = t;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.p - t + i {
                next[i] += 1;
                for k in (i + 1)..t {
                    next[k] = next[k - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

fn run<F: CauseFilter + ?Sized>(data: &Dataset, cfg: &DiscoveryConfig, filter: &F) -> Result<CausalGraph> {
    cfg.validate(data)?;
    let mut engine = Engine::new(data, cfg);
    let state = engine.phase1(filter, cfg.max_subset)?;
    let parents = engine.phase2(&state)?;
    let dashed = engine.dashed(&parents)?;
    log::debug!("discovery ran {} independence tests", engine.tests);
    let graph = CausalGraph::from_parents(data.names(), &parents, dashed);
    if let Err(v) = validate_graph(&graph) {
        let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
        return Err(Error::Invariant(msg.join("; ")));
    }
    if let Some(prior) = &cfg.prior {
        if let Some(&(a, b)) = graph.directed.iter().find(|&&(a, b)| prior.forbids(a, b)) {
            return Err(Error::Invariant(format!(
                "emitted forbidden edge {} -> {}",
                graph.variables[a], graph.variables[b]
            )));
        }
    }
    Ok(graph)
}

/// Full discovery: candidate extraction, pruning and dashed-pair detection.
pub fn discover(data: &Dataset, cfg: &DiscoveryConfig) -> Result<CausalGraph> {
    match &cfg.prior {
        Some(prior) => run(data, cfg, prior),
        None => run(data, cfg, &Unconstrained),
    }
}

/// Discovery without any prior-knowledge check, ignoring `cfg.prior`.
pub fn discover_unconstrained(data: &Dataset, cfg: &DiscoveryConfig) -> Result<CausalGraph> {
    let cfg = DiscoveryConfig { prior: None, ..cfg.clone() };
    run(data, &cfg, &Unconstrained)
}

pub fn phase1_candidates(data: &Dataset, cfg: &DiscoveryConfig) -> Result<CandidateState> {
    cfg.validate(data)?;
    let mut engine = Engine::new(data, cfg);
    match &cfg.prior {
        Some(prior) => engine.phase1(prior, cfg.max_subset),
        None => engine.phase1(&Unconstrained, cfg.max_subset),
    }
}

pub fn phase2_prune(data: &Dataset, state: &CandidateState, cfg: &DiscoveryConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate(data)?;
    if state.candidates.len() != data.n_vars() {
        return Err(Error::InvalidInput("candidate state does not match the dataset".into()));
    }
    Engine::new(data, cfg).phase2(state)
}

pub fn find_dashed_edges(
    data: &Dataset,
    parents: &[Vec<usize>],
    cfg: &DiscoveryConfig,
) -> Result<BTreeSet<(usize, usize)>> {
    cfg.validate(data)?;
    if parents.len() != data.n_vars() {
        return Err(Error::InvalidInput("parent sets do not match the dataset".into()));
    }
    Engine::new(data, cfg).dashed(parents)
}

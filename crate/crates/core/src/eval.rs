//! Precision / recall / F-measure of estimated directed edges.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CausalGraph, GroundTruth};
use crate::simulate::LagGroundTruth;
use crate::timeseries::{LagEdge, LagGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Score {
    /// Ratios from counts; empty denominators give 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { tp, fp, fn_, precision, recall, f_measure }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn count<T: Eq + std::hash::Hash + Ord>(truth: &BTreeSet<T>, est: &BTreeSet<T>) -> Score {
    let tp = est.intersection(truth).count();
    Score::from_counts(tp, est.len() - tp, truth.len() - tp)
}

/// Scores directed edges by position and direction. Ordered pairs in
/// `excluded` are ignored on both the truth and the estimate side.
pub fn score_directed(
    truth: &GroundTruth,
    est: &CausalGraph,
    excluded: &BTreeSet<(String, String)>,
) -> Result<Score> {
    let known: HashSet<&str> = truth.variables.iter().map(String::as_str).collect();
    let check = |v: &str| {
        if known.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownVariable(v.to_string()))
        }
    };
    for v in &est.variables {
        check(v)?;
    }
    for (a, b) in truth.directed.iter().chain(excluded) {
        check(a)?;
        check(b)?;
    }
    let truth_set: BTreeSet<(String, String)> =
        truth.directed.iter().filter(|e| !excluded.contains(*e)).cloned().collect();
    let est_set: BTreeSet<(String, String)> =
        est.edge_names().into_iter().filter(|e| !excluded.contains(e)).collect();
    Ok(count(&truth_set, &est_set))
}

/// Scores lag edges by exact `(cause, lag, effect)` match.
pub fn score_lag_graph(truth: &LagGroundTruth, est: &LagGraph) -> Result<Score> {
    let known: HashSet<&str> = truth.variables.iter().map(String::as_str).collect();
    for e in truth.directed.iter().chain(&est.edges) {
        for v in [&e.cause, &e.effect] {
            if !known.contains(v.as_str()) {
                return Err(Error::UnknownVariable(v.clone()));
            }
        }
    }
    let truth_set: BTreeSet<LagEdge> = truth.directed.iter().cloned().collect();
    Ok(count(&truth_set, &est.edges))
}

/// Diagnostic: dashed pairs against confounded and intermediate truth pairs.
pub fn score_dashed(truth: &GroundTruth, est: &CausalGraph) -> Score {
    let norm = |a: &str, b: &str| if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
    let truth_set: BTreeSet<(String, String)> = truth
        .confounded_pairs
        .iter()
        .chain(&truth.intermediate_pairs)
        .map(|(a, b)| norm(a, b))
        .collect();
    let est_set: BTreeSet<(String, String)> = est
        .dashed
        .iter()
        .map(|&(a, b)| norm(&est.variables[a], &est.variables[b]))
        .collect();
    count(&truth_set, &est_set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::default_names;

    fn truth_with(edges: &[(usize, usize)], p: usize) -> GroundTruth {
        let names = default_names(p);
        GroundTruth {
            variables: names.clone(),
            directed: edges.iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect(),
            confounded_pairs: vec![],
            intermediate_pairs: vec![],
        }
    }

    fn graph_with(edges: &[(usize, usize)], p: usize) -> CausalGraph {
        let mut g = CausalGraph::empty(&default_names(p));
        g.directed.extend(edges.iter().copied());
        g
    }

    fn ten_edges() -> Vec<(usize, usize)> {
        vec![(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 6), (5, 7), (6, 8), (7, 9), (8, 9)]
    }

    #[test]
    fn perfect_and_empty_estimates() {
        let t = truth_with(&ten_edges(), 10);
        let s = score_directed(&t, &graph_with(&ten_edges(), 10), &BTreeSet::new()).unwrap();
        assert_eq!((s.precision, s.recall, s.f_measure), (1.0, 1.0, 1.0));
        let s = score_directed(&t, &graph_with(&[], 10), &BTreeSet::new()).unwrap();
        assert_eq!((s.precision, s.recall, s.f_measure), (0.0, 0.0, 0.0));
        assert_eq!(s.fn_, 10);
    }

    #[test]
    fn exclusion_micro_case() {
        let truth_edges = ten_edges();
        let t = truth_with(&truth_edges, 10);
        // Six correct (the first four of which are excluded) plus two wrong.
        let mut est = truth_edges[..6].to_vec();
        est.extend([(9, 0), (5, 2)]);
        let names = default_names(10);
        let excluded: BTreeSet<(String, String)> =
            truth_edges[..4].iter().map(|&(a, b)| (names[a].clone(), names[b].clone())).collect();
        let s = score_directed(&t, &graph_with(&est, 10), &excluded).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (2, 2, 4));
        assert_eq!(s.precision, 0.5);
        approx::assert_abs_diff_eq!(s.recall, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn excluding_everything_zeroes_counts() {
        let t = truth_with(&ten_edges(), 10);
        let names = default_names(10);
        let all: BTreeSet<(String, String)> = (0..10)
            .flat_map(|a| (0..10).map(move |b| (a, b)))
            .map(|(a, b)| (names[a].clone(), names[b].clone()))
            .collect();
        let s = score_directed(&t, &graph_with(&[(1, 0), (0, 1)], 10), &all).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (0, 0, 0));
        assert_eq!(s.f_measure, 0.0);
    }

    #[test]
    fn unknown_variables_are_errors() {
        let t = truth_with(&[(0, 1)], 2);
        let g = CausalGraph::empty(&["X1".to_string(), "Q".to_string()]);
        assert!(score_directed(&t, &g, &BTreeSet::new()).is_err());
        let ex: BTreeSet<_> = [("X1".to_string(), "Z".to_string())].into_iter().collect();
        assert!(score_directed(&t, &graph_with(&[], 2), &ex).is_err());
    }

    fn lag_truth() -> LagGroundTruth {
        LagGroundTruth {
            variables: default_names(3),
            max_lag: 2,
            directed: vec![
                LagEdge::new("X1", 1, "X2"),
                LagEdge::new("X2", 0, "X3"),
                LagEdge::new("X3", 2, "X1"),
                LagEdge::new("X1", 1, "X1"),
                LagEdge::new("X2", 2, "X2"),
            ],
            confounded_pairs: vec![],
            intermediate_pairs: vec![],
        }
    }

    fn lag_graph(edges: &[LagEdge]) -> LagGraph {
        LagGraph {
            variables: default_names(3),
            max_lag: 2,
            edges: edges.iter().cloned().collect(),
            dashed: BTreeSet::new(),
        }
    }

    #[test]
    fn lag_scores() {
        let t = lag_truth();
        assert_eq!(score_lag_graph(&t, &lag_graph(&t.directed)).unwrap().f_measure, 1.0);
        let s = score_lag_graph(&t, &lag_graph(&[LagEdge::new("X1", 2, "X2")])).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (0, 1, 5));
        let s = score_lag_graph(&t, &lag_graph(&[])).unwrap();
        assert_eq!(s.fn_, 5);
        assert!(score_lag_graph(&t, &lag_graph(&[LagEdge::new("Y", 1, "X1")])).is_err());
    }

    #[test]
    fn dashed_diagnostic() {
        let mut t = truth_with(&[], 3);
        t.confounded_pairs = vec![("X2".into(), "X1".into())];
        let mut g = graph_with(&[], 3);
        g.dashed.insert((0, 1));
        g.dashed.insert((1, 2));
        let s = score_dashed(&t, &g);
        assert_eq!((s.tp, s.fp, s.fn_), (1, 1, 0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ratios_are_bounded_and_order_free(
                truth in proptest::collection::btree_set((0usize..6, 0usize..6), 0..12),
                est in proptest::collection::vec((0usize..6, 0usize..6), 0..12),
            ) {
                let truth: Vec<_> = truth.into_iter().filter(|(a, b)| a != b).collect();
                let est: Vec<_> = est.into_iter().filter(|(a, b)| a != b).collect();
                let t = truth_with(&truth, 6);
                let s = score_directed(&t, &graph_with(&est, 6), &BTreeSet::new()).unwrap();
                for v in [s.precision, s.recall, s.f_measure] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert_eq!(s.f_measure == 0.0, s.tp == 0);
                let mut rev = est.clone();
                rev.reverse();
                let s2 = score_directed(&t, &graph_with(&rev, 6), &BTreeSet::new()).unwrap();
                prop_assert_eq!(s, s2);
            }
        }
    }
}

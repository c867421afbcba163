//! Datasets, prior knowledge and causal graphs shared by discovery, simulation and scoring.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-named sample matrix: `n` rows (samples) by `p` columns (variables).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    values: Array2<f64>,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(names: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset must be non-empty, got {n} rows x {p} columns"
            )));
        }
        if names.len() != p {
            return Err(Error::InvalidInput(format!(
                "{} column names for {p} columns",
                names.len()
            )));
        }
        let mut index = HashMap::with_capacity(p);
        for (j, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidInput(format!("column {j} has an empty name")));
            }
            if index.insert(name.clone(), j).is_some() {
                return Err(Error::InvalidInput(format!("duplicate column name '{name}'")));
            }
        }
        for (j, col) in values.columns().into_iter().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(names[j].clone()));
            }
        }
        Ok(Self { names, values, index })
    }

    /// Builds a dataset from columns, naming them `X1..Xp`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let names = default_names(columns.len());
        Self::from_named_columns(names, columns)
    }

    pub fn from_named_columns(names: Vec<String>, columns: &[Vec<f64>]) -> Result<Self> {
        let p = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        let values = Array2::from_shape_fn((n, p), |(i, j)| columns[j][i]);
        Self::new(names, values)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.column(j)
    }

    pub fn column_vec(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Returns a dataset with the columns reordered as `order[k]` -> new column `k`.
    pub fn select_columns(&self, order: &[usize]) -> Result<Self> {
        let names = order.iter().map(|&j| self.names[j].clone()).collect();
        let values = self.values.select(ndarray::Axis(1), order);
        Self::new(names, values)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if names.is_empty() || (names.len() == 1 && names[0].is_empty()) {
            return Err(Error::InvalidInput("CSV has no header row".into()));
        }
        let p = names.len();
        let mut flat = Vec::new();
        let mut rows = 0usize;
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != p {
                return Err(Error::InvalidInput(format!(
                    "CSV row {} has {} fields, header has {p}",
                    line + 2,
                    record.len()
                )));
            }
            for (j, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::InvalidInput(format!(
                        "CSV row {}, column '{}': cannot parse '{field}' as a number",
                        line + 2,
                        names[j]
                    ))
                })?;
                flat.push(v);
            }
            rows += 1;
        }
        let values = Array2::from_shape_vec((rows, p), flat)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        Self::new(names, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        let mut buf = Vec::with_capacity(self.n_vars());
        for row in self.values.rows() {
            buf.clear();
            buf.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&buf)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("X{i}")).collect()
}

/// Forbidden cause/effect pairs: `(a, b)` means `a` is neither a direct nor an
/// indirect cause of `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorKnowledge {
    variables: Vec<String>,
    forbidden: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
struct PriorJson {
    forbidden: Vec<(String, String)>,
}

impl PriorKnowledge {
    pub fn empty(variables: &[String]) -> Self {
        Self { variables: variables.to_vec(), forbidden: BTreeSet::new() }
    }

    pub fn from_pairs<S: AsRef<str>>(variables: &[String], pairs: &[(S, S)]) -> Result<Self> {
        let mut pk = Self::empty(variables);
        for (a, b) in pairs {
            pk.forbid(a.as_ref(), b.as_ref())?;
        }
        Ok(pk)
    }

    pub fn from_indices(variables: &[String], pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut pk = Self::empty(variables);
        for (a, b) in pairs {
            if a >= variables.len() || b >= variables.len() {
                return Err(Error::InvalidInput(format!("prior index ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidInput(format!(
                    "prior pair ({0}, {0}) relates a variable to itself",
                    variables[a]
                )));
            }
            pk.forbidden.insert((a, b));
        }
        Ok(pk)
    }

    pub fn forbid(&mut self, cause: &str, effect: &str) -> Result<()> {
        let a = self.resolve(cause)?;
        let b = self.resolve(effect)?;
        if a == b {
            return Err(Error::InvalidInput(format!(
                "prior pair ({cause}, {effect}) relates a variable to itself"
            )));
        }
        self.forbidden.insert((a, b));
        Ok(())
    }

    fn resolve(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// True iff `(cause, effect)` is a forbidden pair.
    pub fn is_forbidden(&self, cause: &str, effect: &str) -> Result<bool> {
        let a = self.resolve(cause)?;
        let b = self.resolve(effect)?;
        Ok(self.forbids(a, b))
    }

    #[inline]
    pub fn forbids(&self, cause: usize, effect: usize) -> bool {
        self.forbidden.contains(&(cause, effect))
    }

    pub fn len(&self) -> usize {
        self.forbidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forbidden.is_empty()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.forbidden.iter().copied()
    }

    pub fn union(&self, other: &PriorKnowledge) -> Result<Self> {
        if self.variables != other.variables {
            return Err(Error::InvalidInput(
                "cannot merge prior knowledge over different variable sets".into(),
            ));
        }
        let mut out = self.clone();
        out.forbidden.extend(other.forbidden.iter().copied());
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PriorJson {
            forbidden: self
                .forbidden
                .iter()
                .map(|&(a, b)| (self.variables[a].clone(), self.variables[b].clone()))
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str, variables: &[String]) -> Result<Self> {
        let doc: PriorJson = serde_json::from_str(json)?;
        Self::from_pairs(variables, &doc.forbidden)
    }
}

/// Discovery output: directed edges (parent -> child) and unordered dashed pairs
/// marking an unobserved causal path or unobserved backdoor path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    pub variables: Vec<String>,
    /// `(parent, child)` index pairs.
    pub directed: BTreeSet<(usize, usize)>,
    /// Unordered pairs stored as `(min, max)`.
    pub dashed: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphViolation {
    SelfParent(String),
    EdgeDashedOverlap(String, String),
    DashedSelfLoop(String),
    DashedNotNormalized(String, String),
    IndexOutOfRange(usize),
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphViolation::SelfParent(v) => write!(f, "self-parent: {v}"),
            GraphViolation::EdgeDashedOverlap(a, b) => write!(f, "edge/dashed overlap: {a}, {b}"),
            GraphViolation::DashedSelfLoop(v) => write!(f, "dashed self-loop: {v}"),
            GraphViolation::DashedNotNormalized(a, b) => {
                write!(f, "dashed pair not normalized: {a}, {b}")
            }
            GraphViolation::IndexOutOfRange(i) => write!(f, "variable index {i} out of range"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphJson {
    variables: Vec<String>,
    directed: Vec<(String, String)>,
    dashed: Vec<(String, String)>,
}

impl CausalGraph {
    pub fn empty(variables: &[String]) -> Self {
        Self { variables: variables.to_vec(), directed: BTreeSet::new(), dashed: BTreeSet::new() }
    }

    /// Builds a graph from a parent list per variable plus dashed pairs.
    pub fn from_parents(
        variables: &[String],
        parents: &[Vec<usize>],
        dashed: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut g = Self::empty(variables);
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                g.directed.insert((p, child));
            }
        }
        for (a, b) in dashed {
            g.dashed.insert((a.min(b), a.max(b)));
        }
        g
    }

    pub fn parents_of(&self, child: usize) -> Vec<usize> {
        self.directed.iter().filter(|&&(_, c)| c == child).map(|&(p, _)| p).collect()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.directed.contains(&(parent, child))
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn has_dashed(&self, a: usize, b: usize) -> bool {
        self.dashed.contains(&(a.min(b), a.max(b)))
    }

    pub fn edge_names(&self) -> Vec<(String, String)> {
        self.directed
            .iter()
            .map(|&(a, b)| (self.variables[a].clone(), self.variables[b].clone()))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let name = |i: usize| self.variables[i].clone();
        let doc = GraphJson {
            variables: self.variables.clone(),
            directed: self.directed.iter().map(|&(a, b)| (name(a), name(b))).collect(),
            dashed: self.dashed.iter().map(|&(a, b)| (name(a), name(b))).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: GraphJson = serde_json::from_str(json)?;
        let idx = |name: &str| {
            doc.variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))
        };
        let mut g = Self::empty(&doc.variables);
        for (a, b) in &doc.directed {
            g.directed.insert((idx(a)?, idx(b)?));
        }
        for (a, b) in &doc.dashed {
            let (i, j) = (idx(a)?, idx(b)?);
            g.dashed.insert((i.min(j), i.max(j)));
        }
        Ok(g)
    }

    /// Graphviz rendering: solid arrows for directed edges, dashed undirected
    /// lines for UCP/UBP pairs.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph causal {\n");
        for v in &self.variables {
            let _ = writeln!(out, "  \"{v}\";");
        }
        for &(a, b) in &self.directed {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", self.variables[a], self.variables[b]);
        }
        for &(a, b) in &self.dashed {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [style=dashed, dir=none];",
                self.variables[a], self.variables[b]
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Checks every structural invariant of `g` and reports all violations.
pub fn validate_graph(g: &CausalGraph) -> std::result::Result<(), Vec<GraphViolation>> {
    let p = g.variables.len();
    let name = |i: usize| g.variables.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
    let mut violations = Vec::new();
    let mut seen_oob = HashSet::new();
    let mut check = |i: usize, v: &mut Vec<GraphViolation>| {
        if i >= p && seen_oob.insert(i) {
            v.push(GraphViolation::IndexOutOfRange(i));
        }
    };
    for &(a, b) in &g.directed {
        check(a, &mut violations);
        check(b, &mut violations);
        if a == b {
            violations.push(GraphViolation::SelfParent(name(a)));
        }
    }
    for &(a, b) in &g.dashed {
        check(a, &mut violations);
        check(b, &mut violations);
        if a == b {
            violations.push(GraphViolation::DashedSelfLoop(name(a)));
        } else if a > b {
            violations.push(GraphViolation::DashedNotNormalized(name(a), name(b)));
        }
        if g.directed.contains(&(a, b)) || g.directed.contains(&(b, a)) {
            violations.push(GraphViolation::EdgeDashedOverlap(name(a), name(b)));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Generating structure of a simulated i.i.d. instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub variables: Vec<String>,
    /// Observed direct causes as `(parent, child)`.
    pub directed: Vec<(String, String)>,
    /// Pairs sharing an unobserved common cause (UBP).
    pub confounded_pairs: Vec<(String, String)>,
    /// Pairs linked by an unobserved intermediate, oriented `(earlier, later)` (UCP).
    pub intermediate_pairs: Vec<(String, String)>,
}

impl GroundTruth {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn parents_of(&self, child: &str) -> Vec<&str> {
        self.directed
            .iter()
            .filter(|(_, c)| c == child)
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// True when the three pair sets share no unordered pair.
    pub fn pair_sets_disjoint(&self) -> bool {
        let key = |(a, b): &(String, String)| {
            if a <= b {
                (a.clone(), b.clone())
            } else {
                (b.clone(), a.clone())
            }
        };
        let mut seen = HashSet::new();
        self.directed
            .iter()
            .chain(&self.confounded_pairs)
            .chain(&self.intermediate_pairs)
            .all(|p| seen.insert(key(p)))
    }
}

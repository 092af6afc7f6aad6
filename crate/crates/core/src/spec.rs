//! JSON problem files.
//!
//! ```json
//! {
//!   "dt": 1.0,
//!   "modes": 2,
//!   "nodes": [{"id": 0, "time": 0, "parent": null, "cond_prob": 1.0}, ...],
//!   "psi": {"1": [..by node id..], "2": [..]},
//!   "gamma": {"1,2": [..], "2,1": [..]},
//!   "terminal": {"1": {"3": 0.0, ...}, "2": {...}}
//! }
//! ```
//!
//! Mode labels are one based. Diagonal cost entries may be omitted; if given
//! they must be zero.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::lattice::{validate_tree, AdaptedProcess, LatticeError, NodeId, NodeSpec, ScenarioTree, TreeViolation};
use crate::switching::{ProblemError, SwitchingProblem};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed problem file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario tree: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Tree(Vec<TreeViolation>),
    #[error("mode label {0} outside 1..={1}")]
    UnknownMode(usize, usize),
    #[error("no {what} entry for {key}")]
    Missing { what: &'static str, key: String },
    #[error("{what} for {key} has {got} values, tree has {expected} nodes")]
    WrongLength { what: &'static str, key: String, expected: usize, got: usize },
    #[error("gamma_{mode},{mode} is {value} at node {node}, must be 0")]
    NonZeroDiagonal { mode: usize, node: usize, value: f64 },
    #[error("terminal entry for mode {mode} names node {node}, which is not a leaf")]
    NotALeaf { mode: usize, node: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Ordered mode pair written as `"i,j"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ModePair(pub usize, pub usize);

impl fmt::Display for ModePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

impl FromStr for ModePair {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("mode pair {s:?} is not of the form \"i,j\""))?;
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("mode pair {s:?}: {e}"));
        Ok(ModePair(parse(a)?, parse(b)?))
    }
}

impl Serialize for ModePair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModePair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: usize,
    pub time: usize,
    pub parent: Option<usize>,
    pub cond_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub dt: f64,
    pub modes: usize,
    pub nodes: Vec<NodeEntry>,
    pub psi: BTreeMap<usize, Vec<f64>>,
    pub gamma: BTreeMap<ModePair, Vec<f64>>,
    pub terminal: BTreeMap<usize, BTreeMap<usize, f64>>,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Pretty-printed JSON with a trailing newline. Keys come out in
    /// numeric order, so equal specs give identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn from_problem(problem: &SwitchingProblem) -> Self {
        let tree = problem.tree();
        let nodes = tree
            .specs()
            .into_iter()
            .map(|n| NodeEntry { id: n.id, time: n.time, parent: n.parent, cond_prob: n.cond_prob })
            .collect();
        let psi = problem.mode_iter().map(|i| (i.label(), problem.psi(i).values().to_vec())).collect();
        let mut gamma = BTreeMap::new();
        for i in problem.mode_iter() {
            for j in problem.mode_iter().filter(|&j| j != i) {
                gamma.insert(ModePair(i.label(), j.label()), problem.gamma(i, j).values().to_vec());
            }
        }
        let terminal = problem
            .mode_iter()
            .map(|i| (i.label(), tree.leaves().iter().map(|&l| (l.0, problem.terminal(i).get(l))).collect()))
            .collect();
        Self { dt: tree.dt(), modes: problem.modes(), nodes, psi, gamma, terminal }
    }

    pub fn to_problem(&self) -> Result<SwitchingProblem, SpecError> {
        let specs: Vec<NodeSpec> = self
            .nodes
            .iter()
            .map(|n| NodeSpec { id: n.id, time: n.time, parent: n.parent, cond_prob: n.cond_prob })
            .collect();
        let violations = validate_tree(&specs, self.dt);
        if !violations.is_empty() {
            return Err(SpecError::Tree(violations));
        }
        let tree = match ScenarioTree::new(&specs, self.dt) {
            Ok(t) => t,
            Err(LatticeError::InvalidTree(v)) => return Err(SpecError::Tree(v)),
            Err(e) => return Err(ProblemError::from(e).into()),
        };
        let m = self.modes;
        let len = tree.len();
        let check_label = |label: usize| {
            if (1..=m).contains(&label) {
                Ok(())
            } else {
                Err(SpecError::UnknownMode(label, m))
            }
        };
        let process = |what: &'static str, key: String, v: &[f64]| {
            if v.len() != len {
                return Err(SpecError::WrongLength { what, key, expected: len, got: v.len() });
            }
            Ok(AdaptedProcess::new(&tree, v.to_vec()).expect("length checked"))
        };

        for &label in self.psi.keys().chain(self.terminal.keys()) {
            check_label(label)?;
        }
        for pair in self.gamma.keys() {
            check_label(pair.0)?;
            check_label(pair.1)?;
        }

        let mut psi = Vec::with_capacity(m);
        for label in 1..=m {
            let v = self.psi.get(&label).ok_or(SpecError::Missing { what: "psi", key: label.to_string() })?;
            psi.push(process("psi", label.to_string(), v)?);
        }

        let mut gamma = Vec::with_capacity(m * m);
        for i in 1..=m {
            for j in 1..=m {
                let key = ModePair(i, j);
                match self.gamma.get(&key) {
                    Some(v) => {
                        let p = process("gamma", key.to_string(), v)?;
                        if i == j {
                            if let Some(node) = tree.node_ids().find(|&n| p.get(n) != 0.0) {
                                return Err(SpecError::NonZeroDiagonal { mode: i, node: node.0, value: p.get(node) });
                            }
                        }
                        gamma.push(p);
                    }
                    None if i == j => gamma.push(AdaptedProcess::constant(&tree, 0.0)),
                    None => return Err(SpecError::Missing { what: "gamma", key: key.to_string() }),
                }
            }
        }

        let mut terminal = Vec::with_capacity(m);
        for label in 1..=m {
            let entries =
                self.terminal.get(&label).ok_or(SpecError::Missing { what: "terminal", key: label.to_string() })?;
            for &node in entries.keys() {
                if node >= len || !tree.is_leaf(NodeId(node)) {
                    return Err(SpecError::NotALeaf { mode: label, node });
                }
            }
            let mut values = vec![0.0; len];
            for &leaf in tree.leaves() {
                values[leaf.0] = *entries
                    .get(&leaf.0)
                    .ok_or(SpecError::Missing { what: "terminal", key: format!("mode {label}, leaf {leaf}") })?;
            }
            terminal.push(AdaptedProcess::new(&tree, values).expect("length checked"));
        }
        Ok(SwitchingProblem::new(tree, psi, gamma, terminal)?)
    }
}

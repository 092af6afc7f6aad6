//! Finite scenario trees and processes adapted to them.
//!
//! A node at time `t` is an atom of the time-`t` information set. Edges carry
//! the conditional probability of moving from a parent to a child; path
//! probabilities are always derived from those and never stored.

use std::fmt;

use thiserror::Error;

/// Absolute tolerance used when checking that sibling probabilities sum to one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Index of a node inside a [`ScenarioTree`]. Equal to the node's id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unvalidated description of one node, as read from a problem file.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: usize,
    pub time: usize,
    pub parent: Option<usize>,
    pub cond_prob: f64,
}

/// Which structural rule a node breaks.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeRule {
    Empty,
    NonPositiveDt,
    DuplicateId,
    /// Ids must be exactly `0..len` because process arrays are indexed by id.
    IdOutOfRange,
    NoRoot,
    MultipleRoots,
    RootTime,
    RootProbability,
    UnknownParent,
    ChildTime,
    ProbabilityRange,
    ProbabilitySum {
        sum: f64,
    },
    EarlyLeaf {
        horizon: usize,
    },
    Cycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeViolation {
    pub node: Option<usize>,
    pub rule: TreeRule,
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = match self.node {
            Some(id) => format!("node {id}"),
            None => "tree".to_string(),
        };
        match &self.rule {
            TreeRule::Empty => write!(f, "{at}: no nodes"),
            TreeRule::NonPositiveDt => write!(f, "{at}: dt must be positive and finite"),
            TreeRule::DuplicateId => write!(f, "{at}: duplicate id"),
            TreeRule::IdOutOfRange => write!(f, "{at}: id outside 0..node_count"),
            TreeRule::NoRoot => write!(f, "{at}: no root node"),
            TreeRule::MultipleRoots => write!(f, "{at}: more than one root"),
            TreeRule::RootTime => write!(f, "{at}: root must be at time 0"),
            TreeRule::RootProbability => write!(f, "{at}: root cond_prob must be 1"),
            TreeRule::UnknownParent => write!(f, "{at}: parent id does not exist"),
            TreeRule::ChildTime => write!(f, "{at}: time must be parent time + 1"),
            TreeRule::ProbabilityRange => write!(f, "{at}: cond_prob must lie in (0, 1]"),
            TreeRule::ProbabilitySum { sum } => {
                write!(f, "{at}: children cond_prob sum to {sum}, expected 1")
            }
            TreeRule::EarlyLeaf { horizon } => {
                write!(f, "{at}: leaf before horizon {horizon}")
            }
            TreeRule::Cycle => write!(f, "{at}: parent chain does not reach the root"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("invalid scenario tree: {}", join_violations(.0))]
    InvalidTree(Vec<TreeViolation>),
    #[error("node {0} has no children")]
    NoChildren(NodeId),
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("time {time} outside 0..={horizon}")]
    TimeOutOfRange { time: usize, horizon: usize },
    #[error("process has {got} values, tree has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

fn join_violations(v: &[TreeViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Checks every structural invariant of a scenario tree and reports all
/// violations found. An empty list means the nodes form a valid tree.
pub fn validate_tree(nodes: &[NodeSpec], dt: f64) -> Vec<TreeViolation> {
    let mut out = Vec::new();
    let push =
        |out: &mut Vec<TreeViolation>, node: Option<usize>, rule: TreeRule| out.push(TreeViolation { node, rule });
    if !(dt.is_finite() && dt > 0.0) {
        push(&mut out, None, TreeRule::NonPositiveDt);
    }
    if nodes.is_empty() {
        push(&mut out, None, TreeRule::Empty);
        return out;
    }
    let n = nodes.len();

    // Slot each spec by id; duplicates and out-of-range ids are reported and skipped.
    let mut slot: Vec<Option<&NodeSpec>> = vec![None; n];
    for spec in nodes {
        if spec.id >= n {
            push(&mut out, Some(spec.id), TreeRule::IdOutOfRange);
        } else if slot[spec.id].is_some() {
            push(&mut out, Some(spec.id), TreeRule::DuplicateId);
        } else {
            slot[spec.id] = Some(spec);
        }
    }

    let roots: Vec<&NodeSpec> = slot.iter().flatten().filter(|s| s.parent.is_none()).copied().collect();
    match roots.len() {
        0 => push(&mut out, None, TreeRule::NoRoot),
        1 => {}
        _ => {
            for r in &roots[1..] {
                push(&mut out, Some(r.id), TreeRule::MultipleRoots);
            }
        }
    }
    for r in &roots {
        if r.time != 0 {
            push(&mut out, Some(r.id), TreeRule::RootTime);
        }
        if r.cond_prob != 1.0 {
            push(&mut out, Some(r.id), TreeRule::RootProbability);
        }
    }

    let mut child_sum = vec![0.0_f64; n];
    let mut child_count = vec![0_usize; n];
    for spec in slot.iter().flatten() {
        let Some(p) = spec.parent else { continue };
        if !(spec.cond_prob > 0.0 && spec.cond_prob <= 1.0) {
            push(&mut out, Some(spec.id), TreeRule::ProbabilityRange);
        }
        match slot.get(p).copied().flatten() {
            None => push(&mut out, Some(spec.id), TreeRule::UnknownParent),
            Some(parent) => {
                if spec.time != parent.time + 1 {
                    push(&mut out, Some(spec.id), TreeRule::ChildTime);
                }
                child_sum[p] += spec.cond_prob;
                child_count[p] += 1;
            }
        }
    }
    for (id, (&sum, &count)) in child_sum.iter().zip(&child_count).enumerate() {
        if count > 0 && (sum - 1.0).abs() > PROB_SUM_TOL {
            push(&mut out, Some(id), TreeRule::ProbabilitySum { sum });
        }
    }

    let horizon = slot.iter().flatten().map(|s| s.time).max().unwrap_or(0);
    for spec in slot.iter().flatten() {
        if child_count[spec.id] == 0 && spec.time < horizon {
            push(&mut out, Some(spec.id), TreeRule::EarlyLeaf { horizon });
        }
    }

    // Every parent chain must terminate at a root within n hops.
    for spec in slot.iter().flatten() {
        let mut cur = spec.parent;
        let mut hops = 0;
        while let Some(p) = cur {
            hops += 1;
            if hops > n {
                push(&mut out, Some(spec.id), TreeRule::Cycle);
                break;
            }
            cur = slot.get(p).copied().flatten().and_then(|s| s.parent);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct Node {
    time: usize,
    parent: Option<NodeId>,
    cond_prob: f64,
    children: Vec<NodeId>,
}

/// A validated, immutable scenario tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    nodes: Vec<Node>,
    by_time: Vec<Vec<NodeId>>,
    root: NodeId,
    horizon: usize,
    dt: f64,
}

impl ScenarioTree {
    pub fn new(specs: &[NodeSpec], dt: f64) -> Result<Self, LatticeError> {
        let violations = validate_tree(specs, dt);
        if !violations.is_empty() {
            return Err(LatticeError::InvalidTree(violations));
        }
        let n = specs.len();
        let mut nodes: Vec<Node> = vec![Node { time: 0, parent: None, cond_prob: 1.0, children: Vec::new() }; n];
        for s in specs {
            nodes[s.id] =
                Node { time: s.time, parent: s.parent.map(NodeId), cond_prob: s.cond_prob, children: Vec::new() };
        }
        // Children are kept in id order so traversals are deterministic.
        for id in 0..n {
            if let Some(p) = nodes[id].parent {
                nodes[p.0].children.push(NodeId(id));
            }
        }
        let horizon = nodes.iter().map(|nd| nd.time).max().unwrap_or(0);
        let mut by_time = vec![Vec::new(); horizon + 1];
        for (id, nd) in nodes.iter().enumerate() {
            by_time[nd.time].push(NodeId(id));
        }
        let root = by_time[0][0];
        Ok(Self { nodes, by_time, root, horizon, dt })
    }

    /// Full tree with `depth` steps where every interior node has `branching`
    /// equally likely children. Node ids are assigned breadth first.
    pub fn uniform(depth: usize, branching: usize, dt: f64) -> Result<Self, LatticeError> {
        let branching = branching.max(1);
        let p = 1.0 / branching as f64;
        let mut specs = vec![NodeSpec { id: 0, time: 0, parent: None, cond_prob: 1.0 }];
        let mut frontier = vec![0_usize];
        for t in 1..=depth {
            let mut next = Vec::with_capacity(frontier.len() * branching);
            for &parent in &frontier {
                for _ in 0..branching {
                    let id = specs.len();
                    specs.push(NodeSpec { id, time: t, parent: Some(parent), cond_prob: p });
                    next.push(id);
                }
            }
            frontier = next;
        }
        Self::new(&specs, dt)
    }

    /// Node descriptions in id order; `ScenarioTree::new` on them rebuilds this tree.
    pub fn specs(&self) -> Vec<NodeSpec> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(id, nd)| NodeSpec { id, time: nd.time, parent: nd.parent.map(|p| p.0), cond_prob: nd.cond_prob })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of steps `N`; the horizon is `T = N * dt`.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn time(&self, node: NodeId) -> usize {
        self.nodes[node.0].time
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.nodes[node.0].parent
    }

    pub fn cond_prob(&self, node: NodeId) -> f64 {
        self.nodes[node.0].cond_prob
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.nodes[node.0].children
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.nodes[node.0].children.is_empty()
    }

    pub fn nodes_at(&self, time: usize) -> &[NodeId] {
        self.by_time.get(time).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn leaves(&self) -> &[NodeId] {
        self.nodes_at(self.horizon)
    }

    /// Nodes ordered from the horizon back to the root.
    pub fn backward_order(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_time.iter().rev().flatten().copied()
    }

    /// Unconditional probability of reaching `node`.
    pub fn path_prob(&self, node: NodeId) -> f64 {
        let mut p = 1.0;
        let mut cur = Some(node);
        while let Some(c) = cur {
            p *= self.cond_prob(c);
            cur = self.parent(c);
        }
        p
    }

    /// Whether `anc` lies on the path from the root to `node` (inclusive).
    pub fn is_ancestor_or_self(&self, anc: NodeId, node: NodeId) -> bool {
        if self.time(anc) > self.time(node) {
            return false;
        }
        let mut cur = node;
        while self.time(cur) > self.time(anc) {
            cur = self.parent(cur).expect("non-root node has a parent");
        }
        cur == anc
    }

    /// Nodes from `from` down to `to`, both included. `None` if `from` is not
    /// an ancestor of `to`.
    pub fn path_between(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        if self.time(from) > self.time(to) {
            return None;
        }
        let mut path = Vec::with_capacity(self.time(to) - self.time(from) + 1);
        let mut cur = to;
        loop {
            path.push(cur);
            if cur == from {
                break;
            }
            if self.time(cur) <= self.time(from) {
                return None;
            }
            cur = self.parent(cur)?;
        }
        path.reverse();
        Some(path)
    }

    /// Probability of reaching `node` conditional on having reached `from`.
    pub fn prob_from(&self, from: NodeId, node: NodeId) -> Option<f64> {
        if !self.is_ancestor_or_self(from, node) {
            return None;
        }
        let mut p = 1.0;
        let mut cur = node;
        while cur != from {
            p *= self.cond_prob(cur);
            cur = self.parent(cur)?;
        }
        Some(p)
    }

    /// All nodes in the subtree rooted at `from`, in depth-first preorder.
    pub fn subtree(&self, from: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children(n).iter().rev());
        }
        out
    }

    /// Leaves below `from`, in depth-first order.
    pub fn leaves_below(&self, from: NodeId) -> Vec<NodeId> {
        self.subtree(from).into_iter().filter(|&n| self.is_leaf(n)).collect()
    }

    /// `E[X_{t+1} | node]`: weighted sum of the process over the children.
    pub fn one_step_expectation(&self, proc: &AdaptedProcess, node: NodeId) -> Result<f64, LatticeError> {
        self.check_len(proc)?;
        if !self.contains(node) {
            return Err(LatticeError::UnknownNode(node));
        }
        let ch = self.children(node);
        if ch.is_empty() {
            return Err(LatticeError::NoChildren(node));
        }
        Ok(self.expect_children(proc.values(), node))
    }

    /// Unconditional expectation `E[X_t]`.
    pub fn root_expectation(&self, proc: &AdaptedProcess, time: usize) -> Result<f64, LatticeError> {
        self.check_len(proc)?;
        if time > self.horizon {
            return Err(LatticeError::TimeOutOfRange { time, horizon: self.horizon });
        }
        Ok(self.nodes_at(time).iter().map(|&n| self.path_prob(n) * proc.get(n)).sum())
    }

    /// `E[X_T | from]` for a process whose terminal values matter.
    pub fn expect_at_leaves(&self, values: &[f64], from: NodeId) -> f64 {
        self.leaves_below(from).into_iter().map(|l| self.prob_from(from, l).unwrap_or(0.0) * values[l.0]).sum()
    }

    /// Inner kernel of the conditional expectation; callers guarantee lengths.
    pub(crate) fn expect_children(&self, values: &[f64], node: NodeId) -> f64 {
        self.children(node).iter().map(|&c| self.cond_prob(c) * values[c.0]).sum()
    }

    fn check_len(&self, proc: &AdaptedProcess) -> Result<(), LatticeError> {
        if proc.len() != self.len() {
            return Err(LatticeError::LengthMismatch { expected: self.len(), got: proc.len() });
        }
        Ok(())
    }
}

/// One real value per node of a tree. Adaptedness is structural: a value is
/// attached to a node, which encodes its whole history.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    values: Vec<f64>,
}

impl AdaptedProcess {
    pub fn new(tree: &ScenarioTree, values: Vec<f64>) -> Result<Self, LatticeError> {
        if values.len() != tree.len() {
            return Err(LatticeError::LengthMismatch { expected: tree.len(), got: values.len() });
        }
        Ok(Self { values })
    }

    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(tree: &ScenarioTree, c: f64) -> Self {
        Self { values: vec![c; tree.len()] }
    }

    pub fn from_fn(tree: &ScenarioTree, f: impl FnMut(NodeId) -> f64) -> Self {
        Self { values: tree.node_ids().map(f).collect() }
    }

    pub fn get(&self, node: NodeId) -> f64 {
        self.values[node.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    /// Largest node-wise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<NodeId> for AdaptedProcess {
    type Output = f64;

    fn index(&self, node: NodeId) -> &f64 {
        &self.values[node.0]
    }
}

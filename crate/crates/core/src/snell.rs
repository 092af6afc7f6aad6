//! Snell envelopes by backward induction, their Doob decomposition and the
//! minimal optimal stopping rule.

use thiserror::Error;

use crate::lattice::{AdaptedProcess, NodeId, ScenarioTree};

/// Slack allowed when checking the supermartingale inequality.
pub const SUPERMARTINGALE_TOL: f64 = 1e-12;

/// Threshold under which `Z` and `U` are considered equal when stopping.
pub const STOP_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SnellError {
    #[error("not a supermartingale at node {node}: E[Z | node] exceeds Z(node) by {excess:e}")]
    NotSupermartingale { node: NodeId, excess: f64 },
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
}

/// `Z = M - A` with `M` a martingale and `A` predictable, non-decreasing and
/// zero at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DoobDecomposition {
    pub martingale: AdaptedProcess,
    pub compensator: AdaptedProcess,
}

/// Per-node stop flag. The realized stopping time on a path is the first
/// flagged node at or after the starting node; leaves are always flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    stop: Vec<bool>,
}

impl StoppingRule {
    /// Builds a rule from arbitrary flags; leaves are forced to stop.
    pub fn new(tree: &ScenarioTree, mut stop: Vec<bool>) -> Self {
        stop.resize(tree.len(), false);
        for &leaf in tree.leaves() {
            stop[leaf.0] = true;
        }
        Self { stop }
    }

    pub fn is_stop(&self, node: NodeId) -> bool {
        self.stop[node.0]
    }

    /// The antichain of nodes where paths starting at `from` first stop.
    pub fn stop_nodes(&self, tree: &ScenarioTree, from: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if self.stop[n.0] {
                out.push(n);
            } else {
                stack.extend(tree.children(n).iter().rev());
            }
        }
        out
    }

    /// Nodes visited strictly before stopping, starting at `from`.
    pub fn continuation_nodes(&self, tree: &ScenarioTree, from: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            if !self.stop[n.0] {
                out.push(n);
                stack.extend(tree.children(n).iter().rev());
            }
        }
        out
    }
}

/// Smallest supermartingale dominating `obstacle`:
/// `Z = U` at the leaves and `Z = max(U, E[Z | node])` elsewhere.
pub fn snell_envelope(tree: &ScenarioTree, obstacle: &AdaptedProcess) -> AdaptedProcess {
    let u = obstacle.values();
    let mut z = vec![0.0; tree.len()];
    for node in tree.backward_order() {
        z[node.0] = if tree.is_leaf(node) { u[node.0] } else { u[node.0].max(tree.expect_children(&z, node)) };
    }
    AdaptedProcess::from_vec(z)
}

/// Splits a supermartingale into its martingale part and its predictable
/// compensator. The compensator increment is assigned to the children, so
/// siblings always share the same value.
pub fn doob_decompose(tree: &ScenarioTree, z: &AdaptedProcess) -> Result<DoobDecomposition, SnellError> {
    if z.len() != tree.len() {
        return Err(crate::lattice::LatticeError::LengthMismatch { expected: tree.len(), got: z.len() }.into());
    }
    let zv = z.values();
    let mut a = vec![0.0; tree.len()];
    let mut m = vec![0.0; tree.len()];
    let root = tree.root();
    m[root.0] = zv[root.0];
    for t in 0..tree.horizon() {
        for &node in tree.nodes_at(t) {
            let drop = zv[node.0] - tree.expect_children(zv, node);
            if drop < -SUPERMARTINGALE_TOL {
                return Err(SnellError::NotSupermartingale { node, excess: -drop });
            }
            let next_a = a[node.0] + drop;
            for &c in tree.children(node) {
                a[c.0] = next_a;
                m[c.0] = zv[c.0] + next_a;
            }
        }
    }
    Ok(DoobDecomposition { martingale: AdaptedProcess::from_vec(m), compensator: AdaptedProcess::from_vec(a) })
}

/// Debut of the set `{Z = U}` after `from`: stop where `|Z - U| <= 1e-9`,
/// or at the leaf.
pub fn first_optimal_stop(
    tree: &ScenarioTree,
    envelope: &AdaptedProcess,
    obstacle: &AdaptedProcess,
    from: NodeId,
) -> StoppingRule {
    let mut stop = vec![false; tree.len()];
    for n in tree.subtree(from) {
        stop[n.0] = tree.is_leaf(n) || (envelope.get(n) - obstacle.get(n)).abs() <= STOP_TOL;
    }
    StoppingRule::new(tree, stop)
}

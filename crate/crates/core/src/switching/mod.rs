//! The optimal switching problem, its solver and strategies.

mod solver;
mod strategy;

use std::fmt;

use thiserror::Error;

use crate::lattice::{AdaptedProcess, LatticeError, NodeId, ScenarioTree};

pub use solver::{
    fixed_point_residual, iteration_cap, obstacle, solve, solve_n_switches, Solution, SolveError, DEFAULT_TOL,
};
pub use strategy::{
    evaluate, extract_strategy, num_switches, Decision, ModeIndicator, PathPlan, Strategy, StrategyError, Switch,
    SWITCH_TOL,
};

/// Operating mode, stored zero based. Displayed one based to match problem files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode(pub usize);

impl Mode {
    /// One-based label used in files and reports.
    pub fn label(self) -> usize {
        self.0 + 1
    }

    pub fn from_label(label: usize) -> Option<Self> {
        label.checked_sub(1).map(Mode)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("at least two modes are required, got {0}")]
    TooFewModes(usize),
    #[error("expected {expected} {what} processes, got {got}")]
    WrongCount { what: &'static str, expected: usize, got: usize },
    #[error("switching cost from mode {mode} to itself is {value} at node {node}, must be 0")]
    NonZeroDiagonal { mode: Mode, node: NodeId, value: f64 },
    #[error("{what} is not finite at node {node}")]
    NonFinite { what: String, node: NodeId },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Running rewards `psi_i` (per unit time), switching costs `gamma_{i,j}` and
/// terminal rewards `Gamma_i` on a scenario tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingProblem {
    tree: ScenarioTree,
    modes: usize,
    psi: Vec<AdaptedProcess>,
    /// Row-major `modes x modes`; the diagonal is identically zero.
    gamma: Vec<AdaptedProcess>,
    /// Per mode; only leaf entries are meaningful, interior entries are zero.
    terminal: Vec<AdaptedProcess>,
}

impl SwitchingProblem {
    /// `gamma` is row-major over ordered pairs `(i, j)`; `terminal` holds one
    /// full-length process per mode of which only the leaf values are read.
    pub fn new(
        tree: ScenarioTree,
        psi: Vec<AdaptedProcess>,
        gamma: Vec<AdaptedProcess>,
        terminal: Vec<AdaptedProcess>,
    ) -> Result<Self, ProblemError> {
        let m = psi.len();
        if m < 2 {
            return Err(ProblemError::TooFewModes(m));
        }
        if gamma.len() != m * m {
            return Err(ProblemError::WrongCount { what: "gamma", expected: m * m, got: gamma.len() });
        }
        if terminal.len() != m {
            return Err(ProblemError::WrongCount { what: "terminal", expected: m, got: terminal.len() });
        }
        for p in psi.iter().chain(&gamma).chain(&terminal) {
            if p.len() != tree.len() {
                return Err(LatticeError::LengthMismatch { expected: tree.len(), got: p.len() }.into());
            }
        }
        for (i, p) in psi.iter().enumerate() {
            check_finite(&tree, p, || format!("psi_{}", i + 1), |_| true)?;
        }
        for i in 0..m {
            for j in 0..m {
                let g = &gamma[i * m + j];
                check_finite(&tree, g, || format!("gamma_{},{}", i + 1, j + 1), |_| true)?;
                if i == j {
                    if let Some(node) = tree.node_ids().find(|&n| g.get(n) != 0.0) {
                        return Err(ProblemError::NonZeroDiagonal { mode: Mode(i), node, value: g.get(node) });
                    }
                }
            }
        }
        let terminal = terminal
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                check_finite(&tree, &t, || format!("terminal_{}", i + 1), |n| tree.is_leaf(n))?;
                Ok(AdaptedProcess::from_fn(&tree, |n| if tree.is_leaf(n) { t.get(n) } else { 0.0 }))
            })
            .collect::<Result<Vec<_>, ProblemError>>()?;
        Ok(Self { tree, modes: m, psi, gamma, terminal })
    }

    /// Builds a problem from closures. `gamma` is only called for `i != j`;
    /// `terminal` is only called on leaves.
    pub fn from_fns(
        tree: ScenarioTree,
        modes: usize,
        mut psi: impl FnMut(Mode, NodeId) -> f64,
        mut gamma: impl FnMut(Mode, Mode, NodeId) -> f64,
        mut terminal: impl FnMut(Mode, NodeId) -> f64,
    ) -> Result<Self, ProblemError> {
        let psi_v = (0..modes).map(|i| AdaptedProcess::from_fn(&tree, |n| psi(Mode(i), n))).collect();
        let mut gamma_v = Vec::with_capacity(modes * modes);
        for i in 0..modes {
            for j in 0..modes {
                gamma_v.push(AdaptedProcess::from_fn(&tree, |n| if i == j { 0.0 } else { gamma(Mode(i), Mode(j), n) }));
            }
        }
        let term_v = (0..modes)
            .map(|i| AdaptedProcess::from_fn(&tree, |n| if tree.is_leaf(n) { terminal(Mode(i), n) } else { 0.0 }))
            .collect();
        Self::new(tree, psi_v, gamma_v, term_v)
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn mode_iter(&self) -> impl Iterator<Item = Mode> {
        (0..self.modes).map(Mode)
    }

    pub fn dt(&self) -> f64 {
        self.tree.dt()
    }

    pub fn psi(&self, mode: Mode) -> &AdaptedProcess {
        &self.psi[mode.0]
    }

    pub fn gamma(&self, from: Mode, to: Mode) -> &AdaptedProcess {
        &self.gamma[from.0 * self.modes + to.0]
    }

    pub fn terminal(&self, mode: Mode) -> &AdaptedProcess {
        &self.terminal[mode.0]
    }

    /// Running reward accrued over the step that starts at `node`.
    pub fn step_reward(&self, mode: Mode, node: NodeId) -> f64 {
        self.psi[mode.0].get(node) * self.tree.dt()
    }

    /// `sum_{s < t} psi_i(s) dt` along the path to each node.
    pub fn accumulated_reward(&self, mode: Mode) -> AdaptedProcess {
        let t = &self.tree;
        let mut acc = vec![0.0; t.len()];
        for time in 1..=t.horizon() {
            for &n in t.nodes_at(time) {
                let p = t.parent(n).expect("non-root");
                acc[n.0] = acc[p.0] + self.step_reward(mode, p);
            }
        }
        AdaptedProcess::from_vec(acc)
    }
}

fn check_finite(
    tree: &ScenarioTree,
    p: &AdaptedProcess,
    what: impl Fn() -> String,
    relevant: impl Fn(NodeId) -> bool,
) -> Result<(), ProblemError> {
    match tree.node_ids().find(|&n| relevant(n) && !p.get(n).is_finite()) {
        Some(node) => Err(ProblemError::NonFinite { what: what(), node }),
        None => Ok(()),
    }
}

/// One value process per mode, `Y^1, ..., Y^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFamily {
    values: Vec<AdaptedProcess>,
}

impl ValueFamily {
    pub fn new(values: Vec<AdaptedProcess>) -> Self {
        Self { values }
    }

    pub fn get(&self, mode: Mode) -> &AdaptedProcess {
        &self.values[mode.0]
    }

    pub fn value(&self, mode: Mode, node: NodeId) -> f64 {
        self.values[mode.0].get(node)
    }

    pub fn modes(&self) -> usize {
        self.values.len()
    }

    pub fn processes(&self) -> &[AdaptedProcess] {
        &self.values
    }

    /// Largest absolute node-wise difference over all modes.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max)
    }
}

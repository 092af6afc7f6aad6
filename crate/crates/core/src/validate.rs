//! Standing cost assumptions, the martingale hypothesis on switching costs and
//! admissibility of strategies, all reported as lists of violations.

use std::fmt;

use crate::lattice::{AdaptedProcess, NodeId, ScenarioTree};
use crate::snell::{doob_decompose, snell_envelope};
use crate::switching::{Mode, Strategy, SwitchingProblem};

/// Margin for the strict triangle inequality and for the terminal condition.
pub const COST_TOL: f64 = 1e-12;

/// Slack for the martingale property and the (M) inequalities.
pub const MARTINGALE_TOL: f64 = 1e-12;

/// Slack for the expected total cost bound.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum CostViolation {
    NonZeroDiagonal {
        mode: Mode,
        node: NodeId,
        value: f64,
    },
    /// `gamma_{i,k} < gamma_{i,j} + gamma_{j,k}` fails (with margin).
    Triangle {
        i: Mode,
        j: Mode,
        k: Mode,
        node: NodeId,
        direct: f64,
        chained: f64,
    },
    /// `Gamma_i >= Gamma_j - gamma_{i,j}` fails at a leaf.
    Terminal {
        i: Mode,
        j: Mode,
        leaf: NodeId,
        stay: f64,
        switch: f64,
    },
}

impl fmt::Display for CostViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonZeroDiagonal { mode, node, value } => {
                write!(f, "diagonal: gamma_{mode},{mode} = {value} at node {node}, must be 0")
            }
            Self::Triangle { i, j, k, node, direct, chained } => write!(
                f,
                "triangle: gamma_{i},{k} = {direct} is not below gamma_{i},{j} + gamma_{j},{k} = {chained} at node {node}"
            ),
            Self::Terminal { i, j, leaf, stay, switch } => write!(
                f,
                "terminal: Gamma_{i} = {stay} is below Gamma_{j} - gamma_{i},{j} = {switch} at leaf {leaf}"
            ),
        }
    }
}

/// Zero diagonal, strict triangle inequality and terminal consistency, node
/// by node over the whole tree.
pub fn check_assumption_costs(problem: &SwitchingProblem) -> Vec<CostViolation> {
    let tree = problem.tree();
    let mut out = Vec::new();
    for node in tree.node_ids() {
        for i in problem.mode_iter() {
            let d = problem.gamma(i, i).get(node);
            if d != 0.0 {
                out.push(CostViolation::NonZeroDiagonal { mode: i, node, value: d });
            }
            for j in problem.mode_iter().filter(|&j| j != i) {
                for k in problem.mode_iter().filter(|&k| k != j) {
                    let direct = problem.gamma(i, k).get(node);
                    let chained = problem.gamma(i, j).get(node) + problem.gamma(j, k).get(node);
                    if direct >= chained - COST_TOL {
                        out.push(CostViolation::Triangle { i, j, k, node, direct, chained });
                    }
                }
            }
        }
        if tree.is_leaf(node) {
            for i in problem.mode_iter() {
                let stay = problem.terminal(i).get(node);
                for j in problem.mode_iter().filter(|&j| j != i) {
                    let switch = problem.terminal(j).get(node) - problem.gamma(i, j).get(node);
                    if stay < switch - COST_TOL {
                        out.push(CostViolation::Terminal { i, j, leaf: node, stay, switch });
                    }
                }
            }
        }
    }
    out
}

/// Family `M_{i,j}` indexed by ordered mode pairs, diagonal included.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleFamily {
    modes: usize,
    entries: Vec<AdaptedProcess>,
}

impl MartingaleFamily {
    /// `entries` is row-major over `(i, j)`.
    pub fn new(modes: usize, entries: Vec<AdaptedProcess>) -> Self {
        assert_eq!(entries.len(), modes * modes, "family needs modes^2 entries");
        Self { modes, entries }
    }

    pub fn from_fn(modes: usize, mut f: impl FnMut(Mode, Mode) -> AdaptedProcess) -> Self {
        let mut entries = Vec::with_capacity(modes * modes);
        for i in 0..modes {
            for j in 0..modes {
                entries.push(f(Mode(i), Mode(j)));
            }
        }
        Self { modes, entries }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn get(&self, i: Mode, j: Mode) -> &AdaptedProcess {
        &self.entries[i.0 * self.modes + j.0]
    }

    pub fn entries(&self) -> &[AdaptedProcess] {
        &self.entries
    }
}

/// Which constructive case produced a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypothesisCase {
    /// Every cost is a martingale; `M = -gamma`.
    MartingaleCosts,
    /// Every cost is non-negative; `M = 0`.
    NonNegativeCosts,
    /// Two modes; `M_{i,j}` is the martingale part of the envelope of `-gamma_{i,j}`.
    TwoModeDoobMeyer,
}

impl HypothesisCase {
    pub const ALL: [HypothesisCase; 3] = [Self::MartingaleCosts, Self::NonNegativeCosts, Self::TwoModeDoobMeyer];

    pub fn name(self) -> &'static str {
        match self {
            Self::MartingaleCosts => "martingale costs",
            Self::NonNegativeCosts => "non-negative",
            Self::TwoModeDoobMeyer => "two-mode Doob-Meyer",
        }
    }
}

impl fmt::Display for HypothesisCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of the constructive search. `Unavailable` is not a failure: the
/// hypothesis may still hold for a family supplied by other means.
#[derive(Debug, Clone, PartialEq)]
pub enum Construction {
    Found { case: HypothesisCase, family: MartingaleFamily },
    Unavailable,
}

/// Largest `|E[X | node] - X(node)|` over interior nodes.
pub fn martingale_gap(tree: &ScenarioTree, x: &AdaptedProcess) -> f64 {
    tree.node_ids()
        .filter(|&n| !tree.is_leaf(n))
        .map(|n| (tree.expect_children(x.values(), n) - x.get(n)).abs())
        .fold(0.0, f64::max)
}

fn off_diagonal(problem: &SwitchingProblem) -> impl Iterator<Item = (Mode, Mode)> + '_ {
    problem.mode_iter().flat_map(move |i| problem.mode_iter().filter(move |&j| j != i).map(move |j| (i, j)))
}

/// Builds the family for one case if its precondition holds.
pub fn construct_for_case(problem: &SwitchingProblem, case: HypothesisCase) -> Option<MartingaleFamily> {
    let tree = problem.tree();
    let m = problem.modes();
    match case {
        HypothesisCase::MartingaleCosts => {
            let ok = off_diagonal(problem).all(|(i, j)| martingale_gap(tree, problem.gamma(i, j)) <= MARTINGALE_TOL);
            ok.then(|| MartingaleFamily::from_fn(m, |i, j| problem.gamma(i, j).map(|g| -g)))
        }
        HypothesisCase::NonNegativeCosts => {
            let ok = off_diagonal(problem).all(|(i, j)| problem.gamma(i, j).values().iter().all(|&g| g >= 0.0));
            ok.then(|| MartingaleFamily::from_fn(m, |_, _| AdaptedProcess::constant(tree, 0.0)))
        }
        HypothesisCase::TwoModeDoobMeyer => {
            if m != 2 {
                return None;
            }
            let part = |i: Mode, j: Mode| {
                let z = snell_envelope(tree, &problem.gamma(i, j).map(|g| -g));
                doob_decompose(tree, &z).expect("an envelope is a supermartingale").martingale
            };
            let m12 = part(Mode(0), Mode(1));
            let m21 = part(Mode(1), Mode(0));
            let diag = m12.zip_with(&m21, |a, b| a + b);
            Some(MartingaleFamily::new(2, vec![diag.clone(), m12, m21, diag]))
        }
    }
}

/// Tries the two-mode construction first, then martingale costs, then
/// non-negative costs.
pub fn construct_martingale_family(problem: &SwitchingProblem) -> Construction {
    let order = [HypothesisCase::TwoModeDoobMeyer, HypothesisCase::MartingaleCosts, HypothesisCase::NonNegativeCosts];
    for case in order {
        if let Some(family) = construct_for_case(problem, case) {
            return Construction::Found { case, family };
        }
    }
    Construction::Unavailable
}

#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisViolation {
    WrongShape {
        expected_modes: usize,
        got_modes: usize,
    },
    NonFinite {
        i: Mode,
        j: Mode,
        node: NodeId,
    },
    NotMartingale {
        i: Mode,
        j: Mode,
        node: NodeId,
        gap: f64,
    },
    /// `-gamma_{i,j} <= M_{i,j}` fails.
    Domination {
        i: Mode,
        j: Mode,
        node: NodeId,
        neg_cost: f64,
        value: f64,
    },
    /// `M_{i,j} + M_{j,k} <= M_{i,k}` fails.
    Triangle {
        i: Mode,
        j: Mode,
        k: Mode,
        node: NodeId,
        chained: f64,
        direct: f64,
    },
}

impl fmt::Display for HypothesisViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WrongShape { expected_modes, got_modes } => {
                write!(f, "family has {got_modes} modes, problem has {expected_modes}")
            }
            Self::NonFinite { i, j, node } => write!(f, "M_{i},{j} is not finite at node {node}"),
            Self::NotMartingale { i, j, node, gap } => {
                write!(f, "M_{i},{j} is not a martingale at node {node} (gap {gap:e})")
            }
            Self::Domination { i, j, node, neg_cost, value } => {
                write!(f, "domination: -gamma_{i},{j} = {neg_cost} exceeds M_{i},{j} = {value} at node {node}")
            }
            Self::Triangle { i, j, k, node, chained, direct } => {
                write!(f, "triangle: M_{i},{j} + M_{j},{k} = {chained} exceeds M_{i},{k} = {direct} at node {node}")
            }
        }
    }
}

/// Checks finiteness, the martingale property of every entry, domination of
/// the negated costs and the triangle inequality (with `k = i` allowed).
pub fn check_hypothesis_m(family: &MartingaleFamily, problem: &SwitchingProblem) -> Vec<HypothesisViolation> {
    let tree = problem.tree();
    let mut out = Vec::new();
    if family.modes() != problem.modes() || family.entries().iter().any(|e| e.len() != tree.len()) {
        out.push(HypothesisViolation::WrongShape { expected_modes: problem.modes(), got_modes: family.modes() });
        return out;
    }
    for i in problem.mode_iter() {
        for j in problem.mode_iter() {
            let mij = family.get(i, j);
            if let Some(node) = tree.node_ids().find(|&n| !mij.get(n).is_finite()) {
                out.push(HypothesisViolation::NonFinite { i, j, node });
                continue;
            }
            for node in tree.node_ids().filter(|&n| !tree.is_leaf(n)) {
                let gap = (tree.expect_children(mij.values(), node) - mij.get(node)).abs();
                if gap > MARTINGALE_TOL {
                    out.push(HypothesisViolation::NotMartingale { i, j, node, gap });
                }
            }
        }
    }
    for node in tree.node_ids() {
        for (i, j) in off_diagonal(problem) {
            let neg_cost = -problem.gamma(i, j).get(node);
            let value = family.get(i, j).get(node);
            if neg_cost > value + MARTINGALE_TOL {
                out.push(HypothesisViolation::Domination { i, j, node, neg_cost, value });
            }
            for k in problem.mode_iter().filter(|&k| k != j) {
                let chained = value + family.get(j, k).get(node);
                let direct = family.get(i, k).get(node);
                if chained > direct + MARTINGALE_TOL {
                    out.push(HypothesisViolation::Triangle { i, j, k, node, chained, direct });
                }
            }
        }
    }
    out
}

/// Result of the expected total cost bound over all truncations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBound {
    pub holds: bool,
    /// `max_N (lhs_N - rhs)`; non-positive when the bound holds exactly.
    pub gap: f64,
    pub rhs: f64,
}

/// `E[-sum_{n <= N} gamma_{iota_{n-1}, iota_n}(tau_n) | start] <=
/// E[max_{j1, j2} |M_{j1,j2}(T)| | start]` for every `N` up to the longest
/// path plus `m` further switches.
///
/// Every term of the sum is a genuine switch, so a path with fewer than `N`
/// switches is completed by paid switches at its leaf. The completion is the
/// one maximising the lhs, which makes the check hold for every completion.
pub fn check_cost_bound(problem: &SwitchingProblem, strategy: &Strategy, family: &MartingaleFamily) -> CostBound {
    let tree = problem.tree();
    let start = strategy.start();
    let bound_at = |leaf: NodeId| family.entries().iter().map(|e| e.get(leaf).abs()).fold(0.0, f64::max);
    let max_n = strategy.paths().iter().map(|p| p.switches.len()).max().unwrap_or(0) + problem.modes();
    let mut lhs = vec![0.0; max_n + 1];
    let mut rhs = 0.0;
    for plan in strategy.paths() {
        let w = tree.prob_from(start, plan.leaf).unwrap_or(0.0);
        rhs += w * bound_at(plan.leaf);
        let mut mode = strategy.start_mode();
        let mut total = 0.0;
        for (n, s) in plan.switches.iter().enumerate() {
            total -= problem.gamma(mode, s.to).get(s.node);
            mode = s.to;
            lhs[n + 1] += w * total;
        }
        let done = plan.switches.len();
        let tail = worst_leaf_tail(problem, plan.leaf, max_n - done);
        for r in 1..=max_n - done {
            lhs[done + r] += w * (total + tail[r][mode.0]);
        }
    }
    let gap = lhs.iter().map(|l| l - rhs).fold(f64::NEG_INFINITY, f64::max);
    CostBound { holds: gap <= BOUND_TOL, gap, rhs }
}

/// `tail[r][i]`: largest `-sum gamma` over `r` consecutive switches at `leaf`
/// starting in mode `i`.
fn worst_leaf_tail(problem: &SwitchingProblem, leaf: NodeId, len: usize) -> Vec<Vec<f64>> {
    let m = problem.modes();
    let mut tail = vec![vec![0.0; m]];
    for r in 1..=len {
        let row = (0..m)
            .map(|i| {
                (0..m)
                    .filter(|&j| j != i)
                    .map(|j| tail[r - 1][j] - problem.gamma(Mode(i), Mode(j)).get(leaf))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        tail.push(row);
    }
    tail
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdmissibilityViolation {
    UnknownStart {
        node: NodeId,
        mode: Mode,
    },
    MissingPath {
        leaf: NodeId,
    },
    DuplicatePath {
        leaf: NodeId,
    },
    /// A plan for a node that is not a leaf below the start.
    ForeignPath {
        leaf: NodeId,
    },
    SwitchOffPath {
        leaf: NodeId,
        node: NodeId,
    },
    NonMonotone {
        leaf: NodeId,
        index: usize,
    },
    /// Two paths agree up to `node` but disagree on the switch times decided there.
    NotStoppingTime {
        node: NodeId,
    },
    SameMode {
        leaf: NodeId,
        index: usize,
        mode: Mode,
    },
    UnknownMode {
        leaf: NodeId,
        index: usize,
        mode: Mode,
    },
    /// Two paths agree on switch times up to `node` but select different modes.
    SelectorNotAdapted {
        node: NodeId,
    },
    TooManySwitches {
        leaf: NodeId,
        count: usize,
        bound: usize,
    },
    NonFiniteCost {
        leaf: NodeId,
        index: usize,
    },
}

impl AdmissibilityViolation {
    /// Clause of the admissibility definition: 1 stopping times, 2 mode
    /// choices, 3 finitely many switches, 4 integrable costs.
    pub fn clause(&self) -> u8 {
        match self {
            Self::UnknownStart { .. }
            | Self::MissingPath { .. }
            | Self::DuplicatePath { .. }
            | Self::ForeignPath { .. }
            | Self::SwitchOffPath { .. }
            | Self::NonMonotone { .. }
            | Self::NotStoppingTime { .. } => 1,
            Self::SameMode { .. } | Self::UnknownMode { .. } | Self::SelectorNotAdapted { .. } => 2,
            Self::TooManySwitches { .. } => 3,
            Self::NonFiniteCost { .. } => 4,
        }
    }
}

impl fmt::Display for AdmissibilityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause {}: ", self.clause())?;
        match self {
            Self::UnknownStart { node, mode } => write!(f, "start (node {node}, mode {mode}) is not in the problem"),
            Self::MissingPath { leaf } => write!(f, "no plan for the path to leaf {leaf}"),
            Self::DuplicatePath { leaf } => write!(f, "more than one plan for leaf {leaf}"),
            Self::ForeignPath { leaf } => write!(f, "node {leaf} is not a leaf below the start"),
            Self::SwitchOffPath { leaf, node } => write!(f, "switch at node {node} is off the path to leaf {leaf}"),
            Self::NonMonotone { leaf, index } => {
                write!(f, "switch time {index} decreases on the path to leaf {leaf}")
            }
            Self::NotStoppingTime { node } => {
                write!(f, "switch times are not decided by the information at node {node}")
            }
            Self::SameMode { leaf, index, mode } => {
                write!(f, "switch {index} on the path to leaf {leaf} keeps mode {mode}")
            }
            Self::UnknownMode { leaf, index, mode } => {
                write!(f, "switch {index} on the path to leaf {leaf} targets unknown mode {mode}")
            }
            Self::SelectorNotAdapted { node } => {
                write!(f, "mode choices are not decided by the information at node {node}")
            }
            Self::TooManySwitches { leaf, count, bound } => {
                write!(f, "{count} switches on the path to leaf {leaf}, bound is {bound}")
            }
            Self::NonFiniteCost { leaf, index } => {
                write!(f, "cumulative cost {index} on the path to leaf {leaf} is not finite")
            }
        }
    }
}

/// Discrete admissibility: non-decreasing stopping times, adapted mode
/// choices that always change mode, the declared switch bound and finite
/// cumulative costs.
pub fn check_admissible(strategy: &Strategy, problem: &SwitchingProblem) -> Vec<AdmissibilityViolation> {
    use AdmissibilityViolation as V;
    let tree = problem.tree();
    let m = problem.modes();
    let start = strategy.start();
    let mut out = Vec::new();
    if !tree.contains(start) || strategy.start_mode().0 >= m {
        out.push(V::UnknownStart { node: start, mode: strategy.start_mode() });
        return out;
    }

    let mut seen = vec![false; tree.len()];
    let mut valid = Vec::new();
    for plan in strategy.paths() {
        let leaf = plan.leaf;
        if !tree.contains(leaf) || !tree.is_leaf(leaf) || !tree.is_ancestor_or_self(start, leaf) {
            out.push(V::ForeignPath { leaf });
            continue;
        }
        if seen[leaf.0] {
            out.push(V::DuplicatePath { leaf });
            continue;
        }
        seen[leaf.0] = true;
        let mut ok = true;
        let mut mode = strategy.start_mode();
        let mut cost = 0.0;
        for (index, s) in plan.switches.iter().enumerate() {
            let index = index + 1;
            if !tree.contains(s.node)
                || !tree.is_ancestor_or_self(start, s.node)
                || !tree.is_ancestor_or_self(s.node, leaf)
            {
                out.push(V::SwitchOffPath { leaf, node: s.node });
                ok = false;
                break;
            }
            if index > 1 && tree.time(s.node) < tree.time(plan.switches[index - 2].node) {
                out.push(V::NonMonotone { leaf, index });
                ok = false;
            }
            if s.to.0 >= m {
                out.push(V::UnknownMode { leaf, index, mode: s.to });
                ok = false;
                continue;
            }
            if s.to == mode {
                out.push(V::SameMode { leaf, index, mode });
            }
            cost += problem.gamma(mode, s.to).get(s.node);
            if !cost.is_finite() {
                out.push(V::NonFiniteCost { leaf, index });
            }
            mode = s.to;
        }
        if let Some(bound) = strategy.switch_bound() {
            let count = plan.switches.iter().filter(|s| tree.contains(s.node) && !tree.is_leaf(s.node)).count();
            if count > bound {
                out.push(V::TooManySwitches { leaf, count, bound });
            }
        }
        if ok {
            valid.push(plan);
        }
    }
    for leaf in tree.leaves_below(start) {
        if !seen[leaf.0] {
            out.push(V::MissingPath { leaf });
        }
    }

    // Adaptedness: every path through a node must agree on what was decided
    // up to and including that node. Only the shallowest disagreement is
    // reported.
    let mut prefix: Vec<Option<&[crate::switching::Switch]>> = vec![None; tree.len()];
    let mut bad = vec![false; tree.len()];
    for plan in &valid {
        let path = tree.path_between(start, plan.leaf).expect("checked above");
        let mut upto = 0;
        let mut ancestor_bad = false;
        for &node in &path {
            while upto < plan.switches.len() && tree.time(plan.switches[upto].node) <= tree.time(node) {
                upto += 1;
            }
            let here = &plan.switches[..upto];
            match prefix[node.0] {
                None => prefix[node.0] = Some(here),
                Some(other) if other != here => {
                    if !bad[node.0] && !ancestor_bad {
                        let same_times =
                            other.len() == here.len() && other.iter().zip(here).all(|(a, b)| a.node == b.node);
                        out.push(if same_times { V::SelectorNotAdapted { node } } else { V::NotStoppingTime { node } });
                    }
                    bad[node.0] = true;
                }
                Some(_) => {}
            }
            ancestor_bad |= bad[node.0];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switching::fixtures::p1;
    use crate::switching::{extract_strategy, solve, PathPlan, Switch, DEFAULT_TOL};

    fn two_mode(gamma12: f64, gamma21: f64, terminal: [f64; 2]) -> SwitchingProblem {
        let tree = ScenarioTree::uniform(1, 1, 1.0).unwrap();
        SwitchingProblem::from_fns(
            tree,
            2,
            |_, _| 0.0,
            |i, _, _| if i == Mode(0) { gamma12 } else { gamma21 },
            |m, _| terminal[m.0],
        )
        .unwrap()
    }

    #[test]
    fn p1_satisfies_cost_assumptions() {
        assert!(check_assumption_costs(&p1()).is_empty());
    }

    #[test]
    fn arbitrage_loop_breaks_triangle() {
        let v = check_assumption_costs(&two_mode(-1.0, 0.0, [0.0, 0.0]));
        // The leaf also fails terminal consistency: 0 < 0 - (-1).
        assert!(v.iter().any(|x| matches!(x, CostViolation::Terminal { leaf: NodeId(1), .. })));
        assert!(v.contains(&CostViolation::Triangle {
            i: Mode(0),
            j: Mode(1),
            k: Mode(0),
            node: NodeId(0),
            direct: 0.0,
            chained: -1.0
        }));
    }

    #[test]
    fn terminal_violation_is_located() {
        let v = check_assumption_costs(&two_mode(0.5, 0.5, [0.0, 1.0]));
        assert_eq!(
            v,
            vec![CostViolation::Terminal { i: Mode(0), j: Mode(1), leaf: NodeId(1), stay: 0.0, switch: 0.5 }]
        );
    }

    #[test]
    fn constructive_cases() {
        let p = p1();
        match construct_martingale_family(&p) {
            Construction::Found { case, family } => {
                assert_eq!(case, HypothesisCase::TwoModeDoobMeyer);
                assert!(family.get(Mode(0), Mode(1)).values().iter().all(|&v| (v + 0.4).abs() < 1e-15));
                assert!(family.get(Mode(0), Mode(0)).values().iter().all(|&v| (v + 0.8).abs() < 1e-15));
                assert!(check_hypothesis_m(&family, &p).is_empty());
            }
            Construction::Unavailable => panic!("P1 has two modes"),
        }
        let c1 = construct_for_case(&p, HypothesisCase::MartingaleCosts).unwrap();
        assert_eq!(c1.get(Mode(1), Mode(0)).get(NodeId(0)), -0.4);
        let c2 = construct_for_case(&p, HypothesisCase::NonNegativeCosts).unwrap();
        assert!(check_hypothesis_m(&c2, &p).is_empty());

        let tree = ScenarioTree::uniform(1, 2, 1.0).unwrap();
        let signed = SwitchingProblem::from_fns(
            tree,
            3,
            |_, _| 0.0,
            |i, j, n| if n.0 == 1 && i < j { -0.1 } else { 0.5 },
            |_, _| 0.0,
        )
        .unwrap();
        assert_eq!(construct_martingale_family(&signed), Construction::Unavailable);
    }

    #[test]
    fn domination_failure_is_reported() {
        let p = p1();
        let family =
            MartingaleFamily::from_fn(2, |i, j| AdaptedProcess::constant(p.tree(), if i == j { -2.0 } else { -1.0 }));
        let v = check_hypothesis_m(&family, &p);
        assert!(v.iter().any(|x| matches!(x, HypothesisViolation::Domination { i: Mode(0), j: Mode(1), .. })));
    }

    #[test]
    fn cost_bound_examples() {
        let p = p1();
        let Construction::Found { family, .. } = construct_martingale_family(&p) else { panic!() };
        let empty = Strategy::never_switch(p.tree(), NodeId(0), Mode(0));
        let b = check_cost_bound(&p, &empty, &family);
        assert!(b.holds);
        assert!((b.rhs - 0.8).abs() < 1e-15);
        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        let opt = extract_strategy(&p, &y, NodeId(0), Mode(0));
        let b = check_cost_bound(&p, &opt, &family);
        assert!(b.holds);
        // Truncations give lhs 0, -0.4, -0.8, ... against rhs 0.8.
        assert!((b.gap + 0.8).abs() < 1e-15);
    }

    #[test]
    fn short_paths_are_completed_by_leaf_switches() {
        use crate::generate::{generate, GenConfig};
        // Two modes with signed costs; M_11 is negative at some leaves, so
        // padding short paths with free non-switches would break the bound.
        let p = generate(&GenConfig::new(20_076, 2, 2, 2));
        let family = construct_for_case(&p, HypothesisCase::TwoModeDoobMeyer).unwrap();
        assert!(check_hypothesis_m(&family, &p).is_empty());
        let sw = |n: usize, to: usize| Switch { node: NodeId(n), to: Mode(to) };
        let s = Strategy::new(
            NodeId(0),
            Mode(0),
            vec![
                PathPlan { leaf: NodeId(3), switches: vec![sw(0, 1), sw(1, 0), sw(3, 1)] },
                PathPlan { leaf: NodeId(4), switches: vec![sw(0, 1), sw(1, 0)] },
                PathPlan { leaf: NodeId(5), switches: vec![sw(0, 1)] },
                PathPlan { leaf: NodeId(6), switches: vec![sw(0, 1)] },
            ],
        );
        assert!(check_admissible(&s, &p).is_empty());
        let b = check_cost_bound(&p, &s, &family);
        assert!(b.holds, "{b:?}");
    }

    #[test]
    fn two_mode_family_does_not_bound_repeated_round_trips() {
        use crate::generate::{generate, GenConfig};
        // Deterministic chain: M_12, M_21 and M_11 = M_22 are constants and the
        // family passes every check, yet 1 -> 2 -> 1 -> 2 collects more than
        // max |M(T)| = M_11.
        let p = generate(&GenConfig::new(20_008, 3, 1, 2));
        let family = construct_for_case(&p, HypothesisCase::TwoModeDoobMeyer).unwrap();
        assert!(check_hypothesis_m(&family, &p).is_empty());
        let sw = |n: usize, to: usize| Switch { node: NodeId(n), to: Mode(to) };
        let s = Strategy::new(
            NodeId(0),
            Mode(0),
            vec![PathPlan { leaf: NodeId(3), switches: vec![sw(0, 1), sw(1, 0), sw(2, 1)] }],
        );
        assert!(check_admissible(&s, &p).is_empty());
        let b = check_cost_bound(&p, &s, &family);
        let gains = -p.gamma(Mode(0), Mode(1)).get(NodeId(0))
            - p.gamma(Mode(1), Mode(0)).get(NodeId(1))
            - p.gamma(Mode(0), Mode(1)).get(NodeId(2));
        assert!(!b.holds);
        assert!((b.rhs - family.get(Mode(0), Mode(0)).get(NodeId(3))).abs() < 1e-15);
        assert!(b.gap >= gains - b.rhs - 1e-15 && gains - b.rhs > 0.3);
    }

    #[test]
    fn admissibility_clauses() {
        let p = p1();
        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        assert!(check_admissible(&extract_strategy(&p, &y, NodeId(0), Mode(0)), &p).is_empty());

        let repeat = Strategy::new(
            NodeId(0),
            Mode(0),
            vec![PathPlan {
                leaf: NodeId(1),
                switches: vec![Switch { node: NodeId(0), to: Mode(1) }, Switch { node: NodeId(0), to: Mode(1) }],
            }],
        );
        let v = check_admissible(&repeat, &p);
        assert_eq!(v, vec![AdmissibilityViolation::SameMode { leaf: NodeId(1), index: 2, mode: Mode(1) }]);
        assert_eq!(v[0].clause(), 2);

        let tree = ScenarioTree::uniform(2, 2, 1.0).unwrap();
        let q = SwitchingProblem::from_fns(tree, 3, |_, _| 0.0, |_, _, _| 0.1, |_, _| 0.0).unwrap();
        // Leaves 3 and 4 share node 1; one path switches to mode 2 there,
        // the other to mode 3.
        let plan = |leaf: usize, to: Option<Mode>| PathPlan {
            leaf: NodeId(leaf),
            switches: to.map(|to| Switch { node: NodeId(1), to }).into_iter().collect(),
        };
        let selector = Strategy::new(
            NodeId(0),
            Mode(0),
            vec![plan(3, Some(Mode(1))), plan(4, Some(Mode(2))), plan(5, None), plan(6, None)],
        );
        assert_eq!(
            check_admissible(&selector, &q),
            vec![AdmissibilityViolation::SelectorNotAdapted { node: NodeId(1) }]
        );

        let peek = Strategy::new(
            NodeId(0),
            Mode(0),
            vec![plan(3, Some(Mode(1))), plan(4, None), plan(5, None), plan(6, None)],
        );
        let v = check_admissible(&peek, &q);
        assert_eq!(v, vec![AdmissibilityViolation::NotStoppingTime { node: NodeId(1) }]);
        assert_eq!(v[0].clause(), 1);

        let missing = Strategy::new(NodeId(0), Mode(0), vec![plan(3, None)]);
        assert_eq!(check_admissible(&missing, &q).len(), 3);

        let bounded = Strategy::from_feedback(q.tree(), NodeId(0), Mode(0), |n, m, h| {
            (h == 0 && !q.tree().is_leaf(n)).then_some(Mode((m.0 + 1) % 3))
        })
        .with_switch_bound(1);
        assert!(check_admissible(&bounded, &q)
            .iter()
            .all(|v| matches!(v, AdmissibilityViolation::TooManySwitches { count: 2, bound: 1, .. })));
    }
}

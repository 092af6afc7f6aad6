//! Brute-force checks that do not share code paths with the solver:
//! exhaustive policy enumeration, and the cumulative cost identity and
//! martingale bounds along an extracted strategy.
//!
//! A policy assigns a post-decision mode to every non-leaf node of the start
//! subtree. Since a node encodes its full history, this covers every pure
//! adapted strategy that switches at most once per node; chained switches at
//! one node are dominated under the strict triangle inequality.

use thiserror::Error;

use crate::exec;
use crate::lattice::NodeId;
use crate::snell::doob_decompose;
use crate::switching::{evaluate, Mode, PathPlan, Strategy, StrategyError, Switch, SwitchingProblem, ValueFamily};

/// Largest number of distinct policies the enumerator will visit.
pub const POLICY_GUARD: u128 = 1 << 24;

/// Tolerance for the bound checks.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{modes}^{interior} policies exceed the enumeration limit of {limit}; use a smaller tree or fewer modes")]
    GuardExceeded { modes: usize, interior: usize, limit: u128 },
    #[error("node {0} is not in the tree")]
    UnknownStart(NodeId),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// `m^(nodes * m)`: the number of raw `(node, mode) -> mode` maps on the
/// whole tree. `None` on overflow.
pub fn raw_policy_count(problem: &SwitchingProblem) -> Option<u128> {
    let exp = u32::try_from(problem.tree().len() * problem.modes()).ok()?;
    (problem.modes() as u128).checked_pow(exp)
}

/// Number of distinct strategies the enumerator visits from `start`.
pub fn policy_count(problem: &SwitchingProblem, start: NodeId) -> Option<u128> {
    let tree = problem.tree();
    let interior = tree.subtree(start).into_iter().filter(|&n| !tree.is_leaf(n)).count();
    (problem.modes() as u128).checked_pow(u32::try_from(interior).ok()?)
}

/// All policies from `(start, mode)` with at most `max_switches` switches on
/// every path.
pub struct PolicyIter<'a> {
    enumerator: Enumerator<'a>,
    next: u64,
    count: u64,
    max_switches: usize,
}

impl Iterator for PolicyIter<'_> {
    type Item = Strategy;

    fn next(&mut self) -> Option<Strategy> {
        while self.next < self.count {
            let idx = self.next;
            self.next += 1;
            if let Some(s) = self.enumerator.decode(idx, self.max_switches) {
                return Some(s);
            }
        }
        None
    }
}

struct Enumerator<'a> {
    problem: &'a SwitchingProblem,
    start: NodeId,
    mode: Mode,
    /// Position of each non-leaf node in the mixed-radix policy index.
    digit: Vec<Option<usize>>,
}

impl<'a> Enumerator<'a> {
    fn new(problem: &'a SwitchingProblem, start: NodeId, mode: Mode) -> Result<(Self, u64), OracleError> {
        let tree = problem.tree();
        if !tree.contains(start) {
            return Err(OracleError::UnknownStart(start));
        }
        let limit = POLICY_GUARD;
        let count = policy_count(problem, start).unwrap_or(u128::MAX);
        if count > limit {
            let interior = tree.subtree(start).into_iter().filter(|&n| !tree.is_leaf(n)).count();
            return Err(OracleError::GuardExceeded { modes: problem.modes(), interior, limit });
        }
        let mut digit = vec![None; tree.len()];
        for (pos, n) in tree.subtree(start).into_iter().filter(|&n| !tree.is_leaf(n)).enumerate() {
            digit[n.0] = Some(pos);
        }
        Ok((Self { problem, start, mode, digit }, count as u64))
    }

    /// Strategy for policy `idx`, or `None` if some path switches too often.
    fn decode(&self, idx: u64, max_switches: usize) -> Option<Strategy> {
        let tree = self.problem.tree();
        let m = self.problem.modes() as u64;
        let choice = |n: NodeId| {
            let pos = self.digit[n.0].expect("interior node of the start subtree");
            Mode(((idx / m.pow(pos as u32)) % m) as usize)
        };
        let mut paths = Vec::new();
        let mut stack = vec![(self.start, self.mode, Vec::new())];
        while let Some((node, mode, mut switches)) = stack.pop() {
            if tree.is_leaf(node) {
                paths.push(PathPlan { leaf: node, switches });
                continue;
            }
            let to = choice(node);
            if to != mode {
                if switches.len() == max_switches {
                    return None;
                }
                switches.push(Switch { node, to });
            }
            for &c in tree.children(node).iter().rev() {
                stack.push((c, to, switches.clone()));
            }
        }
        Some(Strategy::new(self.start, self.mode, paths).with_switch_bound(max_switches))
    }
}

/// Every policy started at `(start, mode)` with at most `max_switches`
/// switches per path, as strategies.
pub fn enumerate_policies(
    problem: &SwitchingProblem,
    start: NodeId,
    mode: Mode,
    max_switches: usize,
) -> Result<PolicyIter<'_>, OracleError> {
    let (enumerator, count) = Enumerator::new(problem, start, mode)?;
    Ok(PolicyIter { enumerator, next: 0, count, max_switches })
}

/// Best performance index over all enumerated policies.
pub fn oracle_value(
    problem: &SwitchingProblem,
    node: NodeId,
    mode: Mode,
    max_switches: usize,
) -> Result<f64, OracleError> {
    let (enumerator, count) = Enumerator::new(problem, node, mode)?;
    let best = exec::try_max_over(count, |idx| match enumerator.decode(idx, max_switches) {
        Some(s) => evaluate(problem, &s).map(Some).map_err(OracleError::from),
        None => Ok(None),
    })?;
    Ok(best.expect("the never-switch policy is always enumerated"))
}

/// Martingale parts of `Y^i + sum_{s < t} psi_i dt`, one per mode.
pub fn accumulated_martingales(problem: &SwitchingProblem, y: &ValueFamily) -> Vec<crate::lattice::AdaptedProcess> {
    let tree = problem.tree();
    problem
        .mode_iter()
        .map(|i| {
            let hat = y.get(i).zip_with(&problem.accumulated_reward(i), |a, b| a + b);
            doob_decompose(tree, &hat).expect("value processes dominate their continuation").martingale
        })
        .collect()
}

/// Switches strictly before the horizon, with the mode they leave.
fn interior_switches(problem: &SwitchingProblem, strategy: &Strategy, plan: &PathPlan) -> Vec<(Switch, Mode)> {
    let tree = problem.tree();
    let mut mode = strategy.start_mode();
    let mut out = Vec::new();
    for s in plan.switches.iter().filter(|s| !tree.is_leaf(s.node)) {
        out.push((*s, mode));
        mode = s.to;
    }
    out
}

/// Largest absolute difference, over paths and `n`, between the realized
/// cumulative cost of the first `n` switches and its representation through
/// the value processes, running rewards and martingale increments.
pub fn check_cumulative_cost_identity(problem: &SwitchingProblem, y: &ValueFamily, strategy: &Strategy) -> f64 {
    let tree = problem.tree();
    let mart = accumulated_martingales(problem, y);
    let start = strategy.start();
    let mut worst: f64 = 0.0;
    for plan in strategy.paths() {
        let path = tree.path_between(start, plan.leaf).expect("path below the start");
        let switches = interior_switches(problem, strategy, plan);
        // Running reward along the path under the realized mode indicator.
        let mut mode = strategy.start_mode();
        let mut next = 0;
        let mut running = Vec::with_capacity(path.len());
        let mut acc = 0.0;
        for &node in &path {
            running.push(acc);
            while next < switches.len() && switches[next].0.node == node {
                mode = switches[next].0.to;
                next += 1;
            }
            if !tree.is_leaf(node) {
                acc += problem.step_reward(mode, node);
            }
        }
        let offset = tree.time(start);
        let mut cost = 0.0;
        let mut mart_sum = 0.0;
        let mut prev = start;
        for (s, from) in &switches {
            cost += problem.gamma(*from, s.to).get(s.node);
            mart_sum += mart[from.0].get(s.node) - mart[from.0].get(prev);
            prev = s.node;
            let rhs = y.value(s.to, s.node) - y.value(strategy.start_mode(), start)
                + running[tree.time(s.node) - offset]
                - mart_sum;
            worst = worst.max((cost - rhs).abs());
        }
    }
    worst
}

/// Numerical values behind the martingale bounds along a strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleBoundReport {
    /// `max |E[xi_k | G_{k-1}]|` over `k` and atoms.
    pub conditional_mean: f64,
    /// `max |E[Q_k - Q_{k-1} | G_{k-1}]|` for `Q = X^2 - R`.
    pub compensator_gap: f64,
    /// `E[sum_k xi_k^2]`.
    pub sum_sq: f64,
    /// `4 m max_i E[(M^i_T)^2]`.
    pub sum_sq_bound: f64,
    /// `E[(sup_n |X_n|)^2]`.
    pub sup_sq: f64,
    /// `4 E[R_inf]`.
    pub sup_sq_bound: f64,
}

impl MartingaleBoundReport {
    pub fn martingale_holds(&self) -> bool {
        self.conditional_mean <= ORACLE_TOL && self.compensator_gap <= ORACLE_TOL
    }

    pub fn sum_sq_holds(&self) -> bool {
        self.sum_sq <= self.sum_sq_bound + ORACLE_TOL
    }

    pub fn sup_sq_holds(&self) -> bool {
        self.sup_sq <= self.sup_sq_bound + ORACLE_TOL
    }

    pub fn holds(&self) -> bool {
        self.martingale_holds() && self.sum_sq_holds() && self.sup_sq_holds()
    }
}

/// Builds `xi_k = M^{iota_{k-1}}(tau_k) - M^{iota_{k-1}}(tau_{k-1})`, with
/// `tau_k` the leaf once the switches run out, and `X_n = sum_{k <= n} xi_k`,
/// then evaluates the martingale property of `X` and of `X^2 - R`, and the two
/// square bounds. The atom of `G_k` containing a path is the node `tau_k`.
pub fn check_discrete_martingale_bounds(
    problem: &SwitchingProblem,
    y: &ValueFamily,
    strategy: &Strategy,
) -> MartingaleBoundReport {
    let tree = problem.tree();
    let mart = accumulated_martingales(problem, y);
    let start = strategy.start();

    struct PathData {
        weight: f64,
        /// `tau_0, tau_1, ...` padded with the leaf.
        taus: Vec<NodeId>,
        xi: Vec<f64>,
    }
    let mut data = Vec::new();
    let mut depth = 0;
    for plan in strategy.paths() {
        let switches = interior_switches(problem, strategy, plan);
        let mut taus = vec![start];
        let mut xi = Vec::new();
        let mut mode = strategy.start_mode();
        for (s, from) in &switches {
            xi.push(mart[from.0].get(s.node) - mart[from.0].get(*taus.last().unwrap()));
            taus.push(s.node);
            mode = s.to;
        }
        xi.push(mart[mode.0].get(plan.leaf) - mart[mode.0].get(*taus.last().unwrap()));
        taus.push(plan.leaf);
        depth = depth.max(xi.len());
        data.push(PathData { weight: tree.prob_from(start, plan.leaf).unwrap_or(0.0), taus, xi });
    }
    for d in &mut data {
        let leaf = *d.taus.last().unwrap();
        d.taus.resize(depth + 1, leaf);
        d.xi.resize(depth, 0.0);
    }

    // Conditional expectation given G_{k-1}: average over the paths sharing
    // the node tau_{k-1}.
    let cond = |k: usize, vals: &[f64]| -> Vec<f64> {
        let mut num = vec![0.0; tree.len()];
        let mut den = vec![0.0; tree.len()];
        for (d, v) in data.iter().zip(vals) {
            let a = d.taus[k - 1].0;
            num[a] += d.weight * v;
            den[a] += d.weight;
        }
        data.iter().map(|d| num[d.taus[k - 1].0] / den[d.taus[k - 1].0]).collect()
    };

    let n = data.len();
    let mut conditional_mean: f64 = 0.0;
    let mut compensator_gap: f64 = 0.0;
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut sup = vec![0.0f64; n];
    for k in 1..=depth {
        let xi: Vec<f64> = data.iter().map(|d| d.xi[k - 1]).collect();
        let xi_sq: Vec<f64> = xi.iter().map(|v| v * v).collect();
        let mean = cond(k, &xi);
        let var = cond(k, &xi_sq);
        conditional_mean = mean.iter().fold(conditional_mean, |a, v| a.max(v.abs()));
        let mut dq = vec![0.0; n];
        for p in 0..n {
            let q_prev = x[p] * x[p] - r[p];
            x[p] += xi[p];
            r[p] += var[p];
            sup[p] = sup[p].max(x[p].abs());
            dq[p] = x[p] * x[p] - r[p] - q_prev;
        }
        compensator_gap = cond(k, &dq).iter().fold(compensator_gap, |a, v| a.max(v.abs()));
    }

    let expect = |v: &dyn Fn(usize) -> f64| -> f64 { data.iter().enumerate().map(|(p, d)| d.weight * v(p)).sum() };
    let sum_sq = expect(&|p| data[p].xi.iter().map(|v| v * v).sum());
    let sup_sq = expect(&|p| sup[p] * sup[p]);
    let r_inf = expect(&|p| r[p]);
    let m_sq = mart.iter().map(|mi| expect(&|p| mi.get(*data[p].taus.last().unwrap()).powi(2))).fold(0.0, f64::max);
    MartingaleBoundReport {
        conditional_mean,
        compensator_gap,
        sum_sq,
        sum_sq_bound: 4.0 * problem.modes() as f64 * m_sq,
        sup_sq,
        sup_sq_bound: 4.0 * r_inf,
    }
}

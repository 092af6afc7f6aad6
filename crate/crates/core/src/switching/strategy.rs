use thiserror::Error;

use super::{Mode, SwitchingProblem, ValueFamily};
use crate::lattice::{NodeId, ScenarioTree};
use crate::snell::StoppingRule;
use crate::validate::{check_admissible, AdmissibilityViolation};

/// Tolerance for the switching event `Y^i = max_{j != i}(Y^j - gamma_{i,j})`
/// and for argmax ties.
pub const SWITCH_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("inadmissible strategy: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Inadmissible(Vec<AdmissibilityViolation>),
}

/// One switching decision `(tau_n, iota_n)` as realized on a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Switch {
    pub node: NodeId,
    pub to: Mode,
}

/// Switches realized on the path from the strategy's start to `leaf`, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathPlan {
    pub leaf: NodeId,
    pub switches: Vec<Switch>,
}

/// `n`-th decision of a strategy in stopping-time form: the stopping rule for
/// `tau_n` and the target mode chosen at each node where it fires.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub stop: StoppingRule,
    pub select: Vec<Mode>,
}

/// A switching strategy started at `(start, start_mode)`, stored as the
/// switch sequence it realizes on every path below `start`.
///
/// Storing realizations per path (rather than per node) makes non-adapted
/// strategies representable, so that admissibility can actually be checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    start: NodeId,
    start_mode: Mode,
    paths: Vec<PathPlan>,
    switch_bound: Option<usize>,
}

impl Strategy {
    pub fn new(start: NodeId, start_mode: Mode, paths: Vec<PathPlan>) -> Self {
        Self { start, start_mode, paths, switch_bound: None }
    }

    /// Stay in `mode` on every path.
    pub fn never_switch(tree: &ScenarioTree, start: NodeId, mode: Mode) -> Self {
        let paths = tree.leaves_below(start).into_iter().map(|leaf| PathPlan { leaf, switches: Vec::new() }).collect();
        Self::new(start, mode, paths)
    }

    /// Declares a per-path bound on switches made before the horizon.
    pub fn with_switch_bound(mut self, bound: usize) -> Self {
        self.switch_bound = Some(bound);
        self
    }

    /// Realizes a feedback rule. At every node `rule(node, current_mode,
    /// switches_already_made_here)` is asked repeatedly; `Some(to)` records a
    /// switch, `None` moves on to the children. Leaves are asked too.
    pub fn from_feedback(
        tree: &ScenarioTree,
        start: NodeId,
        start_mode: Mode,
        mut rule: impl FnMut(NodeId, Mode, usize) -> Option<Mode>,
    ) -> Self {
        let mut paths = Vec::new();
        let mut stack: Vec<(NodeId, Mode, Vec<Switch>)> = vec![(start, start_mode, Vec::new())];
        while let Some((node, mut mode, mut switches)) = stack.pop() {
            let mut here = 0;
            while let Some(to) = rule(node, mode, here) {
                switches.push(Switch { node, to });
                mode = to;
                here += 1;
            }
            if tree.is_leaf(node) {
                paths.push(PathPlan { leaf: node, switches });
            } else {
                for &c in tree.children(node).iter().rev() {
                    stack.push((c, mode, switches.clone()));
                }
            }
        }
        Self::new(start, start_mode, paths)
    }

    /// Realizes decisions given in stopping-time form: on each path,
    /// `tau_n` is the first node at or after `tau_{n-1}` where the `n`-th
    /// rule fires. Decisions still pending at the horizon are dropped, since
    /// a switch at `T` carries neither cost nor mode change.
    pub fn from_decisions(tree: &ScenarioTree, start: NodeId, start_mode: Mode, decisions: &[Decision]) -> Self {
        let mut paths = Vec::new();
        let mut stack: Vec<(NodeId, Mode, usize, Vec<Switch>)> = vec![(start, start_mode, 0, Vec::new())];
        while let Some((node, mut mode, mut k, mut switches)) = stack.pop() {
            if tree.is_leaf(node) {
                paths.push(PathPlan { leaf: node, switches });
                continue;
            }
            while k < decisions.len() && decisions[k].stop.is_stop(node) {
                let to = decisions[k].select[node.0];
                switches.push(Switch { node, to });
                mode = to;
                k += 1;
            }
            for &c in tree.children(node).iter().rev() {
                stack.push((c, mode, k, switches.clone()));
            }
        }
        Self::new(start, start_mode, paths)
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn start_mode(&self) -> Mode {
        self.start_mode
    }

    pub fn paths(&self) -> &[PathPlan] {
        &self.paths
    }

    pub fn switch_bound(&self) -> Option<usize> {
        self.switch_bound
    }

    /// Whether the strategy never switches anywhere.
    pub fn is_empty(&self) -> bool {
        self.paths.iter().all(|p| p.switches.is_empty())
    }

    /// Active mode at each node of the start subtree, after the switches
    /// decided at that node. Requires an admissible strategy.
    pub fn mode_indicator(&self, problem: &SwitchingProblem) -> Result<ModeIndicator, StrategyError> {
        ensure_admissible(self, problem)?;
        let tree = problem.tree();
        let mut modes = vec![None; tree.len()];
        for plan in &self.paths {
            let mut mode = self.start_mode;
            let mut next = 0;
            for node in tree.path_between(self.start, plan.leaf).expect("checked") {
                while next < plan.switches.len() && plan.switches[next].node == node {
                    if !tree.is_leaf(node) {
                        mode = plan.switches[next].to;
                    }
                    next += 1;
                }
                modes[node.0] = Some(mode);
            }
        }
        Ok(ModeIndicator { modes })
    }
}

/// Active mode `u` per node; `None` outside the strategy's start subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeIndicator {
    pub modes: Vec<Option<Mode>>,
}

impl ModeIndicator {
    pub fn get(&self, node: NodeId) -> Option<Mode> {
        self.modes[node.0]
    }
}

fn ensure_admissible(strategy: &Strategy, problem: &SwitchingProblem) -> Result<(), StrategyError> {
    let v = check_admissible(strategy, problem);
    if v.is_empty() {
        Ok(())
    } else {
        Err(StrategyError::Inadmissible(v))
    }
}

/// Performance index `J(alpha; start, start_mode)`: expected running reward
/// plus terminal reward minus switching costs paid before the horizon,
/// conditional on the start node.
pub fn evaluate(problem: &SwitchingProblem, strategy: &Strategy) -> Result<f64, StrategyError> {
    ensure_admissible(strategy, problem)?;
    let tree = problem.tree();
    let mut total = 0.0;
    for plan in strategy.paths() {
        let prob = tree.prob_from(strategy.start(), plan.leaf).expect("checked");
        total += prob * path_payoff(problem, strategy.start(), strategy.start_mode(), plan);
    }
    Ok(total)
}

fn path_payoff(problem: &SwitchingProblem, start: NodeId, start_mode: Mode, plan: &PathPlan) -> f64 {
    let tree = problem.tree();
    let mut mode = start_mode;
    let mut next = 0;
    let mut value = 0.0;
    for node in tree.path_between(start, plan.leaf).expect("checked") {
        if tree.is_leaf(node) {
            value += problem.terminal(mode).get(node);
            break;
        }
        while next < plan.switches.len() && plan.switches[next].node == node {
            let to = plan.switches[next].to;
            value -= problem.gamma(mode, to).get(node);
            mode = to;
            next += 1;
        }
        value += problem.step_reward(mode, node);
    }
    value
}

/// Switches made strictly before the horizon, per leaf path.
pub fn num_switches(tree: &ScenarioTree, strategy: &Strategy) -> Vec<(NodeId, usize)> {
    strategy.paths().iter().map(|p| (p.leaf, p.switches.iter().filter(|s| !tree.is_leaf(s.node)).count())).collect()
}

/// Candidate optimal strategy read off a value family: switch as soon as the
/// current mode's value meets its switching obstacle, to the smallest mode
/// attaining the maximum. Nothing happens at the horizon.
pub fn extract_strategy(problem: &SwitchingProblem, y: &ValueFamily, start: NodeId, start_mode: Mode) -> Strategy {
    let tree = problem.tree();
    let chain_cap = problem.modes() - 1;
    Strategy::from_feedback(tree, start, start_mode, |node, mode, here| {
        if tree.is_leaf(node) || here >= chain_cap {
            return None;
        }
        let offer = |j: Mode| y.value(j, node) - problem.gamma(mode, j).get(node);
        let best = problem.mode_iter().filter(|&j| j != mode).map(offer).fold(f64::NEG_INFINITY, f64::max);
        if y.value(mode, node) - best > SWITCH_TOL {
            return None;
        }
        problem.mode_iter().filter(|&j| j != mode).find(|&j| offer(j) >= best - SWITCH_TOL)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switching::fixtures::p1;
    use crate::switching::{solve, DEFAULT_TOL};

    #[test]
    fn p1_strategies() {
        let p = p1();
        let root = p.tree().root();
        let stay = Strategy::never_switch(p.tree(), root, Mode(0));
        assert_eq!(evaluate(&p, &stay).unwrap(), 0.0);

        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        let opt = extract_strategy(&p, &y, root, Mode(0));
        assert_eq!(opt.paths()[0].switches, vec![Switch { node: root, to: Mode(1) }]);
        assert!((evaluate(&p, &opt).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(num_switches(p.tree(), &opt), vec![(NodeId(1), 1)]);

        let u = opt.mode_indicator(&p).unwrap();
        assert_eq!(u.get(NodeId(0)), Some(Mode(1)));
        assert_eq!(u.get(NodeId(1)), Some(Mode(1)));
    }

    #[test]
    fn expensive_switching_is_never_used() {
        let tree = ScenarioTree::uniform(3, 2, 1.0).unwrap();
        let p = SwitchingProblem::from_fns(tree, 3, |_, _| 0.0, |_, _, _| 1.0, |_, _| 0.0).unwrap();
        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        for m in p.mode_iter() {
            assert!(extract_strategy(&p, &y, p.tree().root(), m).is_empty());
        }
    }

    #[test]
    fn argmax_tie_picks_smallest_mode() {
        let tree = ScenarioTree::uniform(1, 1, 1.0).unwrap();
        let p = SwitchingProblem::from_fns(
            tree,
            3,
            |m, _| if m == Mode(0) { 0.0 } else { 1.0 },
            |_, _, _| 0.25,
            |_, _| 0.0,
        )
        .unwrap();
        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        let s = extract_strategy(&p, &y, NodeId(0), Mode(0));
        assert_eq!(s.paths()[0].switches, vec![Switch { node: NodeId(0), to: Mode(1) }]);
    }

    #[test]
    fn zero_data_evaluates_to_zero() {
        let tree = ScenarioTree::uniform(2, 2, 1.0).unwrap();
        let p = SwitchingProblem::from_fns(tree, 2, |_, _| 0.0, |_, _, _| 0.0, |_, _| 0.0).unwrap();
        let s = Strategy::from_feedback(p.tree(), NodeId(0), Mode(0), |n, m, here| {
            (here == 0 && n.0 % 2 == 0).then_some(Mode(1 - m.0))
        });
        assert_eq!(evaluate(&p, &s).unwrap(), 0.0);
    }

    #[test]
    fn leaf_switches_are_free_and_uncounted() {
        let p = p1();
        let s = Strategy::new(
            NodeId(0),
            Mode(0),
            vec![PathPlan { leaf: NodeId(1), switches: vec![Switch { node: NodeId(1), to: Mode(1) }] }],
        );
        assert_eq!(num_switches(p.tree(), &s), vec![(NodeId(1), 0)]);
        assert_eq!(evaluate(&p, &s).unwrap(), 0.0);
        assert_eq!(s.mode_indicator(&p).unwrap().get(NodeId(1)), Some(Mode(0)));
    }

    #[test]
    fn decisions_form_matches_feedback_form() {
        let tree = ScenarioTree::uniform(2, 2, 1.0).unwrap();
        // First decision fires at node 1 (to mode 2) and at time 2 elsewhere;
        // second fires at node 3 (back to mode 1).
        let first =
            Decision { stop: StoppingRule::new(&tree, (0..7).map(|n| n == 1).collect()), select: vec![Mode(1); 7] };
        let second =
            Decision { stop: StoppingRule::new(&tree, (0..7).map(|n| n == 3).collect()), select: vec![Mode(0); 7] };
        let s = Strategy::from_decisions(&tree, NodeId(0), Mode(0), &[first, second]);
        let by_leaf = |leaf: usize| s.paths().iter().find(|p| p.leaf == NodeId(leaf)).unwrap().switches.clone();
        assert_eq!(by_leaf(3), vec![Switch { node: NodeId(1), to: Mode(1) }]);
        assert_eq!(by_leaf(5), Vec::<Switch>::new());

        let p = SwitchingProblem::from_fns(tree, 2, |m, _| m.0 as f64, |_, _, _| 0.1, |_, _| 0.0).unwrap();
        // Leaves 3 and 4 (below node 1) earn 1 at node 1 after paying 0.1.
        assert!((evaluate(&p, &s).unwrap() - 0.5 * 0.9).abs() < 1e-15);
    }

    #[test]
    fn evaluate_rejects_inadmissible() {
        let p = p1();
        let s = Strategy::new(
            NodeId(0),
            Mode(0),
            vec![PathPlan { leaf: NodeId(1), switches: vec![Switch { node: NodeId(0), to: Mode(0) }] }],
        );
        assert!(matches!(evaluate(&p, &s), Err(StrategyError::Inadmissible(_))));
    }
}

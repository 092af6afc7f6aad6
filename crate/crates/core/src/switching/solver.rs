use thiserror::Error;

use super::{Mode, SwitchingProblem, ValueFamily};
use crate::exec;
use crate::lattice::{AdaptedProcess, NodeId};

pub const DEFAULT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("no fixed point after {iterations} iterations (last change {last_change:e}); check the cost assumptions")]
    NonConvergence { iterations: usize, last_change: f64 },
}

/// Fixed point of the switching recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: ValueFamily,
    /// Number of `n -> n + 1` steps taken until the change fell under `tol`.
    pub iterations: usize,
    /// Largest node-wise violation of the fixed-point equation.
    pub residual: f64,
}

/// Best value reachable by leaving mode `i` immediately: the terminal reward
/// at leaves, `max_{j != i} (Y^j - gamma_{i,j})` elsewhere.
pub fn obstacle(problem: &SwitchingProblem, mode: Mode, y: &ValueFamily) -> AdaptedProcess {
    let tree = problem.tree();
    AdaptedProcess::from_fn(tree, |n| {
        if tree.is_leaf(n) {
            problem.terminal(mode).get(n)
        } else {
            switch_value(problem, mode, y, n)
        }
    })
}

fn switch_value(problem: &SwitchingProblem, mode: Mode, y: &ValueFamily, node: NodeId) -> f64 {
    problem
        .mode_iter()
        .filter(|&j| j != mode)
        .map(|j| y.value(j, node) - problem.gamma(mode, j).get(node))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Backward induction for one mode. With `prev = None` no switching is
/// allowed; otherwise the obstacle is built from the previous iterate.
fn mode_values(problem: &SwitchingProblem, mode: Mode, prev: Option<&ValueFamily>) -> AdaptedProcess {
    let tree = problem.tree();
    let terminal = problem.terminal(mode);
    let mut y = vec![0.0; tree.len()];
    for n in tree.backward_order() {
        y[n.0] = if tree.is_leaf(n) {
            terminal.get(n)
        } else {
            let hold = problem.step_reward(mode, n) + tree.expect_children(&y, n);
            match prev {
                Some(p) => hold.max(switch_value(problem, mode, p, n)),
                None => hold,
            }
        };
    }
    AdaptedProcess::from_vec(y)
}

fn step(problem: &SwitchingProblem, prev: Option<&ValueFamily>) -> ValueFamily {
    ValueFamily::new(exec::map_indices(problem.modes(), |i| mode_values(problem, Mode(i), prev)))
}

/// Values of the problem restricted to at most `n` switches.
pub fn solve_n_switches(problem: &SwitchingProblem, n: usize) -> ValueFamily {
    let mut y = step(problem, None);
    for _ in 0..n {
        y = step(problem, Some(&y));
    }
    y
}

/// Iteration budget `N (m - 1) + 1`.
pub fn iteration_cap(problem: &SwitchingProblem) -> usize {
    problem.tree().horizon() * (problem.modes() - 1) + 1
}

/// Iterates the at-most-n-switches recursion until the largest change across
/// all modes and nodes is at most `tol`.
pub fn solve(problem: &SwitchingProblem, tol: f64) -> Result<Solution, SolveError> {
    let cap = iteration_cap(problem);
    let mut y = step(problem, None);
    let mut last_change = f64::INFINITY;
    for k in 1..=cap {
        let next = step(problem, Some(&y));
        last_change = next.max_abs_diff(&y);
        y = next;
        if last_change <= tol {
            let residual = fixed_point_residual(problem, &y);
            return Ok(Solution { values: y, iterations: k, residual });
        }
    }
    Err(SolveError::NonConvergence { iterations: cap, last_change })
}

/// `max |Y^i - max(psi_i dt + E[Y^i], U^i)|` over interior nodes and modes,
/// together with `|Y^i - Gamma_i|` at the leaves.
pub fn fixed_point_residual(problem: &SwitchingProblem, y: &ValueFamily) -> f64 {
    let tree = problem.tree();
    let mut worst: f64 = 0.0;
    for mode in problem.mode_iter() {
        let yi = y.get(mode);
        for n in tree.node_ids() {
            let target = if tree.is_leaf(n) {
                problem.terminal(mode).get(n)
            } else {
                let hold = problem.step_reward(mode, n) + tree.expect_children(yi.values(), n);
                hold.max(switch_value(problem, mode, y, n))
            };
            worst = worst.max((yi.get(n) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ScenarioTree;
    use crate::switching::fixtures::p1;

    #[test]
    fn zero_data_values_vanish() {
        let tree = ScenarioTree::uniform(2, 2, 1.0).unwrap();
        let p = SwitchingProblem::from_fns(tree, 3, |_, _| 0.0, |_, _, _| 0.5, |_, _| 0.0).unwrap();
        let y0 = solve_n_switches(&p, 0);
        assert!(y0.processes().iter().all(|y| y.values().iter().all(|&v| v == 0.0)));
        let sol = solve(&p, DEFAULT_TOL).unwrap();
        assert!(sol.values.processes().iter().all(|y| y.values().iter().all(|&v| v == 0.0)));
        assert_eq!(sol.iterations, 1);
    }

    #[test]
    fn p1_no_switch_values() {
        let y = solve_n_switches(&p1(), 0);
        assert_eq!(y.value(Mode(0), NodeId(0)), 0.0);
        assert_eq!(y.value(Mode(1), NodeId(0)), 1.0);
    }

    #[test]
    fn p1_one_switch_values() {
        // From mode 1: stay earns 0, switching at time 0 earns 1 - 0.4.
        let p = p1();
        let y = solve_n_switches(&p, 1);
        assert!((y.value(Mode(0), NodeId(0)) - 0.6).abs() < 1e-12);
        assert!((y.value(Mode(1), NodeId(0)) - 1.0).abs() < 1e-12);
        let sol = solve(&p, DEFAULT_TOL).unwrap();
        assert_eq!(sol.values, y);
        assert!(sol.iterations <= iteration_cap(&p));
        assert!(sol.residual <= DEFAULT_TOL);
    }

    #[test]
    fn obstacle_examples() {
        let p = p1();
        let y =
            ValueFamily::new(vec![AdaptedProcess::constant(p.tree(), 0.0), AdaptedProcess::constant(p.tree(), 1.0)]);
        let u = obstacle(&p, Mode(0), &y);
        assert!((u.get(NodeId(0)) - 0.6).abs() < 1e-15);
        // Leaf takes the terminal reward regardless of Y.
        assert_eq!(u.get(NodeId(1)), 0.0);

        let tree = ScenarioTree::uniform(1, 1, 1.0).unwrap();
        let p =
            SwitchingProblem::from_fns(tree, 3, |_, _| 0.0, |_, j, _| if j == Mode(1) { 0.5 } else { 0.3 }, |_, _| 0.0)
                .unwrap();
        let y = ValueFamily::new(vec![
            AdaptedProcess::constant(p.tree(), 0.0),
            AdaptedProcess::constant(p.tree(), 1.0),
            AdaptedProcess::constant(p.tree(), 1.0),
        ]);
        assert!((obstacle(&p, Mode(0), &y).get(NodeId(0)) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn arbitrage_loop_does_not_converge() {
        let tree = ScenarioTree::uniform(2, 1, 1.0).unwrap();
        let p = SwitchingProblem::from_fns(
            tree,
            2,
            |_, _| 0.0,
            |i, _, _| if i == Mode(0) { -1.0 } else { 0.0 },
            |_, _| 0.0,
        )
        .unwrap();
        assert!(matches!(solve(&p, DEFAULT_TOL), Err(SolveError::NonConvergence { iterations: 3, .. })));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let tree = ScenarioTree::uniform(4, 2, 0.25).unwrap();
        let p = SwitchingProblem::from_fns(
            tree,
            3,
            |m, n| ((n.0 * 7 + m.0 * 3) % 5) as f64 - 2.0,
            |i, j, n| 0.3 + 0.01 * ((i.0 + 2 * j.0 + n.0) % 4) as f64,
            |m, n| (m.0 as f64) - 0.1 * (n.0 % 3) as f64,
        )
        .unwrap();
        let a = solve(&p, DEFAULT_TOL).unwrap();
        let b = exec::serial(|| solve(&p, DEFAULT_TOL).unwrap());
        assert_eq!(a, b);
    }
}

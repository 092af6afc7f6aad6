#![allow(dead_code)]

use optswitch::generate::random_martingale;
use optswitch::lattice::NodeSpec;
use optswitch::{AdaptedProcess, Mode, ScenarioTree, SwitchingProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tree of the given depth where every node has 1 to `max_branch` children
/// with random, non-uniform probabilities.
pub fn random_tree(rng: &mut impl Rng, depth: usize, max_branch: usize) -> ScenarioTree {
    let mut specs = vec![NodeSpec { id: 0, time: 0, parent: None, cond_prob: 1.0 }];
    let mut frontier = vec![0usize];
    for t in 1..=depth {
        let mut next = Vec::new();
        for &parent in &frontier {
            let k = rng.gen_range(1..=max_branch);
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            for wi in w {
                let id = specs.len();
                specs.push(NodeSpec { id, time: t, parent: Some(parent), cond_prob: wi / total });
                next.push(id);
            }
        }
        frontier = next;
    }
    ScenarioTree::new(&specs, 1.0 / depth.max(1) as f64).expect("valid random tree")
}

pub fn random_process(tree: &ScenarioTree, rng: &mut impl Rng, lo: f64, hi: f64) -> AdaptedProcess {
    AdaptedProcess::from_fn(tree, |_| rng.gen_range(lo..hi))
}

/// Problem on an arbitrary tree with signed costs that satisfy the cost
/// assumptions: `gamma_{i,j} = phi_j - phi_i + c_{i,j}` with `c` in
/// `[0.2, 0.35)`, terminal rewards aligned with the potential.
pub fn random_problem(tree: ScenarioTree, modes: usize, rng: &mut impl Rng) -> SwitchingProblem {
    let len = tree.len();
    let phi: Vec<Vec<f64>> = (0..modes).map(|_| (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
    let c: Vec<f64> = (0..modes * modes * len).map(|_| rng.gen_range(0.2..0.35)).collect();
    let psi: Vec<f64> = (0..modes * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let e: Vec<f64> = (0..modes * len).map(|_| rng.gen_range(0.0..0.1)).collect();
    SwitchingProblem::from_fns(
        tree,
        modes,
        |m, n| psi[m.0 * len + n.0],
        |i, j, n| phi[j.0][n.0] - phi[i.0][n.0] + c[(i.0 * modes + j.0) * len + n.0],
        |m, n| phi[m.0][n.0] + g[n.0] + e[m.0 * len + n.0],
    )
    .unwrap()
}

/// Random martingale on any tree.
pub fn martingale(tree: &ScenarioTree, rng: &mut impl Rng, scale: f64) -> AdaptedProcess {
    AdaptedProcess::new(tree, random_martingale(tree, rng, scale)).unwrap()
}

pub fn all_modes(p: &SwitchingProblem) -> Vec<Mode> {
    p.mode_iter().collect()
}

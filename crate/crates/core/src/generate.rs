//! Seeded random problems that satisfy the cost assumptions by construction.
//!
//! The tree is a full `branching`-ary tree of the given depth with uniform
//! edge probabilities and `dt = 1 / depth`. Running rewards are uniform on
//! `[-1, 1]`. Costs take the form `gamma_{i,j} = phi_j - phi_i + c_{i,j}` with
//! a per-mode potential `phi` and `c` uniform on `[0.2, 0.35)`, so the chained
//! margin `c_{i,j} + c_{j,k} - c_{i,k}` is at least `0.05`. Terminal rewards
//! are `Gamma_i = phi_i + g + e_i` with a common `g` uniform on `[-1, 1]` and
//! `e_i` uniform on `[0, 0.1]`, which keeps terminal consistency since
//! `e_j - e_i <= 0.1 < c_{i,j}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{AdaptedProcess, ScenarioTree};
use crate::switching::SwitchingProblem;

/// Shape of the generated switching costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostKind {
    /// Potential uniform on `[-0.5, 0.5]` per node, so costs take both signs.
    #[default]
    Signed,
    /// Potential is a martingale and `c` is constant, so every cost is a martingale.
    Martingale,
    /// No potential; costs are `c` and hence positive.
    NonNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub depth: usize,
    pub branching: usize,
    pub modes: usize,
    pub costs: CostKind,
}

impl GenConfig {
    pub fn new(seed: u64, depth: usize, branching: usize, modes: usize) -> Self {
        Self { seed, depth, branching, modes, costs: CostKind::Signed }
    }

    pub fn with_costs(mut self, costs: CostKind) -> Self {
        self.costs = costs;
        self
    }
}

/// Nodes of a full tree, refusing shapes whose node count overflows.
pub fn node_count(depth: usize, branching: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut level: usize = 1;
    for _ in 0..=depth {
        total = total.checked_add(level)?;
        level = level.checked_mul(branching)?;
    }
    Some(total)
}

pub fn generate(cfg: &GenConfig) -> SwitchingProblem {
    assert!(cfg.modes >= 2, "at least two modes");
    assert!(cfg.branching >= 1, "branching must be positive");
    let dt = if cfg.depth == 0 { 1.0 } else { 1.0 / cfg.depth as f64 };
    let tree = ScenarioTree::uniform(cfg.depth, cfg.branching, dt).expect("full trees are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.modes;
    let len = tree.len();

    let psi: Vec<AdaptedProcess> = (0..m)
        .map(|_| AdaptedProcess::new(&tree, (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap())
        .collect();

    let phi: Vec<Vec<f64>> = (0..m)
        .map(|_| match cfg.costs {
            CostKind::Signed => (0..len).map(|_| rng.gen_range(-0.5..=0.5)).collect(),
            CostKind::Martingale => random_martingale(&tree, &mut rng, 0.5),
            CostKind::NonNegative => vec![0.0; len],
        })
        .collect();

    let mut gamma = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            if i == j {
                gamma.push(AdaptedProcess::constant(&tree, 0.0));
                continue;
            }
            let c: Vec<f64> = match cfg.costs {
                CostKind::Martingale => vec![rng.gen_range(0.2..0.35); len],
                _ => (0..len).map(|_| rng.gen_range(0.2..0.35)).collect(),
            };
            let g = (0..len).map(|n| phi[j][n] - phi[i][n] + c[n]).collect();
            gamma.push(AdaptedProcess::new(&tree, g).unwrap());
        }
    }

    let mut terminal = vec![vec![0.0; len]; m];
    for &leaf in tree.leaves() {
        let g = rng.gen_range(-1.0..=1.0);
        for (i, t) in terminal.iter_mut().enumerate() {
            t[leaf.0] = phi[i][leaf.0] + g + rng.gen_range(0.0..=0.1);
        }
    }
    let terminal = terminal.into_iter().map(|t| AdaptedProcess::new(&tree, t).unwrap()).collect();
    SwitchingProblem::new(tree, psi, gamma, terminal).expect("generated data is finite with zero diagonal")
}

/// Martingale started uniformly on `[-scale, scale]` whose uniform steps are
/// centred under the edge probabilities.
pub fn random_martingale(tree: &ScenarioTree, rng: &mut impl Rng, scale: f64) -> Vec<f64> {
    let mut x = vec![0.0; tree.len()];
    x[tree.root().0] = rng.gen_range(-scale..=scale);
    for t in 0..tree.horizon() {
        for &n in tree.nodes_at(t) {
            let ch = tree.children(n);
            let steps: Vec<f64> = ch.iter().map(|_| rng.gen_range(-scale..=scale)).collect();
            let mean: f64 = ch.iter().zip(&steps).map(|(&c, s)| tree.cond_prob(c) * s).sum();
            for (&c, s) in ch.iter().zip(&steps) {
                x[c.0] = x[n.0] + s - mean;
            }
        }
    }
    x
}

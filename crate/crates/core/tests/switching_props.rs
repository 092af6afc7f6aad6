mod common;

use common::{random_problem, random_tree, rng};
use optswitch::oracle::enumerate_policies;
use optswitch::snell::snell_envelope;
use optswitch::switching::{
    evaluate, extract_strategy, fixed_point_residual, iteration_cap, obstacle, solve, solve_n_switches, DEFAULT_TOL,
};
use optswitch::validate::check_admissible;
use optswitch::Mode;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn values_increase_with_switch_budget(seed in any::<u64>(), depth in 1usize..5, modes in 2usize..5) {
        let mut r = rng(seed);
        let p = random_problem(random_tree(&mut r, depth, 2), modes, &mut r);
        let mut prev = solve_n_switches(&p, 0);
        for n in 1..=iteration_cap(&p) {
            let next = solve_n_switches(&p, n);
            for i in p.mode_iter() {
                for node in p.tree().node_ids() {
                    prop_assert!(next.value(i, node) >= prev.value(i, node) - 1e-12);
                }
            }
            prev = next;
        }
        let sol = solve(&p, DEFAULT_TOL).unwrap();
        prop_assert!(sol.iterations <= iteration_cap(&p));
        prop_assert!(sol.residual <= DEFAULT_TOL);
        prop_assert!(fixed_point_residual(&p, &sol.values) <= DEFAULT_TOL);
        for i in p.mode_iter() {
            for &leaf in p.tree().leaves() {
                prop_assert_eq!(sol.values.value(i, leaf), p.terminal(i).get(leaf));
            }
        }
    }

    #[test]
    fn verification_identity_holds_everywhere(seed in any::<u64>(), depth in 1usize..5, modes in 2usize..5) {
        let mut r = rng(seed);
        let p = random_problem(random_tree(&mut r, depth, 2), modes, &mut r);
        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        for node in p.tree().node_ids() {
            for i in p.mode_iter() {
                let s = extract_strategy(&p, &y, node, i);
                prop_assert!(check_admissible(&s, &p).is_empty());
                prop_assert!((evaluate(&p, &s).unwrap() - y.value(i, node)).abs() <= 1e-9);
                for plan in s.paths() {
                    for w in plan.switches.windows(2) {
                        prop_assert!(w[0].node != w[1].node || p.tree().is_leaf(w[0].node));
                    }
                }
            }
        }
    }

    #[test]
    fn accumulated_values_are_snell_envelopes(seed in any::<u64>(), depth in 1usize..5, modes in 2usize..4) {
        let mut r = rng(seed);
        let p = random_problem(random_tree(&mut r, depth, 3), modes, &mut r);
        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        for i in p.mode_iter() {
            let acc = p.accumulated_reward(i);
            let u = obstacle(&p, i, &y).zip_with(&acc, |a, b| a + b);
            let z = snell_envelope(p.tree(), &u);
            let hat = y.get(i).zip_with(&acc, |a, b| a + b);
            for node in p.tree().node_ids() {
                prop_assert!((z.get(node) - hat.get(node)).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn extracted_strategy_dominates_every_policy() {
    for seed in 0..30 {
        let mut r = rng(seed);
        let p = random_problem(random_tree(&mut r, 2, 2), 2 + (seed as usize % 2), &mut r);
        let y = solve(&p, DEFAULT_TOL).unwrap().values;
        let k = p.tree().horizon() * (p.modes() - 1);
        for i in p.mode_iter() {
            let best = y.value(i, p.tree().root());
            for s in enumerate_policies(&p, p.tree().root(), i, k).unwrap() {
                assert!(evaluate(&p, &s).unwrap() <= best + 1e-9, "seed {seed}");
            }
        }
    }
}

#[test]
fn zero_rewards_with_nonnegative_costs_give_zero() {
    let mut r = rng(3);
    let tree = random_tree(&mut r, 3, 3);
    let p = optswitch::SwitchingProblem::from_fns(tree, 3, |_, _| 0.0, |i, j, _| 0.1 * (i.0 + j.0) as f64, |_, _| 0.0)
        .unwrap();
    let y = solve(&p, DEFAULT_TOL).unwrap().values;
    assert!(y.processes().iter().all(|v| v.values().iter().all(|&x| x == 0.0)));
    assert!(extract_strategy(&p, &y, p.tree().root(), Mode(2)).is_empty());
}

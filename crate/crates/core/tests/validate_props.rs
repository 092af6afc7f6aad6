mod common;

use common::{random_problem, random_tree, rng};
use optswitch::generate::{generate, CostKind, GenConfig};
use optswitch::spec::ProblemSpec;
use optswitch::switching::{extract_strategy, solve, DEFAULT_TOL};
use optswitch::validate::{
    check_assumption_costs, check_cost_bound, check_hypothesis_m, construct_for_case, construct_martingale_family,
    Construction, HypothesisCase,
};
use optswitch::{Mode, ScenarioTree, SwitchingProblem};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_mode_family_dominates_negated_costs(seed in any::<u64>(), depth in 1usize..5) {
        let mut r = rng(seed);
        let p = random_problem(random_tree(&mut r, depth, 3), 2, &mut r);
        let fam = construct_for_case(&p, HypothesisCase::TwoModeDoobMeyer).unwrap();
        prop_assert!(check_hypothesis_m(&fam, &p).is_empty());
        for node in p.tree().node_ids() {
            prop_assert!(fam.get(Mode(0), Mode(1)).get(node) >= -p.gamma(Mode(0), Mode(1)).get(node) - 1e-12);
        }
    }

    #[test]
    fn cost_bound_holds_for_martingale_and_non_negative_cases(seed in any::<u64>(), depth in 0usize..4, modes in 2usize..4) {
        for (kind, case) in [
            (CostKind::Martingale, HypothesisCase::MartingaleCosts),
            (CostKind::NonNegative, HypothesisCase::NonNegativeCosts),
        ] {
            let p = generate(&GenConfig::new(seed, depth, 2, modes).with_costs(kind));
            let fam = construct_for_case(&p, case).unwrap();
            let y = solve(&p, DEFAULT_TOL).unwrap().values;
            for i in p.mode_iter() {
                let s = extract_strategy(&p, &y, p.tree().root(), i);
                prop_assert!(check_cost_bound(&p, &s, &fam).holds);
            }
        }
    }

    #[test]
    fn generated_specs_round_trip(seed in any::<u64>(), depth in 0usize..4, branching in 1usize..3, modes in 2usize..4) {
        let p = generate(&GenConfig::new(seed, depth, branching, modes));
        let text = ProblemSpec::from_problem(&p).to_json();
        let back = ProblemSpec::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
        prop_assert_eq!(back.to_problem().unwrap(), p);
    }
}

#[test]
fn each_case_passes_hypothesis_check() {
    for seed in 0..30 {
        for (kind, case) in [
            (CostKind::Martingale, HypothesisCase::MartingaleCosts),
            (CostKind::NonNegative, HypothesisCase::NonNegativeCosts),
        ] {
            let p = generate(&GenConfig::new(seed, 3, 2, 3).with_costs(kind));
            let fam = construct_for_case(&p, case).unwrap();
            assert!(check_hypothesis_m(&fam, &p).is_empty(), "seed {seed} {case}");
        }
    }
}

#[test]
fn symmetric_positive_constant_costs_pass_exactly() {
    for m in 2..5 {
        let tree = ScenarioTree::uniform(2, 2, 0.5).unwrap();
        let p = SwitchingProblem::from_fns(tree, m, |i, _| i.0 as f64, |_, _, _| 0.3, |_, _| 0.0).unwrap();
        assert!(check_assumption_costs(&p).is_empty());
    }
}

#[test]
fn construction_precedence() {
    let p = generate(&GenConfig::new(4, 2, 2, 2).with_costs(CostKind::NonNegative));
    assert!(matches!(
        construct_martingale_family(&p),
        Construction::Found { case: HypothesisCase::TwoModeDoobMeyer, .. }
    ));
    let p = generate(&GenConfig::new(4, 2, 2, 3).with_costs(CostKind::NonNegative));
    assert!(matches!(
        construct_martingale_family(&p),
        Construction::Found { case: HypothesisCase::NonNegativeCosts, .. }
    ));
    let p = generate(&GenConfig::new(4, 2, 2, 3).with_costs(CostKind::Martingale));
    assert!(matches!(
        construct_martingale_family(&p),
        Construction::Found { case: HypothesisCase::MartingaleCosts, .. }
    ));
}

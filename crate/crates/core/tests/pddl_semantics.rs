mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{instance, oracle_valid};
use planbench_core::blocksworld::{block_names, blocksworld_domain, towers_state, Vocabulary};
use planbench_core::pddl::{
    apply, emit_domain, emit_problem, execute, ground, ground_all, parse_domain, parse_problem, validate, GoalKind,
    GroundAction, Plan, Problem,
};

fn kind(partial: bool) -> GoalKind {
    if partial {
        GoalKind::Partial
    } else {
        GoalKind::Full
    }
}

/// Every grounding, including repeated objects.
fn all_groundings(objects: &[String]) -> Vec<GroundAction> {
    let d = blocksworld_domain();
    let mut out = Vec::new();
    for a in &d.actions {
        let k = a.params.len();
        let mut idx = vec![0; k];
        loop {
            let args: Vec<String> = idx.iter().map(|&i| objects[i].clone()).collect();
            out.push(ground(a, &args).unwrap());
            let mut j = 0;
            while j < k {
                idx[j] += 1;
                if idx[j] < objects.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == k {
                break;
            }
        }
    }
    out
}

#[test]
fn validator_matches_physics_on_every_short_sequence() {
    let names = block_names(2);
    let v = Vocabulary::default();
    let acts = all_groundings(&names);
    assert_eq!(acts.len(), 12);
    let inits = [
        towers_state(&vec![vec![0], vec![1]], &names, &v),
        towers_state(&vec![vec![0, 1]], &names, &v),
        towers_state(&vec![vec![1, 0]], &names, &v),
    ];
    let mut checked = 0;
    for init in &inits {
        let problem = Problem {
            name: "two".into(),
            domain_name: "blocksworld".into(),
            objects: names.clone(),
            init: init.clone(),
            goal: vec![v.on("a", "b")],
            goal_kind: GoalKind::Partial,
        };
        let mut frontier: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..=4 {
            let mut next = Vec::new();
            for seq in &frontier {
                let plan = Plan::new(seq.iter().map(|&i| acts[i].clone()).collect());
                let steps: Vec<(String, Vec<String>)> =
                    plan.steps.iter().map(|g| (g.name.clone(), g.args.clone())).collect();
                assert_eq!(
                    validate(&problem, &plan).valid,
                    oracle_valid(&problem.init, &problem.goal, &steps),
                    "{:?}",
                    plan.tokens()
                );
                checked += 1;
                for i in 0..acts.len() {
                    let mut s = seq.clone();
                    s.push(i);
                    next.push(s);
                }
            }
            frontier = next;
        }
    }
    assert_eq!(checked, 3 * (1 + 12 + 144 + 1728 + 20736));
}

#[test]
fn blocksworld_domain_round_trips() {
    let d = blocksworld_domain();
    assert_eq!(parse_domain(&emit_domain(&d)).unwrap(), d);
}

proptest! {
    #[test]
    fn generated_problems_round_trip(n in 3usize..=5, partial: bool, seed: u64) {
        let d = blocksworld_domain();
        let p = instance(n, kind(partial), seed);
        prop_assert_eq!(parse_problem(&emit_problem(&p), &d).unwrap(), p);
    }

    #[test]
    fn apply_touches_only_effects(n in 2usize..=5, seed: u64, walk in prop::collection::vec(0usize..1000, 0..12)) {
        let d = blocksworld_domain();
        let p = instance(n.max(3), GoalKind::Full, seed);
        let acts = ground_all(&d, &p.objects);
        let mut state = p.init.clone();
        for pick in walk {
            let options: Vec<&GroundAction> = acts.iter().filter(|a| a.precondition.is_subset(state.atoms())).collect();
            let a = options[pick % options.len()];
            let next = apply(&state, a).unwrap();
            let touched: BTreeSet<_> = a.add.union(&a.del).cloned().collect();
            for atom in state.iter().chain(next.iter()) {
                if !touched.contains(atom) {
                    prop_assert_eq!(state.contains(atom), next.contains(atom));
                }
            }
            for atom in &a.add {
                prop_assert!(next.contains(atom));
            }
            for atom in &a.del {
                prop_assert!(!next.contains(atom));
            }
            state = next;
        }
    }

    #[test]
    fn execution_is_deterministic(seed: u64, picks in prop::collection::vec(0usize..1000, 0..8)) {
        let d = blocksworld_domain();
        let p = instance(4, GoalKind::Full, seed);
        let acts = ground_all(&d, &p.objects);
        let plan = Plan::new(picks.iter().map(|&i| acts[i % acts.len()].clone()).collect());
        prop_assert_eq!(execute(&p.init, &plan), execute(&p.init, &plan));
    }

    #[test]
    fn goal_subsets_keep_plans_valid(n in 3usize..=5, seed: u64, mask in prop::collection::vec(any::<bool>(), 5)) {
        let d = blocksworld_domain();
        let p = instance(n, GoalKind::Full, seed);
        let plan = planbench_core::planner::solve_optimal(&d, &p).unwrap().0;
        prop_assert!(validate(&p, &plan).valid);
        let sub: Vec<_> = p.goal.iter().zip(mask.iter().cycle()).filter(|(_, m)| **m).map(|(a, _)| a.clone()).collect();
        if !sub.is_empty() {
            let q = Problem { goal: sub, ..p.clone() };
            prop_assert!(validate(&q, &plan).valid);
        }
    }
}

//! Flaw-directed stochastic local search that turns a candidate plan into a
//! valid one, falling back to a satisficing planner when the search stalls.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{ground_all, validate, Atom, Domain, GroundAction, Plan, Problem, State};
use crate::planner::{solve_satisficing, Budget, PlanError};
use crate::stats::plan_distance;

/// An inapplicable step (`step` = its index) or, with `step = None`, the
/// goals left unmet at the end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flaw {
    pub step: Option<usize>,
    pub missing: BTreeSet<Atom>,
}

fn apply_in_place(state: &mut BTreeSet<Atom>, a: &GroundAction) {
    for d in &a.del {
        state.remove(d);
    }
    state.extend(a.add.iter().cloned());
}

/// Simulates the plan, skipping inapplicable steps.
pub fn flaws(problem: &Problem, plan: &Plan) -> Vec<Flaw> {
    flaws_from(problem.init.atoms(), &problem.goal, &plan.steps)
}

fn flaws_from(init: &BTreeSet<Atom>, goal: &[Atom], steps: &[GroundAction]) -> Vec<Flaw> {
    let mut state = init.clone();
    let mut out = Vec::new();
    for (i, a) in steps.iter().enumerate() {
        let missing: BTreeSet<Atom> = a.precondition.difference(&state).cloned().collect();
        if missing.is_empty() {
            apply_in_place(&mut state, a);
        } else {
            out.push(Flaw {
                step: Some(i),
                missing,
            });
        }
    }
    let unmet: BTreeSet<Atom> = goal.iter().filter(|g| !state.contains(g)).cloned().collect();
    if !unmet.is_empty() {
        out.push(Flaw {
            step: None,
            missing: unmet,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Probability of a random improving-or-equal move instead of the best.
    pub epsilon: f64,
    /// Non-improving steps before restarting from the seed plan.
    pub restart_after: usize,
    /// Total local-search steps before the planner fallback.
    pub max_steps: usize,
    pub rng_seed: u64,
    pub fallback_budget: Budget,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            epsilon: 0.1,
            restart_after: 200,
            max_steps: 5000,
            rng_seed: 0,
            fallback_budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairResult {
    pub plan: Plan,
    pub seed_plan: Plan,
    pub edit_distance: usize,
    pub iterations: usize,
    pub fell_back_to_planner: bool,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepairError {
    #[error("local search failed and the fallback planner gave up: {0}")]
    Fallback(#[from] PlanError),
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Delete(usize),
    Insert(usize, usize),
    Replace(usize, usize),
}

impl Move {
    fn apply(self, plan: &[usize]) -> Vec<usize> {
        let mut out = plan.to_vec();
        match self {
            Move::Delete(i) => {
                out.remove(i);
            }
            Move::Insert(i, a) => out.insert(i, a),
            Move::Replace(i, a) => out[i] = a,
        }
        out
    }
}

/// Lexicographic: flaw count, then missing atoms in total.
type Cost = (usize, usize);

/// The first flaw of a plan together with the state just before it.
struct Front {
    pos: usize,
    step: Option<usize>,
    missing: BTreeSet<Atom>,
    state: BTreeSet<Atom>,
}

/// Plans are sequences of indices into `actions`.
struct Search<'a> {
    init: &'a BTreeSet<Atom>,
    goal: &'a [Atom],
    actions: Vec<GroundAction>,
    achievers: HashMap<Atom, Vec<usize>>,
}

impl Search<'_> {
    /// Cost of `plan[from..]` executed from `state`, skipping failures.
    fn cost_from(&self, mut state: BTreeSet<Atom>, plan: &[usize]) -> Cost {
        let (mut count, mut missing) = (0, 0);
        for &i in plan {
            let a = &self.actions[i];
            let m = a.precondition.iter().filter(|p| !state.contains(*p)).count();
            if m == 0 {
                apply_in_place(&mut state, a);
            } else {
                count += 1;
                missing += m;
            }
        }
        let unmet = self.goal.iter().filter(|g| !state.contains(*g)).count();
        if unmet > 0 {
            count += 1;
            missing += unmet;
        }
        (count, missing)
    }

    fn front(&self, plan: &[usize]) -> Option<Front> {
        let mut state = self.init.clone();
        for (pos, &i) in plan.iter().enumerate() {
            let a = &self.actions[i];
            if !a.precondition.is_subset(&state) {
                let missing = a.precondition.difference(&state).cloned().collect();
                return Some(Front {
                    pos,
                    step: Some(pos),
                    missing,
                    state,
                });
            }
            apply_in_place(&mut state, a);
        }
        let missing: BTreeSet<Atom> = self.goal.iter().filter(|g| !state.contains(*g)).cloned().collect();
        (!missing.is_empty()).then_some(Front {
            pos: plan.len(),
            step: None,
            missing,
            state,
        })
    }

    fn neighbours(&self, front: &Front) -> Vec<Move> {
        let mut candidates: BTreeSet<usize> = BTreeSet::new();
        for atom in &front.missing {
            if let Some(list) = self.achievers.get(atom) {
                candidates.extend(list.iter().copied());
            }
        }
        let mut moves = Vec::new();
        if let Some(i) = front.step {
            moves.push(Move::Delete(i));
        }
        for &c in &candidates {
            moves.push(Move::Insert(front.pos, c));
            if let Some(i) = front.step {
                moves.push(Move::Replace(i, c));
            }
        }
        moves
    }
}

/// The longest prefix that executes from `init`, and the state it reaches.
fn executable_prefix(init: &State, plan: &[GroundAction]) -> (Vec<GroundAction>, State) {
    let mut state = init.atoms().clone();
    let mut prefix = Vec::new();
    for a in plan {
        if !a.precondition.is_subset(&state) {
            break;
        }
        apply_in_place(&mut state, a);
        prefix.push(a.clone());
    }
    (prefix, State::new(state))
}

/// Repairs `seed` into a plan that validates for `problem`. A valid seed
/// comes back unchanged.
pub fn repair(domain: &Domain, problem: &Problem, seed: &Plan, config: &RepairConfig) -> Result<RepairResult, RepairError> {
    let start = Instant::now();
    let finish = |plan: Plan, iterations: usize, fell_back: bool| RepairResult {
        edit_distance: plan_distance(seed, &plan),
        plan,
        seed_plan: seed.clone(),
        iterations,
        fell_back_to_planner: fell_back,
        wall_time: start.elapsed().as_secs_f64(),
    };

    let actions = ground_all(domain, &problem.objects);
    let mut achievers: HashMap<Atom, Vec<usize>> = HashMap::new();
    for (i, a) in actions.iter().enumerate() {
        for atom in &a.add {
            achievers.entry(atom.clone()).or_default().push(i);
        }
    }
    let search = Search {
        init: problem.init.atoms(),
        goal: &problem.goal,
        actions,
        achievers,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let index: HashMap<&GroundAction, usize> = search.actions.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let Some(seed_idx) = seed.steps.iter().map(|a| index.get(a).copied()).collect::<Option<Vec<usize>>>() else {
        // Steps outside the grounded action set can never execute; only the fallback applies.
        return fallback(domain, problem, &[], config).map(|p| finish(p, 0, true));
    };
    let seed_cost = search.cost_from(search.init.clone(), &seed_idx);
    let mut current = seed_idx.clone();
    let mut front = search.front(&current);
    let mut here = seed_cost;
    let mut best = (seed_cost, current.clone());
    let mut stale = 0;
    let mut iterations = 0;
    while let Some(f) = front.as_ref().filter(|_| iterations < config.max_steps) {
        iterations += 1;
        let moves = search.neighbours(f);
        if moves.is_empty() {
            break;
        }
        // Every move edits at or after `f.pos`, so evaluation resumes from there.
        let scored: Vec<(Cost, Move)> = moves
            .into_iter()
            .map(|m| {
                let plan = m.apply(&current);
                (search.cost_from(f.state.clone(), &plan[f.pos..]), m)
            })
            .collect();
        let pick = if rng.random_bool(config.epsilon) {
            let ok: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].0 <= here).collect();
            match ok.choose(&mut rng) {
                Some(&i) => i,
                None => rng.random_range(0..scored.len()),
            }
        } else {
            let low = scored.iter().map(|s| s.0).min().expect("nonempty");
            let ties: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].0 == low).collect();
            *ties.choose(&mut rng).expect("nonempty")
        };
        let (cost, m) = scored[pick];
        current = m.apply(&current);
        front = search.front(&current);
        here = cost;
        if cost < best.0 {
            best = (cost, current.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.restart_after {
                current = seed_idx.clone();
                front = search.front(&current);
                here = seed_cost;
                stale = 0;
            }
        }
    }
    let to_plan = |idx: &[usize]| Plan::new(idx.iter().map(|&i| search.actions[i].clone()).collect());
    if front.is_none() {
        return Ok(finish(to_plan(&current), iterations, false));
    }
    fallback(domain, problem, &to_plan(&best.1).steps, config).map(|p| finish(p, iterations, true))
}

/// Executable prefix of `best` followed by a satisficing plan from where it
/// ends; a plan from scratch if that point is a dead end.
fn fallback(domain: &Domain, problem: &Problem, best: &[GroundAction], config: &RepairConfig) -> Result<Plan, RepairError> {
    let (mut prefix, reached) = executable_prefix(&problem.init, best);
    let rest = Problem {
        init: reached,
        ..problem.clone()
    };
    let tail = match solve_satisficing(domain, &rest, config.fallback_budget) {
        Ok(tail) => tail,
        Err(PlanError::Unsolvable) => {
            prefix.clear();
            solve_satisficing(domain, problem, config.fallback_budget)?
        }
        Err(e) => return Err(e.into()),
    };
    prefix.extend(tail.steps);
    let plan = Plan::new(prefix);
    debug_assert!(validate(problem, &plan).valid);
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld::{blocksworld_domain, gen_instance, BlocksworldInstanceSpec};
    use crate::pddl::{ground_named, GoalKind};
    use crate::planner::solve_optimal;

    fn instance(seed: u64, n: usize) -> (Domain, Problem, Plan) {
        let d = blocksworld_domain();
        let p = gen_instance(&BlocksworldInstanceSpec {
            num_blocks: n,
            goal_kind: GoalKind::Full,
            seed,
        })
        .unwrap();
        let plan = solve_optimal(&d, &p).unwrap().0;
        (d, p, plan)
    }

    #[test]
    fn flaws_agree_with_validate() {
        let (d, p, plan) = instance(1, 3);
        assert!(flaws(&p, &plan).is_empty());
        let stack = ground_named(&d, "stack", &["a".into(), "b".into()]).unwrap();
        let flat = crate::blocksworld::towers_state(
            &vec![vec![0], vec![1], vec![2]],
            &p.objects,
            &Default::default(),
        );
        let q = Problem { init: flat, ..p.clone() };
        let f = flaws(&q, &Plan::new(vec![stack]));
        assert_eq!(f[0].step, Some(0));
        assert_eq!(f[0].missing.iter().map(|a| a.to_string()).collect::<Vec<_>>(), vec!["(holding a)"]);
    }

    #[test]
    fn valid_seed_is_untouched() {
        let (d, p, plan) = instance(2, 4);
        let r = repair(&d, &p, &plan, &RepairConfig::default()).unwrap();
        assert_eq!(r.plan, plan);
        assert_eq!(r.edit_distance, 0);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn single_deletion_is_patched_locally() {
        for seed in 0..20 {
            let (d, p, plan) = instance(seed, 4);
            for i in 0..plan.len() {
                let mut broken = plan.clone();
                broken.steps.remove(i);
                let r = repair(&d, &p, &broken, &RepairConfig::default()).unwrap();
                assert!(validate(&p, &r.plan).valid);
                assert!(r.edit_distance <= 2, "seed {seed} step {i}: {}", r.edit_distance);
                assert_eq!(r.edit_distance, plan_distance(&broken, &r.plan));
            }
        }
    }

    #[test]
    fn empty_seed_is_planned_from_scratch() {
        let (d, p, _) = instance(3, 5);
        let r = repair(&d, &p, &Plan::default(), &RepairConfig::default()).unwrap();
        assert!(validate(&p, &r.plan).valid);
    }

    #[test]
    fn fallback_splices_a_planner_suffix() {
        let (d, p, plan) = instance(4, 5);
        let cfg = RepairConfig {
            max_steps: 0,
            ..Default::default()
        };
        let mut broken = plan.clone();
        broken.steps.truncate(plan.len() / 2);
        let r = repair(&d, &p, &broken, &cfg).unwrap();
        assert!(r.fell_back_to_planner);
        assert!(validate(&p, &r.plan).valid);
        assert_eq!(r.plan.steps[..broken.len()], broken.steps[..]);
    }
}

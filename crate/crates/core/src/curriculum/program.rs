use std::collections::{BTreeMap, BTreeSet};

use crate::blocksworld::{supports, Support, Vocabulary};
use crate::pddl::{goal_satisfied, GoalKind, GroundAction, Plan, Problem};

/// A fixed plan-producing procedure shown through its traces.
#[derive(Clone, Copy)]
pub struct GeneralizationProgram {
    pub name: &'static str,
    pub applicable: fn(&Problem) -> bool,
    pub trace: fn(&Problem) -> Plan,
}

impl std::fmt::Debug for GeneralizationProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralizationProgram").field("name", &self.name).finish()
    }
}

/// Puts every stacked block on the table (topmost first, ties by name),
/// then builds each goal tower bottom-up, towers ordered by base name.
pub const UNSTACK_ALL_THEN_BUILD: GeneralizationProgram = GeneralizationProgram {
    name: "unstack-all-then-build",
    applicable: unstack_all_applicable,
    trace: unstack_all_trace,
};

pub fn program_by_name(name: &str) -> Option<GeneralizationProgram> {
    (name == UNSTACK_ALL_THEN_BUILD.name).then_some(UNSTACK_ALL_THEN_BUILD)
}

/// Goal towers bottom-up, ordered by base name. `None` unless the goal
/// places every object exactly once without cycles.
pub(crate) fn goal_towers(problem: &Problem, vocab: &Vocabulary) -> Option<Vec<Vec<String>>> {
    let mut below: BTreeMap<&str, Option<&str>> = BTreeMap::new();
    for a in &problem.goal {
        let entry = if a.predicate == vocab.on && a.args.len() == 2 {
            (a.args[0].as_str(), Some(a.args[1].as_str()))
        } else if a.predicate == vocab.on_table && a.args.len() == 1 {
            (a.args[0].as_str(), None)
        } else {
            return None;
        };
        if below.insert(entry.0, entry.1).is_some() {
            return None;
        }
    }
    let objects: BTreeSet<&str> = problem.objects.iter().map(String::as_str).collect();
    if below.keys().copied().collect::<BTreeSet<_>>() != objects {
        return None;
    }
    let mut above: BTreeMap<&str, &str> = BTreeMap::new();
    for (&top, &under) in &below {
        if let Some(under) = under {
            if !objects.contains(under) || above.insert(under, top).is_some() {
                return None;
            }
        }
    }
    let mut towers = Vec::new();
    let mut placed = 0;
    for (&base, &under) in &below {
        if under.is_some() {
            continue;
        }
        let mut tower = vec![base.to_string()];
        let mut cur = base;
        while let Some(&next) = above.get(cur) {
            tower.push(next.to_string());
            cur = next;
        }
        placed += tower.len();
        towers.push(tower);
    }
    (placed == objects.len()).then_some(towers)
}

fn unstack_all_applicable(problem: &Problem) -> bool {
    let vocab = Vocabulary::default();
    problem.goal_kind == GoalKind::Full
        && problem.init.contains(&vocab.arm_empty())
        && goal_towers(problem, &vocab).is_some()
        && supports(&problem.init, &vocab).len() == problem.objects.len()
}

fn step(name: &str, args: &[&str]) -> GroundAction {
    let domain = crate::blocksworld::blocksworld_domain();
    let args: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    crate::pddl::ground_named(&domain, name, &args).expect("blocksworld action")
}

fn unstack_all_trace(problem: &Problem) -> Plan {
    let vocab = Vocabulary::default();
    if goal_satisfied(&problem.init, &problem.goal) {
        return Plan::default();
    }
    let mut steps = Vec::new();
    let mut pos = supports(&problem.init, &vocab);
    loop {
        let stacked: BTreeSet<&String> = pos
            .values()
            .filter_map(|s| match s {
                Support::On(b) => Some(b),
                _ => None,
            })
            .collect();
        let next = pos
            .iter()
            .find(|(b, s)| matches!(s, Support::On(_)) && !stacked.contains(b))
            .map(|(b, s)| (b.clone(), s.clone()));
        let Some((top, Support::On(under))) = next else { break };
        steps.push(step("unstack", &[&top, &under]));
        steps.push(step("putdown", &[&top]));
        pos.insert(top, Support::Table);
    }
    for tower in goal_towers(problem, &vocab).unwrap_or_default() {
        for pair in tower.windows(2) {
            steps.push(step("pickup", &[&pair[1]]));
            steps.push(step("stack", &[&pair[1], &pair[0]]));
        }
    }
    Plan::new(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld::{block_names, towers_goal, towers_state};
    use crate::pddl::validate;

    fn problem(init: Vec<Vec<usize>>, goal: Vec<Vec<usize>>) -> Problem {
        let v = Vocabulary::default();
        let names = block_names(3);
        Problem {
            name: "p".into(),
            domain_name: "blocksworld".into(),
            objects: names.clone(),
            init: towers_state(&init, &names, &v),
            goal: towers_goal(&goal, &names, &v),
            goal_kind: GoalKind::Full,
        }
    }

    #[test]
    fn flat_start_builds_a_tower_in_four_steps() {
        let p = problem(vec![vec![0], vec![1], vec![2]], vec![vec![2, 1, 0]]);
        assert!((UNSTACK_ALL_THEN_BUILD.applicable)(&p));
        let plan = (UNSTACK_ALL_THEN_BUILD.trace)(&p);
        assert_eq!(plan.tokens(), vec!["(pickup b)", "(stack b c)", "(pickup a)", "(stack a b)"]);
        assert!(validate(&p, &plan).valid);
    }

    #[test]
    fn solved_instance_has_empty_trace() {
        let p = problem(vec![vec![0, 1], vec![2]], vec![vec![0, 1], vec![2]]);
        assert!((UNSTACK_ALL_THEN_BUILD.trace)(&p).is_empty());
    }

    #[test]
    fn unstacks_before_building() {
        let p = problem(vec![vec![0, 1, 2]], vec![vec![2, 1, 0]]);
        let plan = (UNSTACK_ALL_THEN_BUILD.trace)(&p);
        assert_eq!(
            plan.tokens()[..4],
            ["(unstack c b)", "(putdown c)", "(unstack b a)", "(putdown b)"]
        );
        assert!(validate(&p, &plan).valid);
    }

    #[test]
    fn partial_goals_are_not_applicable() {
        let mut p = problem(vec![vec![0], vec![1], vec![2]], vec![vec![0, 1], vec![2]]);
        p.goal.truncate(1);
        p.goal_kind = GoalKind::Partial;
        assert!(!(UNSTACK_ALL_THEN_BUILD.applicable)(&p));
        assert!(program_by_name("unstack-all-then-build").is_some());
    }
}

//! Test-only oracles that share no code with the library's semantics.
#![allow(dead_code)]

use std::collections::BTreeMap;

use planbench_core::blocksworld::{gen_instance, BlocksworldInstanceSpec};
use planbench_core::pddl::{Atom, GoalKind, Problem, State};

/// Blocks physics written directly: each block sits on the table, on
/// another block, or in the hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    /// `None` = on the table. Held blocks are absent.
    pub pos: BTreeMap<String, Option<String>>,
    pub held: Option<String>,
}

impl World {
    pub fn from_state(state: &State) -> World {
        let mut pos = BTreeMap::new();
        let mut held = None;
        for a in state.iter() {
            match (a.predicate.as_str(), a.args.as_slice()) {
                ("on", [x, y]) => {
                    pos.insert(x.clone(), Some(y.clone()));
                }
                ("on-table", [x]) => {
                    pos.insert(x.clone(), None);
                }
                ("holding", [x]) => held = Some(x.clone()),
                _ => {}
            }
        }
        World { pos, held }
    }

    fn covered(&self, b: &str) -> bool {
        self.pos.values().any(|p| p.as_deref() == Some(b))
    }

    pub fn step(&self, name: &str, args: &[String]) -> Option<World> {
        let mut w = self.clone();
        match (name, args) {
            ("pickup", [x]) => {
                if self.held.is_some() || self.pos.get(x) != Some(&None) || self.covered(x) {
                    return None;
                }
                w.pos.remove(x);
                w.held = Some(x.clone());
            }
            ("putdown", [x]) => {
                if self.held.as_ref() != Some(x) {
                    return None;
                }
                w.held = None;
                w.pos.insert(x.clone(), None);
            }
            ("stack", [x, y]) => {
                if self.held.as_ref() != Some(x) || x == y || !self.pos.contains_key(y) || self.covered(y) {
                    return None;
                }
                w.held = None;
                w.pos.insert(x.clone(), Some(y.clone()));
            }
            ("unstack", [x, y]) => {
                if self.held.is_some() || self.pos.get(x) != Some(&Some(y.clone())) || self.covered(x) {
                    return None;
                }
                w.pos.remove(x);
                w.held = Some(x.clone());
            }
            _ => return None,
        }
        Some(w)
    }

    pub fn holds(&self, atom: &Atom) -> bool {
        match (atom.predicate.as_str(), atom.args.as_slice()) {
            ("on", [x, y]) => self.pos.get(x) == Some(&Some(y.clone())),
            ("on-table", [x]) => self.pos.get(x) == Some(&None),
            ("clear", [x]) => self.pos.contains_key(x) && !self.covered(x),
            ("holding", [x]) => self.held.as_ref() == Some(x),
            ("arm-empty", []) => self.held.is_none(),
            _ => false,
        }
    }
}

/// Verdict of the physics oracle for a sequence of `(name, args)` steps.
pub fn oracle_valid(init: &State, goal: &[Atom], steps: &[(String, Vec<String>)]) -> bool {
    let mut w = World::from_state(init);
    for (name, args) in steps {
        match w.step(name, args) {
            Some(next) => w = next,
            None => return false,
        }
    }
    goal.iter().all(|g| w.holds(g))
}

/// Optimal cost by breadth-first search over physics worlds.
pub fn oracle_cost(init: &State, goal: &[Atom], objects: &[String]) -> Option<usize> {
    use std::collections::{HashSet, VecDeque};
    let start = World::from_state(init);
    let key = |w: &World| format!("{:?}", (&w.pos, &w.held));
    let mut seen = HashSet::from([key(&start)]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    let mut moves: Vec<(String, Vec<String>)> = Vec::new();
    for x in objects {
        moves.push(("pickup".into(), vec![x.clone()]));
        moves.push(("putdown".into(), vec![x.clone()]));
        for y in objects {
            moves.push(("stack".into(), vec![x.clone(), y.clone()]));
            moves.push(("unstack".into(), vec![x.clone(), y.clone()]));
        }
    }
    while let Some((w, d)) = queue.pop_front() {
        if goal.iter().all(|g| w.holds(g)) {
            return Some(d);
        }
        for (name, args) in &moves {
            if let Some(next) = w.step(name, args) {
                if seen.insert(key(&next)) {
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    None
}

pub fn instance(num_blocks: usize, goal_kind: GoalKind, seed: u64) -> Problem {
    gen_instance(&BlocksworldInstanceSpec {
        num_blocks,
        goal_kind,
        seed,
    })
    .unwrap()
}

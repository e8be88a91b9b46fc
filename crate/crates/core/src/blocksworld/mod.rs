//! The four-operator Blocksworld domain, random instance generation, state
//! legality, and the renaming used to build Mystery Blocksworld.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::pddl::{parse_domain, Atom, Domain, State};

mod disguise;
mod generate;
mod heuristic;
mod legal;

pub use disguise::{
    disguise, DisguiseError, DisguiseKind, DisguiseMapping, DisguiseMode, Lexicon, DEFAULT_LEXICON,
};
pub use generate::{
    benchmark_specs, count_configurations, gen_instance, sample_towers, BlocksworldInstanceSpec, GenError,
    MAX_INSTANCE_BLOCKS, MIN_INSTANCE_BLOCKS,
};
pub use heuristic::BlocksworldHeuristic;
pub(crate) use generate::{random_goal, random_problem};
pub use legal::{legal_state, legal_state_with};

pub const DOMAIN_PDDL: &str = "(define (domain blocksworld)
  (:requirements :strips)
  (:predicates (clear ?x) (on-table ?x) (arm-empty) (holding ?x) (on ?x ?y))
  (:action pickup
    :parameters (?ob)
    :precondition (and (clear ?ob) (on-table ?ob) (arm-empty))
    :effect (and (holding ?ob) (not (clear ?ob)) (not (on-table ?ob))
                 (not (arm-empty))))
  (:action putdown
    :parameters (?ob)
    :precondition (and (holding ?ob))
    :effect (and (clear ?ob) (arm-empty) (on-table ?ob)
                 (not (holding ?ob))))
  (:action stack
    :parameters (?ob ?underob)
    :precondition (and (clear ?underob) (holding ?ob))
    :effect (and (arm-empty) (clear ?ob) (on ?ob ?underob)
                 (not (clear ?underob)) (not (holding ?ob))))
  (:action unstack
    :parameters (?ob ?underob)
    :precondition (and (on ?ob ?underob) (clear ?ob) (arm-empty))
    :effect (and (holding ?ob) (clear ?underob)
                 (not (on ?ob ?underob)) (not (clear ?ob)) (not (arm-empty)))))
";

pub fn blocksworld_domain() -> Domain {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    DOMAIN
        .get_or_init(|| parse_domain(DOMAIN_PDDL).expect("built-in domain parses"))
        .clone()
}

/// Block colors by index. Blocks beyond the palette get numbered colors.
pub const PALETTE: [&str; 12] = [
    "red", "blue", "orange", "yellow", "white", "magenta", "black", "cyan", "green", "violet",
    "silver", "gold",
];

pub const MAX_BLOCKS: usize = 26;

/// Object name of block `i`: `a`, `b`, ...
pub fn block_name(i: usize) -> String {
    assert!(i < MAX_BLOCKS, "at most {MAX_BLOCKS} blocks");
    char::from(b'a' + i as u8).to_string()
}

pub fn block_color(i: usize) -> String {
    PALETTE
        .get(i)
        .map(|c| c.to_string())
        .unwrap_or_else(|| format!("color{i}"))
}

pub fn block_names(n: usize) -> Vec<String> {
    (0..n).map(block_name).collect()
}

/// Predicate and action names of the domain. Disguised domains use the
/// renamed tokens through [`Vocabulary::renamed`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub on: String,
    pub on_table: String,
    pub clear: String,
    pub holding: String,
    pub arm_empty: String,
    pub pickup: String,
    pub putdown: String,
    pub stack: String,
    pub unstack: String,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            on: "on".into(),
            on_table: "on-table".into(),
            clear: "clear".into(),
            holding: "holding".into(),
            arm_empty: "arm-empty".into(),
            pickup: "pickup".into(),
            putdown: "putdown".into(),
            stack: "stack".into(),
            unstack: "unstack".into(),
        }
    }
}

impl Vocabulary {
    pub fn renamed(&self, mapping: &DisguiseMapping) -> Vocabulary {
        let r = |s: &String| mapping.rename_token(s);
        Vocabulary {
            on: r(&self.on),
            on_table: r(&self.on_table),
            clear: r(&self.clear),
            holding: r(&self.holding),
            arm_empty: r(&self.arm_empty),
            pickup: r(&self.pickup),
            putdown: r(&self.putdown),
            stack: r(&self.stack),
            unstack: r(&self.unstack),
        }
    }

    /// Recognizes a blocksworld-shaped domain under this vocabulary.
    pub fn matches(&self, domain: &Domain) -> bool {
        let arity = |name: &str| domain.predicate(name).map(|p| p.arity());
        arity(&self.on) == Some(2)
            && arity(&self.on_table) == Some(1)
            && arity(&self.clear) == Some(1)
            && arity(&self.holding) == Some(1)
            && arity(&self.arm_empty) == Some(0)
    }

    pub fn on(&self, top: &str, below: &str) -> Atom {
        Atom::new(self.on.as_str(), [top, below])
    }

    pub fn on_table(&self, b: &str) -> Atom {
        Atom::new(self.on_table.as_str(), [b])
    }

    pub fn clear(&self, b: &str) -> Atom {
        Atom::new(self.clear.as_str(), [b])
    }

    pub fn holding(&self, b: &str) -> Atom {
        Atom::new(self.holding.as_str(), [b])
    }

    pub fn arm_empty(&self) -> Atom {
        Atom::new(self.arm_empty.as_str(), Vec::<String>::new())
    }
}

/// Where a block currently is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Support {
    Table,
    On(String),
    Held,
}

/// Reads block positions out of a state. Blocks with no position atom are
/// absent from the map.
pub fn supports(state: &State, vocab: &Vocabulary) -> BTreeMap<String, Support> {
    let mut out = BTreeMap::new();
    for a in state.iter() {
        if a.predicate == vocab.on && a.args.len() == 2 {
            out.insert(a.args[0].clone(), Support::On(a.args[1].clone()));
        } else if a.predicate == vocab.on_table && a.args.len() == 1 {
            out.insert(a.args[0].clone(), Support::Table);
        } else if a.predicate == vocab.holding && a.args.len() == 1 {
            out.insert(a.args[0].clone(), Support::Held);
        }
    }
    out
}

/// Towers as bottom-to-top lists of block indices.
pub type Towers = Vec<Vec<usize>>;

/// The legal arm-empty state described by `towers`.
pub fn towers_state(towers: &Towers, names: &[String], vocab: &Vocabulary) -> State {
    let mut atoms = BTreeSet::new();
    for tower in towers {
        for (level, &b) in tower.iter().enumerate() {
            if level == 0 {
                atoms.insert(vocab.on_table(&names[b]));
            } else {
                atoms.insert(vocab.on(&names[b], &names[tower[level - 1]]));
            }
        }
        if let Some(&top) = tower.last() {
            atoms.insert(vocab.clear(&names[top]));
        }
    }
    atoms.insert(vocab.arm_empty());
    State::new(atoms)
}

/// Complete placement of every block: `on` facts bottom-up per tower, then
/// `on-table` facts for the tower bases.
pub fn towers_goal(towers: &Towers, names: &[String], vocab: &Vocabulary) -> Vec<Atom> {
    let mut on = Vec::new();
    let mut table = Vec::new();
    for tower in towers {
        for (level, &b) in tower.iter().enumerate() {
            if level == 0 {
                table.push(vocab.on_table(&names[b]));
            } else {
                on.push(vocab.on(&names[b], &names[tower[level - 1]]));
            }
        }
    }
    on.extend(table);
    on
}

/// The `on`/`on-table` atoms of a state, in canonical order.
pub fn position_facts(state: &State, vocab: &Vocabulary) -> Vec<Atom> {
    state
        .iter()
        .filter(|a| a.predicate == vocab.on || a.predicate == vocab.on_table)
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{apply, emit_domain, ground_named};

    #[test]
    fn pickup_matches_the_listing() {
        let d = blocksworld_domain();
        let v = Vocabulary::default();
        let pickup = d.action("pickup").unwrap();
        assert_eq!(
            pickup.precondition,
            [v.clear("?ob"), v.on_table("?ob"), v.arm_empty()].into()
        );
        assert_eq!(pickup.add, [v.holding("?ob")].into());
        assert_eq!(
            pickup.del,
            [v.clear("?ob"), v.on_table("?ob"), v.arm_empty()].into()
        );
        assert_eq!(d.actions.len(), 4);
        assert!(v.matches(&d));
    }

    #[test]
    fn domain_round_trips() {
        let d = blocksworld_domain();
        assert_eq!(parse_domain(&emit_domain(&d)).unwrap(), d);
    }

    #[test]
    fn putdown_and_stack_follow_the_standard_schema() {
        let d = blocksworld_domain();
        let v = Vocabulary::default();
        let s = State::new([v.holding("a")]);
        let putdown = ground_named(&d, "putdown", &["a".into()]).unwrap();
        assert_eq!(
            apply(&s, &putdown).unwrap(),
            State::new([v.on_table("a"), v.clear("a"), v.arm_empty()])
        );

        let s = State::new([v.holding("a"), v.clear("b"), v.on_table("b")]);
        let stack = ground_named(&d, "stack", &["a".into(), "b".into()]).unwrap();
        assert_eq!(
            apply(&s, &stack).unwrap(),
            State::new([v.on("a", "b"), v.clear("a"), v.arm_empty(), v.on_table("b")])
        );

        // unstack(a, b): hand substitution into the schema
        let unstack = ground_named(&d, "unstack", &["a".into(), "b".into()]).unwrap();
        assert_eq!(
            unstack.precondition,
            [v.on("a", "b"), v.clear("a"), v.arm_empty()].into()
        );
        assert_eq!(unstack.add, [v.holding("a"), v.clear("b")].into());
        assert_eq!(
            unstack.del,
            [v.on("a", "b"), v.clear("a"), v.arm_empty()].into()
        );
    }

    #[test]
    fn towers_render_to_states_and_goals() {
        let names = block_names(3);
        let v = Vocabulary::default();
        let towers = vec![vec![2, 1, 0]];
        let s = towers_state(&towers, &names, &v);
        assert_eq!(
            s,
            State::new([v.on_table("c"), v.on("b", "c"), v.on("a", "b"), v.clear("a"), v.arm_empty()])
        );
        assert_eq!(
            towers_goal(&towers, &names, &v),
            vec![v.on("b", "c"), v.on("a", "b"), v.on_table("c")]
        );
        assert_eq!(block_color(0), "red");
        assert_eq!(block_color(2), "orange");
    }
}

use std::collections::{BTreeMap, BTreeSet};

use super::Vocabulary;
use crate::pddl::State;

pub fn legal_state(state: &State, objects: &[String]) -> bool {
    legal_state_with(state, objects, &Vocabulary::default())
}

/// Physical legality of a blocksworld state:
/// - every block has exactly one position (held, on the table, or on one block)
/// - at most one block is held, and `arm-empty` holds iff none is
/// - `clear(b)` iff `b` is not held and nothing is on it
/// - at most one block sits directly on any block, and `on` is acyclic
/// - no atom mentions an unknown predicate or object
pub fn legal_state_with(state: &State, objects: &[String], vocab: &Vocabulary) -> bool {
    let objs: BTreeSet<&str> = objects.iter().map(String::as_str).collect();
    let mut positions: BTreeMap<&str, usize> = BTreeMap::new();
    let mut below: BTreeMap<&str, &str> = BTreeMap::new();
    let mut above: BTreeMap<&str, usize> = BTreeMap::new();
    let mut held = Vec::new();
    let mut clear = BTreeSet::new();
    let mut arm_empty = false;

    for atom in state.iter() {
        if !atom.args.iter().all(|a| objs.contains(a.as_str())) {
            return false;
        }
        let args: Vec<&str> = atom.args.iter().map(String::as_str).collect();
        match (atom.predicate.as_str(), args.as_slice()) {
            (p, &[top, bottom]) if p == vocab.on => {
                if top == bottom {
                    return false;
                }
                *positions.entry(top).or_default() += 1;
                *above.entry(bottom).or_default() += 1;
                below.insert(top, bottom);
            }
            (p, &[b]) if p == vocab.on_table => *positions.entry(b).or_default() += 1,
            (p, &[b]) if p == vocab.holding => {
                *positions.entry(b).or_default() += 1;
                held.push(b);
            }
            (p, &[b]) if p == vocab.clear => {
                clear.insert(b);
            }
            (p, &[]) if p == vocab.arm_empty => arm_empty = true,
            _ => return false,
        }
    }

    if objs.iter().any(|o| positions.get(o).copied().unwrap_or(0) != 1) {
        return false;
    }
    if held.len() > 1 || arm_empty == !held.is_empty() {
        return false;
    }
    if above.values().any(|&c| c > 1) {
        return false;
    }
    for o in &objs {
        let should_be_clear = !held.contains(o) && !above.contains_key(o);
        if clear.contains(o) != should_be_clear {
            return false;
        }
    }
    // each block has one support, so following `below` either ends or cycles
    for start in &objs {
        let mut cur = *start;
        let mut steps = 0;
        while let Some(&next) = below.get(cur) {
            cur = next;
            steps += 1;
            if steps > objs.len() {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld::{block_names, blocksworld_domain, sample_towers, towers_state};
    use crate::pddl::{apply, applicable, ground_all, Atom};
    use proptest::prelude::*;
    use rand::seq::IndexedRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v() -> Vocabulary {
        Vocabulary::default()
    }

    #[test]
    fn all_on_table_is_legal() {
        let v = v();
        let names = block_names(3);
        let s = State::new(
            names
                .iter()
                .flat_map(|b| [v.on_table(b), v.clear(b)])
                .chain([v.arm_empty()]),
        );
        assert!(legal_state(&s, &names));
    }

    #[test]
    fn holding_with_arm_empty_is_illegal() {
        let v = v();
        let names = block_names(1);
        assert!(!legal_state(&State::new([v.holding("a"), v.arm_empty()]), &names));
        assert!(legal_state(&State::new([v.holding("a")]), &names));
    }

    #[test]
    fn structural_violations() {
        let v = v();
        let names = block_names(2);
        // cycle
        let cyc = State::new([v.on("a", "b"), v.on("b", "a"), v.arm_empty()]);
        assert!(!legal_state(&cyc, &names));
        // two positions for one block
        let two = State::new([v.on("a", "b"), v.on_table("a"), v.on_table("b"), v.clear("a"), v.arm_empty()]);
        assert!(!legal_state(&two, &names));
        // clear block with something on it
        let bad_clear = State::new([v.on("a", "b"), v.on_table("b"), v.clear("a"), v.clear("b"), v.arm_empty()]);
        assert!(!legal_state(&bad_clear, &names));
        // unknown atom
        let unknown = State::new([v.on_table("a"), v.on_table("b"), v.clear("a"), v.clear("b"), v.arm_empty(), Atom::new("wet", ["a"])]);
        assert!(!legal_state(&unknown, &names));
        // two blocks on one
        let names3 = block_names(3);
        let crowd = State::new([v.on("a", "c"), v.on("b", "c"), v.on_table("c"), v.clear("a"), v.clear("b"), v.arm_empty()]);
        assert!(!legal_state(&crowd, &names3));
    }

    proptest! {
        #[test]
        fn random_walks_stay_legal(seed in any::<u64>(), n in 1usize..=5, len in 0usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let names = block_names(n);
            let domain = blocksworld_domain();
            let actions = ground_all(&domain, &names);
            let mut s = towers_state(&sample_towers(n, &mut rng), &names, &v());
            prop_assert!(legal_state(&s, &names));
            for _ in 0..len {
                let options: Vec<_> = actions.iter().filter(|a| applicable(&s, a)).collect();
                let a = options.choose(&mut rng).expect("blocksworld always has a move");
                s = apply(&s, a).unwrap();
                prop_assert!(legal_state(&s, &names));
            }
        }
    }
}

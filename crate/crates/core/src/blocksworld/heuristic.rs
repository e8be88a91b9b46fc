use std::collections::BTreeMap;

use super::{supports, Support, Vocabulary};
use crate::pddl::{Atom, State};
use crate::planner::Heuristic;

/// Admissible estimate for blocksworld goals over `on`/`on-table`.
///
/// A block must move if it is held, if its goal position differs from its
/// current one, if it rests on a block that must move, or if it occupies a
/// block the goal wants another block on. Every such block needs a place
/// action, and every one not already held also needs a pick action.
#[derive(Debug, Clone)]
pub struct BlocksworldHeuristic {
    vocab: Vocabulary,
    goal_pos: BTreeMap<String, Support>,
    goal_above: BTreeMap<String, String>,
    wants_arm_empty: bool,
}

impl BlocksworldHeuristic {
    pub fn new(vocab: Vocabulary, goal: &[Atom]) -> Self {
        let mut goal_pos = BTreeMap::new();
        let mut goal_above = BTreeMap::new();
        let mut wants_arm_empty = false;
        for a in goal {
            if a.predicate == vocab.on && a.args.len() == 2 {
                goal_pos.insert(a.args[0].clone(), Support::On(a.args[1].clone()));
                goal_above.insert(a.args[1].clone(), a.args[0].clone());
            } else if a.predicate == vocab.on_table && a.args.len() == 1 {
                goal_pos.insert(a.args[0].clone(), Support::Table);
            } else if a.predicate == vocab.arm_empty {
                wants_arm_empty = true;
            }
        }
        BlocksworldHeuristic {
            vocab,
            goal_pos,
            goal_above,
            wants_arm_empty,
        }
    }

    fn must_move<'a>(
        &self,
        block: &'a str,
        sup: &'a BTreeMap<String, Support>,
        memo: &mut BTreeMap<&'a str, bool>,
        depth: usize,
    ) -> bool {
        if let Some(&m) = memo.get(block) {
            return m;
        }
        let result = match sup.get(block) {
            None | Some(Support::Held) => false,
            Some(Support::Table) => matches!(self.goal_pos.get(block), Some(Support::On(_))),
            Some(Support::On(below)) => {
                let misplaced = match self.goal_pos.get(block) {
                    Some(Support::On(target)) => target != below,
                    Some(Support::Table) => true,
                    _ => false,
                };
                let displaced = self
                    .goal_above
                    .get(below.as_str())
                    .is_some_and(|wanted| wanted != block);
                misplaced
                    || displaced
                    || (depth < sup.len() && self.must_move(below, sup, memo, depth + 1))
            }
        };
        memo.insert(block, result);
        result
    }
}

impl Heuristic for BlocksworldHeuristic {
    fn estimate(&self, state: &State) -> usize {
        let sup = supports(state, &self.vocab);
        let mut memo = BTreeMap::new();
        let mut moving = 0;
        let mut held = None;
        for (block, s) in &sup {
            if *s == Support::Held {
                held = Some(block.as_str());
            } else if self.must_move(block, &sup, &mut memo, 0) {
                moving += 1;
            }
        }
        let held_cost = match held {
            Some(b) if self.goal_pos.contains_key(b) || moving > 0 || self.wants_arm_empty => 1,
            _ => 0,
        };
        2 * moving + held_cost
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld::{block_names, towers_goal, towers_state};

    #[test]
    fn zero_at_goal_and_counts_misplaced_blocks() {
        let v = Vocabulary::default();
        let names = block_names(3);
        let tower = vec![vec![0, 1, 2]];
        let goal = towers_goal(&tower, &names, &v);
        let h = BlocksworldHeuristic::new(v.clone(), &goal);
        assert_eq!(h.estimate(&towers_state(&tower, &names, &v)), 0);
        // inverted tower: every block must move
        let inverted = towers_state(&vec![vec![2, 1, 0]], &names, &v);
        assert_eq!(h.estimate(&inverted), 6);
        // all on table: b and c must be stacked
        let flat = towers_state(&vec![vec![0], vec![1], vec![2]], &names, &v);
        assert_eq!(h.estimate(&flat), 4);
    }

    #[test]
    fn held_block_needs_one_place_action() {
        let v = Vocabulary::default();
        let goal = vec![v.on("a", "b")];
        let h = BlocksworldHeuristic::new(v.clone(), &goal);
        let s = State::new([v.holding("a"), v.on_table("b"), v.clear("b")]);
        assert_eq!(h.estimate(&s), 1);
    }
}

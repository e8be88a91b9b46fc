use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{block_names, towers_goal, towers_state, Towers, Vocabulary};
use crate::pddl::{goal_satisfied, Atom, GoalKind, Problem};

pub const MIN_INSTANCE_BLOCKS: usize = 3;
pub const MAX_INSTANCE_BLOCKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocksworldInstanceSpec {
    pub num_blocks: usize,
    pub goal_kind: GoalKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("num_blocks must be in {MIN_INSTANCE_BLOCKS}..={MAX_INSTANCE_BLOCKS}, got {0}")]
    BlocksOutOfRange(usize),
}

/// Specs for a mixed benchmark: block counts cycle 3, 3, 4, 4, 5 and goals
/// alternate full/partial. Instance `i` uses seed `seed + i`.
pub fn benchmark_specs(count: usize, seed: u64) -> Vec<BlocksworldInstanceSpec> {
    (0..count)
        .map(|i| BlocksworldInstanceSpec {
            num_blocks: [3, 3, 4, 4, 5][i % 5],
            goal_kind: if i % 2 == 0 { GoalKind::Full } else { GoalKind::Partial },
            seed: seed.wrapping_add(i as u64),
        })
        .collect()
}

/// Number of legal arm-empty configurations of `n` labeled blocks (sets of
/// ordered towers): 1, 1, 3, 13, 73, 501, ...
pub fn count_configurations(n: usize) -> u128 {
    let mut counts = vec![1u128; n + 1];
    for m in 1..=n {
        counts[m] = (1..=m).map(|k| tower_weight(m, k, &counts)).sum();
    }
    counts[n]
}

/// Configurations of `m` blocks whose lowest-indexed block sits in a tower
/// of height `k`: C(m-1, k-1) * k! * a(m-k).
fn tower_weight(m: usize, k: usize, counts: &[u128]) -> u128 {
    binomial(m - 1, k - 1) * factorial(k) * counts[m - k]
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Uniformly samples a configuration of `n` blocks by choosing the height of
/// the tower holding the lowest remaining block in proportion to the number
/// of completions, then its members and their order.
pub fn sample_towers<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Towers {
    let mut counts = vec![1u128; n + 1];
    for m in 1..=n {
        counts[m] = (1..=m).map(|k| tower_weight(m, k, &counts)).sum();
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut towers = Vec::new();
    while !remaining.is_empty() {
        let m = remaining.len();
        let mut pick = rng.random_range(0..counts[m]);
        let mut height = m;
        for k in 1..=m {
            let w = tower_weight(m, k, &counts);
            if pick < w {
                height = k;
                break;
            }
            pick -= w;
        }
        let first = remaining.remove(0);
        let chosen: Vec<usize> = index::sample(rng, remaining.len(), height - 1).into_vec();
        let mut tower: Vec<usize> = chosen.iter().map(|&i| remaining[i]).collect();
        tower.push(first);
        tower.shuffle(rng);
        remaining.retain(|b| !tower.contains(b));
        towers.push(tower);
    }
    towers
}

pub fn gen_instance(spec: &BlocksworldInstanceSpec) -> Result<Problem, GenError> {
    if !(MIN_INSTANCE_BLOCKS..=MAX_INSTANCE_BLOCKS).contains(&spec.num_blocks) {
        return Err(GenError::BlocksOutOfRange(spec.num_blocks));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let kind = match spec.goal_kind {
        GoalKind::Full => "full",
        GoalKind::Partial => "partial",
    };
    let name = format!("bw-{}-{}-{}", spec.num_blocks, kind, spec.seed);
    Ok(random_problem(name, spec.num_blocks, spec.goal_kind, &mut rng))
}

/// Samples init and goal; goals already satisfied by the init are resampled.
pub(crate) fn random_problem<R: Rng + ?Sized>(
    name: String,
    n: usize,
    goal_kind: GoalKind,
    rng: &mut R,
) -> Problem {
    let vocab = Vocabulary::default();
    let names = block_names(n);
    let init = towers_state(&sample_towers(n, rng), &names, &vocab);
    let goal = loop {
        let goal = random_goal(n, goal_kind, &names, &vocab, rng);
        if !goal_satisfied(&init, &goal) {
            break goal;
        }
    };
    Problem {
        name,
        domain_name: "blocksworld".into(),
        objects: names,
        init,
        goal,
        goal_kind,
    }
}

pub(crate) fn random_goal<R: Rng + ?Sized>(
    n: usize,
    goal_kind: GoalKind,
    names: &[String],
    vocab: &Vocabulary,
    rng: &mut R,
) -> Vec<Atom> {
    loop {
        let full = towers_goal(&sample_towers(n, rng), names, vocab);
        match goal_kind {
            GoalKind::Full => return full,
            GoalKind::Partial => {
                let on: Vec<&Atom> = full.iter().filter(|a| a.predicate == vocab.on).collect();
                let max_k = on.len().min(n.saturating_sub(2));
                if max_k == 0 {
                    continue;
                }
                let k = rng.random_range(1..=max_k);
                let mut picked = index::sample(rng, on.len(), k).into_vec();
                picked.sort_unstable();
                return picked.into_iter().map(|i| on[i].clone()).collect();
            }
        }
    }
}

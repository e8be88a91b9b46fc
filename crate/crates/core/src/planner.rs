//! Optimal and satisficing forward search over canonical states, plus a
//! heuristic-free breadth-first oracle for optimal costs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocksworld::{BlocksworldHeuristic, Vocabulary};
use crate::pddl::{apply_unchecked, applicable, goal_satisfied, ground_all, Atom, Domain, GroundAction, Plan, Problem, State};

/// Lower bound on the number of steps from a state to the goal.
pub trait Heuristic {
    fn estimate(&self, state: &State) -> usize;
}

/// The zero heuristic; turns A* into uniform-cost search.
#[derive(Debug, Clone, Copy, Default)]
pub struct Blind;

impl Heuristic for Blind {
    fn estimate(&self, _: &State) -> usize {
        0
    }
}

/// Picks the blocksworld heuristic when the domain has the standard
/// vocabulary, otherwise [`Blind`].
pub fn default_heuristic(domain: &Domain, goal: &[Atom]) -> Box<dyn Heuristic + Send + Sync> {
    let vocab = Vocabulary::default();
    if vocab.matches(domain) {
        Box::new(BlocksworldHeuristic::new(vocab, goal))
    } else {
        Box::new(Blind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_expansions: usize,
    pub max_time: Duration,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_expansions: 1_000_000,
            max_time: Duration::from_secs(10),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("goal is unreachable")]
    Unsolvable,
    #[error("search budget exceeded after {} expansions", .0.expanded)]
    BudgetExceeded(SearchStats),
}

struct Space {
    actions: Vec<GroundAction>,
    states: Vec<State>,
    index: HashMap<State, usize>,
    parent: Vec<Option<(usize, usize)>>,
}

impl Space {
    fn new(domain: &Domain, problem: &Problem) -> Self {
        Space {
            actions: ground_all(domain, &problem.objects),
            states: Vec::new(),
            index: HashMap::new(),
            parent: Vec::new(),
        }
    }

    /// Returns the id and whether the state is new.
    fn intern(&mut self, s: State) -> (usize, bool) {
        if let Some(&id) = self.index.get(&s) {
            return (id, false);
        }
        let id = self.states.len();
        self.index.insert(s.clone(), id);
        self.states.push(s);
        self.parent.push(None);
        (id, true)
    }

    fn plan_to(&self, mut id: usize) -> Plan {
        let mut steps = Vec::new();
        while let Some((prev, action)) = self.parent[id] {
            steps.push(self.actions[action].clone());
            id = prev;
        }
        steps.reverse();
        Plan::new(steps)
    }
}

struct Meter {
    start: Instant,
    budget: Budget,
    stats: SearchStats,
}

impl Meter {
    fn new(budget: Budget) -> Self {
        Meter {
            start: Instant::now(),
            budget,
            stats: SearchStats::default(),
        }
    }

    fn expand(&mut self) -> Result<(), PlanError> {
        self.stats.expanded += 1;
        let out_of_time =
            self.stats.expanded % 256 == 0 && self.start.elapsed() > self.budget.max_time;
        if self.stats.expanded > self.budget.max_expansions || out_of_time {
            return Err(PlanError::BudgetExceeded(self.finish()));
        }
        Ok(())
    }

    fn finish(&mut self) -> SearchStats {
        self.stats.wall_time = self.start.elapsed().as_secs_f64();
        self.stats
    }
}

pub fn solve_optimal(domain: &Domain, problem: &Problem) -> Result<(Plan, SearchStats), PlanError> {
    let h = default_heuristic(domain, &problem.goal);
    solve_optimal_with(domain, problem, h.as_ref(), Budget::default())
}

/// A* with re-opening. With an admissible heuristic the returned plan has
/// minimum length. Successors are generated in token order and equal-f
/// nodes are expanded deepest-first, then first-in-first-out.
pub fn solve_optimal_with(
    domain: &Domain,
    problem: &Problem,
    heuristic: &dyn Heuristic,
    budget: Budget,
) -> Result<(Plan, SearchStats), PlanError> {
    let mut meter = Meter::new(budget);
    let mut space = Space::new(domain, problem);
    let (root, _) = space.intern(problem.init.clone());
    let mut g = vec![0usize];
    let mut open = BinaryHeap::new();
    let mut counter = 0u64;
    let h0 = heuristic.estimate(&problem.init);
    open.push(Reverse((h0, h0, counter, root, 0usize)));
    meter.stats.generated = 1;

    while let Some(Reverse((_, _, _, id, g_at_push))) = open.pop() {
        if g_at_push > g[id] {
            continue;
        }
        if goal_satisfied(&space.states[id], &problem.goal) {
            let stats = meter.finish();
            return Ok((space.plan_to(id), stats));
        }
        meter.expand()?;
        let state = space.states[id].clone();
        for a in 0..space.actions.len() {
            if !applicable(&state, &space.actions[a]) {
                continue;
            }
            let next = apply_unchecked(&state, &space.actions[a]);
            let (nid, fresh) = space.intern(next);
            meter.stats.generated += 1;
            let ng = g[id] + 1;
            if fresh {
                g.push(ng);
            } else if ng >= g[nid] {
                continue;
            } else {
                g[nid] = ng;
            }
            space.parent[nid] = Some((id, a));
            let h = heuristic.estimate(&space.states[nid]);
            counter += 1;
            open.push(Reverse((ng + h, h, counter, nid, ng)));
        }
    }
    Err(PlanError::Unsolvable)
}

/// Exact optimal plan length by breadth-first search; no heuristic.
pub fn oracle_bfs(domain: &Domain, problem: &Problem, budget: Budget) -> Result<usize, PlanError> {
    let mut meter = Meter::new(budget);
    if goal_satisfied(&problem.init, &problem.goal) {
        return Ok(0);
    }
    let actions = ground_all(domain, &problem.objects);
    let mut seen: HashSet<State> = HashSet::from([problem.init.clone()]);
    let mut frontier = VecDeque::from([(problem.init.clone(), 0usize)]);
    while let Some((state, depth)) = frontier.pop_front() {
        meter.expand()?;
        for a in &actions {
            if !applicable(&state, a) {
                continue;
            }
            let next = apply_unchecked(&state, a);
            if goal_satisfied(&next, &problem.goal) {
                return Ok(depth + 1);
            }
            if seen.insert(next.clone()) {
                frontier.push_back((next, depth + 1));
            }
        }
    }
    Err(PlanError::Unsolvable)
}

/// Greedy best-first search: any valid plan, found quickly.
pub fn solve_satisficing(domain: &Domain, problem: &Problem, budget: Budget) -> Result<Plan, PlanError> {
    let h = default_heuristic(domain, &problem.goal);
    solve_satisficing_with(domain, problem, h.as_ref(), budget)
}

pub fn solve_satisficing_with(
    domain: &Domain,
    problem: &Problem,
    heuristic: &dyn Heuristic,
    budget: Budget,
) -> Result<Plan, PlanError> {
    let mut meter = Meter::new(budget);
    let mut space = Space::new(domain, problem);
    let (root, _) = space.intern(problem.init.clone());
    let mut open = BinaryHeap::new();
    let mut counter = 0u64;
    open.push(Reverse((heuristic.estimate(&problem.init), counter, root)));
    while let Some(Reverse((_, _, id))) = open.pop() {
        if goal_satisfied(&space.states[id], &problem.goal) {
            return Ok(space.plan_to(id));
        }
        meter.expand()?;
        let state = space.states[id].clone();
        for a in 0..space.actions.len() {
            if !applicable(&state, &space.actions[a]) {
                continue;
            }
            let (nid, fresh) = space.intern(apply_unchecked(&state, &space.actions[a]));
            if !fresh {
                continue;
            }
            space.parent[nid] = Some((id, a));
            counter += 1;
            open.push(Reverse((heuristic.estimate(&space.states[nid]), counter, nid)));
        }
    }
    Err(PlanError::Unsolvable)
}

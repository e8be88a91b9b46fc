//! Test-case families. Every instance carries its prompt and the symbolic
//! ground truth needed to score a completion without the model.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocksworld::{
    block_names, blocksworld_domain, disguise, legal_state, position_facts, random_goal, random_problem,
    sample_towers, towers_state, BlocksworldInstanceSpec, DisguiseError, DisguiseKind, DisguiseMapping,
    DisguiseMode, GenError, Lexicon, Vocabulary, MAX_INSTANCE_BLOCKS, MIN_INSTANCE_BLOCKS,
};
use crate::pddl::{
    applicable, apply_unchecked, emit_domain, emit_problem, execute, goal_satisfied, ground_all, parse_domain,
    parse_plan, parse_problem, validate, Atom, Domain, GoalKind, Plan, PddlError, Problem, State,
};
use crate::planner::{solve_optimal, PlanError};
use crate::translator::{
    assemble_prompt, atom_to_nl, plan_to_nl, state_to_nl, ProblemText, Query, Shot, TemplateSet, TranslateError,
};

mod export;
mod program;

pub use export::{export_finetune_dataset, finetune_record, ExportError, FinetuneRecord};
pub use program::{program_by_name, GeneralizationProgram, UNSTACK_ALL_THEN_BUILD};

pub const ANSWER_CUE: &str = "[ANSWER]";
pub const ANSWER_END_TAG: &str = "[ANSWER END]";

const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    PlanGeneration,
    OptimalPlanning,
    PlanExecution,
    GoalShuffle,
    GoalFullToPartial,
    GoalPartialToFull,
    PlanReuse,
    Replanning,
    Generalization,
}

impl TaskKind {
    pub const ALL: [TaskKind; 9] = [
        TaskKind::PlanGeneration,
        TaskKind::OptimalPlanning,
        TaskKind::PlanExecution,
        TaskKind::GoalShuffle,
        TaskKind::GoalFullToPartial,
        TaskKind::GoalPartialToFull,
        TaskKind::PlanReuse,
        TaskKind::Replanning,
        TaskKind::Generalization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::PlanGeneration => "plan_generation",
            TaskKind::OptimalPlanning => "optimal_planning",
            TaskKind::PlanExecution => "plan_execution",
            TaskKind::GoalShuffle => "goal_shuffle",
            TaskKind::GoalFullToPartial => "goal_full_to_partial",
            TaskKind::GoalPartialToFull => "goal_partial_to_full",
            TaskKind::PlanReuse => "plan_reuse",
            TaskKind::Replanning => "replanning",
            TaskKind::Generalization => "generalization",
        }
    }

    pub fn scoring_kind(self) -> ScoringKind {
        match self {
            TaskKind::OptimalPlanning => ScoringKind::OptimalPlan,
            TaskKind::PlanExecution => ScoringKind::ExecutionAnswers,
            _ => ScoringKind::ValidPlan,
        }
    }

    fn stream(self) -> u64 {
        TaskKind::ALL.iter().position(|t| *t == self).unwrap_or(0) as u64
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringKind {
    /// The extracted plan must validate.
    ValidPlan,
    /// The extracted plan must validate with the reference cost.
    OptimalPlan,
    /// Yes/no answers must match the executor.
    ExecutionAnswers,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisguiseChoice {
    #[default]
    None,
    Deceptive,
    Random,
}

impl FromStr for DisguiseChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(DisguiseChoice::None),
            "deceptive" => Ok(DisguiseChoice::Deceptive),
            "random" | "randomized" => Ok(DisguiseChoice::Random),
            _ => Err(format!("unknown disguise `{s}` (none, deceptive, random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurriculumConfig {
    pub shots: usize,
    /// Yes/no questions per plan-execution instance.
    pub questions: usize,
    /// Upper bound on the action sequence length in plan execution.
    pub max_actions: usize,
    pub disguise: DisguiseChoice,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        CurriculumConfig {
            shots: 1,
            questions: 3,
            max_actions: 4,
            disguise: DisguiseChoice::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionPayload {
    /// Action tokens executed from the problem's initial state.
    pub actions: Vec<String>,
    pub questions: Vec<Atom>,
    pub expected: Vec<bool>,
}

/// Symbolic ground truth. PDDL and templates are stored in their rendered
/// (possibly disguised) vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    pub domain: String,
    /// The query problem. For replanning its init is the changed state; for
    /// plan execution its goal is the block placement after the actions.
    pub problem: String,
    /// Problems of the worked examples, in prompt order.
    pub examples: Vec<String>,
    pub templates: TemplateSet,
    pub reference_plan: Vec<String>,
    /// Optimal cost of the query (sequence length for plan execution).
    pub reference_cost: usize,
    pub num_blocks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix_len: Option<usize>,
    /// Replanning: the problem before the unexpected change.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_problem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<ExecutionPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disguise: Option<DisguiseKind>,
}

impl Payload {
    pub fn parse_domain(&self) -> Result<Domain, PddlError> {
        parse_domain(&self.domain)
    }

    pub fn parse_problem(&self, domain: &Domain) -> Result<Problem, PddlError> {
        parse_problem(&self.problem, domain)
    }

    pub fn parse_examples(&self, domain: &Domain) -> Result<Vec<Problem>, PddlError> {
        self.examples.iter().map(|p| parse_problem(p, domain)).collect()
    }

    pub fn reference(&self, domain: &Domain, objects: &[String]) -> Result<Plan, PddlError> {
        parse_plan(&self.reference_plan.join("\n"), domain, objects)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestInstance {
    pub id: String,
    pub task: TaskKind,
    pub seed: u64,
    pub prompt: String,
    pub payload: Payload,
    pub examples_used: Vec<String>,
    pub scoring_kind: ScoringKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurriculumError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("{0} needs at least one worked example")]
    ShotsRequired(TaskKind),
    #[error("program `{0}` is not applicable")]
    Inapplicable(String),
    #[error("no suitable {0} instance after {MAX_ATTEMPTS} draws")]
    Exhausted(TaskKind),
    #[error(transparent)]
    Disguise(#[from] DisguiseError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

struct Worked {
    problem: Problem,
    plan: Plan,
}

struct Execution {
    init: State,
    actions: Plan,
    questions: Vec<Atom>,
    expected: Vec<bool>,
    final_state: State,
}

struct Replan {
    base: Problem,
    prefix: Plan,
    moved: Atom,
}

/// Instance content in blocksworld vocabulary, before disguise and
/// rendering.
struct Draft {
    shots: Vec<Worked>,
    query: Problem,
    reference: Plan,
    cost: usize,
    prefix_len: Option<usize>,
    replan: Option<Replan>,
    execution: Option<(Execution, Vec<Execution>)>,
    program: Option<&'static str>,
}

impl Draft {
    fn plain(shots: Vec<Worked>, query: Problem, reference: Plan, cost: usize) -> Self {
        Draft {
            shots,
            query,
            reference,
            cost,
            prefix_len: None,
            replan: None,
            execution: None,
            program: None,
        }
    }
}

fn check_spec(spec: &BlocksworldInstanceSpec) -> Result<(), CurriculumError> {
    if !(MIN_INSTANCE_BLOCKS..=MAX_INSTANCE_BLOCKS).contains(&spec.num_blocks) {
        return Err(GenError::BlocksOutOfRange(spec.num_blocks).into());
    }
    Ok(())
}

fn solve(problem: &Problem) -> Result<Plan, CurriculumError> {
    Ok(solve_optimal(&blocksworld_domain(), problem)?.0)
}

fn kind_tag(kind: GoalKind) -> &'static str {
    match kind {
        GoalKind::Full => "full",
        GoalKind::Partial => "partial",
    }
}

pub fn instance_id(task: TaskKind, spec: &BlocksworldInstanceSpec) -> String {
    format!("{}-{}-{}-{}", task, spec.num_blocks, kind_tag(spec.goal_kind), spec.seed)
}

fn problem_with(name: String, init: State, goal: Vec<Atom>, goal_kind: GoalKind, n: usize) -> Problem {
    Problem {
        name,
        domain_name: "blocksworld".into(),
        objects: block_names(n),
        init,
        goal,
        goal_kind,
    }
}

/// Draws `count` problems whose (init, goal) pairs differ from each other
/// and from everything in `seen`.
fn distinct_problems(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    id: &str,
    n: usize,
    kind: GoalKind,
    count: usize,
    seen: &mut BTreeSet<(State, BTreeSet<Atom>)>,
) -> Result<Vec<Problem>, CurriculumError> {
    let mut out = Vec::new();
    for _ in 0..MAX_ATTEMPTS {
        if out.len() == count {
            return Ok(out);
        }
        let p = random_problem(format!("{id}-ex{}", out.len()), n, kind, rng);
        if seen.insert((p.init.clone(), p.goal_set())) {
            out.push(p);
        }
    }
    if out.len() == count {
        Ok(out)
    } else {
        Err(CurriculumError::Exhausted(task))
    }
}

fn solved(problems: Vec<Problem>) -> Result<Vec<Worked>, CurriculumError> {
    problems
        .into_iter()
        .map(|problem| {
            let plan = solve(&problem)?;
            Ok(Worked { problem, plan })
        })
        .collect()
}

/// Goals over a fixed init, distinct from `seen` and unsatisfied by init.
fn goals_on(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    init: &State,
    n: usize,
    kind: GoalKind,
    count: usize,
    seen: &mut BTreeSet<BTreeSet<Atom>>,
) -> Result<Vec<Vec<Atom>>, CurriculumError> {
    let vocab = Vocabulary::default();
    let names = block_names(n);
    let mut out = Vec::new();
    for _ in 0..MAX_ATTEMPTS {
        if out.len() == count {
            break;
        }
        let goal = random_goal(n, kind, &names, &vocab, rng);
        if !goal_satisfied(init, &goal) && seen.insert(goal.iter().cloned().collect()) {
            out.push(goal);
        }
    }
    if out.len() == count {
        Ok(out)
    } else {
        Err(CurriculumError::Exhausted(task))
    }
}

fn random_init(rng: &mut ChaCha8Rng, n: usize) -> State {
    towers_state(&sample_towers(n, rng), &block_names(n), &Vocabulary::default())
}

fn draft_plan_generation(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    id: &str,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
) -> Result<Draft, CurriculumError> {
    let query = random_problem(id.to_string(), spec.num_blocks, spec.goal_kind, rng);
    let mut seen = BTreeSet::from([(query.init.clone(), query.goal_set())]);
    let shots = distinct_problems(rng, task, id, spec.num_blocks, spec.goal_kind, config.shots, &mut seen)?;
    let reference = solve(&query)?;
    let cost = reference.cost();
    Ok(Draft::plain(solved(shots)?, query, reference, cost))
}

/// Shared-init goal variants: `(example goal, query goal)` built from a
/// freshly sampled goal by `derive`, which returns `None` to resample.
fn draft_goal_variant(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    id: &str,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
    base_kind: GoalKind,
    derive: fn(&mut ChaCha8Rng, &State, &[Atom], usize, GoalKind) -> Option<(Problem, Problem)>,
) -> Result<Draft, CurriculumError> {
    if config.shots == 0 {
        return Err(CurriculumError::ShotsRequired(task));
    }
    let n = spec.num_blocks;
    for _ in 0..MAX_ATTEMPTS {
        let init = random_init(rng, n);
        let mut seen = BTreeSet::new();
        let Ok(base) = goals_on(rng, task, &init, n, base_kind, 1, &mut seen) else { continue };
        let Some((mut example, mut query)) = derive(rng, &init, &base[0], n, base_kind) else { continue };
        example.name = format!("{id}-ex{}", config.shots - 1);
        query.name = id.to_string();
        seen.insert(example.goal_set());
        seen.insert(query.goal_set());
        let Ok(others) = goals_on(rng, task, &init, n, example.goal_kind, config.shots - 1, &mut seen) else {
            continue;
        };
        let mut shots: Vec<Problem> = others
            .into_iter()
            .enumerate()
            .map(|(i, goal)| problem_with(format!("{id}-ex{i}"), init.clone(), goal, example.goal_kind, n))
            .collect();
        shots.push(example);
        let reference = solve(&query)?;
        let cost = reference.cost();
        return Ok(Draft::plain(solved(shots)?, query, reference, cost));
    }
    Err(CurriculumError::Exhausted(task))
}

fn shuffle_derive(
    rng: &mut ChaCha8Rng,
    init: &State,
    goal: &[Atom],
    n: usize,
    kind: GoalKind,
) -> Option<(Problem, Problem)> {
    if goal.len() < 2 {
        return None;
    }
    let mut shuffled = goal.to_vec();
    while shuffled == goal {
        shuffled.shuffle(rng);
    }
    Some((
        problem_with(String::new(), init.clone(), goal.to_vec(), kind, n),
        problem_with(String::new(), init.clone(), shuffled, kind, n),
    ))
}

/// A strict nonempty subset of `goal`, in listing order, not already true.
fn strict_subset(rng: &mut ChaCha8Rng, init: &State, goal: &[Atom]) -> Option<Vec<Atom>> {
    if goal.len() < 2 {
        return None;
    }
    for _ in 0..32 {
        let k = rng.random_range(1..goal.len());
        let mut picked = index::sample(rng, goal.len(), k).into_vec();
        picked.sort_unstable();
        let sub: Vec<Atom> = picked.into_iter().map(|i| goal[i].clone()).collect();
        if !goal_satisfied(init, &sub) {
            return Some(sub);
        }
    }
    None
}

fn full_to_partial_derive(
    rng: &mut ChaCha8Rng,
    init: &State,
    goal: &[Atom],
    n: usize,
    _: GoalKind,
) -> Option<(Problem, Problem)> {
    let sub = strict_subset(rng, init, goal)?;
    Some((
        problem_with(String::new(), init.clone(), goal.to_vec(), GoalKind::Full, n),
        problem_with(String::new(), init.clone(), sub, GoalKind::Partial, n),
    ))
}

fn partial_to_full_derive(
    rng: &mut ChaCha8Rng,
    init: &State,
    goal: &[Atom],
    n: usize,
    _: GoalKind,
) -> Option<(Problem, Problem)> {
    let sub = strict_subset(rng, init, goal)?;
    Some((
        problem_with(String::new(), init.clone(), sub, GoalKind::Partial, n),
        problem_with(String::new(), init.clone(), goal.to_vec(), GoalKind::Full, n),
    ))
}

fn draft_plan_reuse(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    id: &str,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
) -> Result<Draft, CurriculumError> {
    if config.shots == 0 {
        return Err(CurriculumError::ShotsRequired(task));
    }
    let vocab = Vocabulary::default();
    let n = spec.num_blocks;
    for _ in 0..MAX_ATTEMPTS {
        let mut base = random_problem(format!("{id}-ex{}", config.shots - 1), n, spec.goal_kind, rng);
        let plan = solve(&base)?;
        let mut state = base.init.clone();
        let mut prefixes = Vec::new();
        for (i, step) in plan.steps.iter().enumerate().take(plan.len().saturating_sub(1)) {
            state = apply_unchecked(&state, step);
            if state.contains(&vocab.arm_empty()) {
                let goal = position_facts(&state, &vocab);
                if !goal_satisfied(&base.init, &goal) {
                    prefixes.push((i + 1, goal));
                }
            }
        }
        let Some((prefix_len, goal)) = prefixes.choose(rng).cloned() else { continue };
        let query = problem_with(id.to_string(), base.init.clone(), goal, GoalKind::Full, n);
        let mut seen = BTreeSet::from([base.goal_set(), query.goal_set()]);
        let Ok(others) = goals_on(rng, task, &base.init, n, spec.goal_kind, config.shots - 1, &mut seen) else {
            continue;
        };
        let mut shots: Vec<Problem> = others
            .into_iter()
            .enumerate()
            .map(|(i, g)| problem_with(format!("{id}-ex{i}"), base.init.clone(), g, spec.goal_kind, n))
            .collect();
        base.goal_kind = spec.goal_kind;
        shots.push(base);
        let mut worked = solved(shots[..shots.len() - 1].to_vec())?;
        worked.push(Worked {
            problem: shots.pop().expect("example present"),
            plan,
        });
        let reference = solve(&query)?;
        let cost = reference.cost();
        let mut draft = Draft::plain(worked, query, reference, cost);
        draft.prefix_len = Some(prefix_len);
        return Ok(draft);
    }
    Err(CurriculumError::Exhausted(task))
}

/// Replaces `holding(b)` by `b` sitting on the clear block `c`.
pub fn stack_held_block(state: &State, held: &str, onto: &str, vocab: &Vocabulary) -> State {
    let mut out = state.clone();
    out.remove(&vocab.holding(held));
    out.remove(&vocab.clear(onto));
    out.insert(vocab.on(held, onto));
    out.insert(vocab.arm_empty());
    out.insert(vocab.clear(held));
    out
}

fn draft_replanning(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    id: &str,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
) -> Result<Draft, CurriculumError> {
    let vocab = Vocabulary::default();
    let n = spec.num_blocks;
    for _ in 0..MAX_ATTEMPTS {
        let base = random_problem(format!("{id}-base"), n, spec.goal_kind, rng);
        let plan = solve(&base)?;
        let mut candidates = Vec::new();
        let mut state = base.init.clone();
        for (i, step) in plan.steps.iter().enumerate() {
            state = apply_unchecked(&state, step);
            let Some(held) = state
                .iter()
                .find(|a| a.predicate == vocab.holding)
                .map(|a| a.args[0].clone())
            else {
                continue;
            };
            for c in &base.objects {
                if *c != held && state.contains(&vocab.clear(c)) {
                    let changed = stack_held_block(&state, &held, c, &vocab);
                    if !goal_satisfied(&changed, &base.goal) {
                        candidates.push((i + 1, held.clone(), c.clone(), changed));
                    }
                }
            }
        }
        let Some((prefix_len, held, onto, changed)) = candidates.choose(rng).cloned() else { continue };
        debug_assert!(legal_state(&changed, &base.objects));
        let query = problem_with(id.to_string(), changed, base.goal.clone(), base.goal_kind, n);
        let mut seen = BTreeSet::from([
            (base.init.clone(), base.goal_set()),
            (query.init.clone(), query.goal_set()),
        ]);
        let shots = distinct_problems(rng, task, id, n, spec.goal_kind, config.shots, &mut seen)?;
        let reference = solve(&query)?;
        let cost = reference.cost();
        let mut draft = Draft::plain(solved(shots)?, query, reference, cost);
        draft.prefix_len = Some(prefix_len);
        draft.replan = Some(Replan {
            prefix: Plan::new(plan.steps[..prefix_len].to_vec()),
            moved: vocab.on(&held, &onto),
            base,
        });
        return Ok(draft);
    }
    Err(CurriculumError::Exhausted(task))
}

fn draft_generalization(
    rng: &mut ChaCha8Rng,
    task: TaskKind,
    id: &str,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
    program: GeneralizationProgram,
) -> Result<Draft, CurriculumError> {
    if config.shots == 0 {
        return Err(CurriculumError::ShotsRequired(task));
    }
    let n = spec.num_blocks;
    for _ in 0..MAX_ATTEMPTS {
        let query = random_problem(id.to_string(), n, GoalKind::Full, rng);
        let mut seen = BTreeSet::from([(query.init.clone(), query.goal_set())]);
        let shots = distinct_problems(rng, task, id, n, GoalKind::Full, config.shots, &mut seen)?;
        if !(program.applicable)(&query) || !shots.iter().all(|p| (program.applicable)(p)) {
            continue;
        }
        let worked = shots
            .into_iter()
            .map(|problem| Worked {
                plan: (program.trace)(&problem),
                problem,
            })
            .collect();
        let reference = (program.trace)(&query);
        if !validate(&query, &reference).valid {
            return Err(CurriculumError::Inapplicable(program.name.into()));
        }
        let cost = solve(&query)?.cost();
        let mut draft = Draft::plain(worked, query, reference, cost);
        draft.program = Some(program.name);
        return Ok(draft);
    }
    Err(CurriculumError::Inapplicable(program.name.into()))
}

/// All ground atoms of the blocksworld vocabulary over `objects`.
fn atom_universe(objects: &[String], vocab: &Vocabulary) -> Vec<Atom> {
    let mut out = vec![vocab.arm_empty()];
    for x in objects {
        out.push(vocab.on_table(x));
        out.push(vocab.clear(x));
        out.push(vocab.holding(x));
        for y in objects {
            if x != y {
                out.push(vocab.on(x, y));
            }
        }
    }
    out.sort();
    out
}

fn sample_execution(rng: &mut ChaCha8Rng, n: usize, len: usize, questions: usize) -> Execution {
    let vocab = Vocabulary::default();
    let domain = blocksworld_domain();
    let objects = block_names(n);
    let actions = ground_all(&domain, &objects);
    let init = random_init(rng, n);
    let mut state = init.clone();
    let mut steps = Vec::new();
    for _ in 0..len {
        let options: Vec<_> = actions.iter().filter(|a| applicable(&state, a)).collect();
        let Some(a) = options.choose(rng) else { break };
        state = apply_unchecked(&state, a);
        steps.push((*a).clone());
    }
    let (mut yes, mut no): (Vec<Atom>, Vec<Atom>) =
        atom_universe(&objects, &vocab).into_iter().partition(|a| state.contains(a));
    let mut asked = Vec::new();
    for _ in 0..questions {
        let want_yes = rng.random_bool(0.5);
        let pool = match (want_yes && !yes.is_empty()) || no.is_empty() {
            true => &mut yes,
            false => &mut no,
        };
        if pool.is_empty() {
            break;
        }
        let i = rng.random_range(0..pool.len());
        asked.push(pool.remove(i));
    }
    let expected = asked.iter().map(|a| state.contains(a)).collect();
    Execution {
        init,
        actions: Plan::new(steps),
        questions: asked,
        expected,
        final_state: state,
    }
}

fn execution_problem(name: String, exec: &Execution, n: usize) -> Problem {
    let vocab = Vocabulary::default();
    let held = exec.final_state.iter().any(|a| a.predicate == vocab.holding);
    let kind = if held { GoalKind::Partial } else { GoalKind::Full };
    problem_with(name, exec.init.clone(), position_facts(&exec.final_state, &vocab), kind, n)
}

fn draft_plan_execution(
    rng: &mut ChaCha8Rng,
    id: &str,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
) -> Result<Draft, CurriculumError> {
    let n = spec.num_blocks;
    let draw = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(1..=config.max_actions.max(1));
        sample_execution(rng, n, len, config.questions)
    };
    let query_exec = draw(rng);
    let shots: Vec<Execution> = (0..config.shots).map(|_| draw(rng)).collect();
    let query = execution_problem(id.to_string(), &query_exec, n);
    let worked = shots
        .iter()
        .enumerate()
        .map(|(i, e)| Worked {
            problem: execution_problem(format!("{id}-ex{i}"), e, n),
            plan: e.actions.clone(),
        })
        .collect();
    let reference = query_exec.actions.clone();
    let cost = reference.cost();
    let mut draft = Draft::plain(worked, query, reference, cost);
    draft.execution = Some((query_exec, shots));
    Ok(draft)
}

/// Identity or disguise renaming applied uniformly to a draft.
struct View(Option<DisguiseMapping>);

impl View {
    fn problem(&self, p: &Problem) -> Problem {
        self.0.as_ref().map_or_else(|| p.clone(), |m| m.problem(p))
    }
    fn plan(&self, p: &Plan) -> Plan {
        self.0.as_ref().map_or_else(|| p.clone(), |m| m.plan(p))
    }
    fn atom(&self, a: &Atom) -> Atom {
        self.0.as_ref().map_or_else(|| a.clone(), |m| m.atom(a))
    }
    fn state(&self, s: &State) -> State {
        self.0.as_ref().map_or_else(|| s.clone(), |m| m.state(s))
    }
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Yes/no answer block: `1. yes` lines followed by the answer-end tag.
pub fn answers_to_text(answers: &[bool]) -> String {
    let mut out = String::new();
    for (i, a) in answers.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, if *a { "yes" } else { "no" }));
    }
    out.push_str(ANSWER_END_TAG);
    out
}

fn push_execution_statement(
    out: &mut String,
    exec: &Execution,
    view: &View,
    templates: &TemplateSet,
) -> Result<(), TranslateError> {
    out.push_str("[STATEMENT]\n");
    out.push_str(&format!("Initially, {}.\n", state_to_nl(&view.state(&exec.init), templates)?));
    if exec.actions.is_empty() {
        out.push_str("I execute no actions.\n");
    } else {
        out.push_str("I execute the following actions in order:\n");
        let text = plan_to_nl(&view.plan(&exec.actions), templates)?;
        for line in text.lines().filter(|l| *l != templates.plan_end_tag) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str("Afterwards, answer each question with yes or no.\n");
    for (i, q) in exec.questions.iter().enumerate() {
        out.push_str(&format!("{}. Is it true that {}?\n", i + 1, atom_to_nl(&view.atom(q), templates)?));
    }
    out.push('\n');
    out.push_str(ANSWER_CUE);
    out.push('\n');
    Ok(())
}

fn render(
    task: TaskKind,
    id: String,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
    draft: Draft,
) -> Result<TestInstance, CurriculumError> {
    let bw = blocksworld_domain();
    let (domain, view) = match config.disguise {
        DisguiseChoice::None => (bw, View(None)),
        choice => {
            let mode = match choice {
                DisguiseChoice::Deceptive => DisguiseMode::Deceptive(Lexicon::shipped()),
                _ => DisguiseMode::Randomized { seed: spec.seed },
            };
            let (d, _, mapping) = disguise(&bw, std::slice::from_ref(&draft.query), &mode)?;
            (d, View(Some(mapping)))
        }
    };
    let query = view.problem(&draft.query);
    let templates = match view.0 {
        None => TemplateSet::blocksworld(&query.objects),
        Some(_) => TemplateSet::neutral(&domain, &query.objects),
    };
    let mut domain_nl = templates.domain_description.clone();
    if task == TaskKind::OptimalPlanning {
        domain_nl = format!("{}\n\n{}", domain_nl.trim_end(), templates.cost_statement);
    }

    let shots_problems: Vec<Problem> = draft.shots.iter().map(|w| view.problem(&w.problem)).collect();
    let prompt = if let Some((exec, shot_execs)) = &draft.execution {
        let mut out = String::new();
        if !domain_nl.trim().is_empty() {
            out.push_str(domain_nl.trim_end());
            out.push_str("\n\n");
        }
        for shot in shot_execs {
            push_execution_statement(&mut out, shot, &view, &templates)?;
            out.push_str(&answers_to_text(&shot.expected));
            out.push_str("\n\n");
        }
        push_execution_statement(&mut out, exec, &view, &templates)?;
        out
    } else {
        let mut shots = Vec::new();
        for (w, p) in draft.shots.iter().zip(&shots_problems) {
            let note = (task == TaskKind::OptimalPlanning)
                .then(|| format!("The fastest plan takes {} minutes.", w.plan.cost()));
            shots.push(Shot {
                problem: ProblemText::of(p, &templates)?,
                note,
                plan: plan_to_nl(&view.plan(&w.plan), &templates)?,
            });
        }
        let q = match &draft.replan {
            Some(r) => {
                let base = view.problem(&r.base);
                let done: Vec<String> = plan_to_nl(&view.plan(&r.prefix), &templates)?
                    .lines()
                    .filter(|l| *l != templates.plan_end_tag)
                    .map(str::to_string)
                    .collect();
                let note = format!(
                    "I have executed the following actions: {}.\nUnexpectedly, the state changed and now {}.\nThe current state is: {}.\nWhat plan achieves my goal from the current state?",
                    join_and(&done),
                    atom_to_nl(&view.atom(&r.moved), &templates)?,
                    state_to_nl(&query.init, &templates)?,
                );
                Query {
                    problem: ProblemText::of(&base, &templates)?,
                    note: Some(note),
                }
            }
            None => Query {
                problem: ProblemText::of(&query, &templates)?,
                note: (task == TaskKind::OptimalPlanning)
                    .then(|| "What is the fastest plan?".to_string()),
            },
        };
        assemble_prompt(&domain_nl, &shots, &q)
    };

    let execution = draft.execution.as_ref().map(|(e, _)| ExecutionPayload {
        actions: view.plan(&e.actions).tokens(),
        questions: e.questions.iter().map(|q| view.atom(q)).collect(),
        expected: e.expected.clone(),
    });
    let payload = Payload {
        domain: emit_domain(&domain),
        problem: emit_problem(&query),
        examples: shots_problems.iter().map(emit_problem).collect(),
        templates,
        reference_plan: view.plan(&draft.reference).tokens(),
        reference_cost: draft.cost,
        num_blocks: spec.num_blocks,
        prefix_len: draft.prefix_len,
        base_problem: draft.replan.as_ref().map(|r| emit_problem(&view.problem(&r.base))),
        execution,
        program: draft.program.map(str::to_string),
        disguise: view.0.as_ref().map(|m| m.mode),
    };
    Ok(TestInstance {
        id,
        task,
        seed: spec.seed,
        prompt,
        examples_used: draft.shots.iter().map(|w| w.problem.name.clone()).collect(),
        payload,
        scoring_kind: task.scoring_kind(),
    })
}

/// Builds one instance. Identical `(task, spec, config)` give identical
/// instances.
pub fn make_instance(
    task: TaskKind,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
) -> Result<TestInstance, CurriculumError> {
    make_instance_with(task, spec, config, UNSTACK_ALL_THEN_BUILD)
}

pub fn make_instance_with(
    task: TaskKind,
    spec: &BlocksworldInstanceSpec,
    config: &CurriculumConfig,
    program: GeneralizationProgram,
) -> Result<TestInstance, CurriculumError> {
    check_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(task.stream());
    let id = instance_id(task, spec);
    let draft = match task {
        TaskKind::PlanGeneration | TaskKind::OptimalPlanning => {
            draft_plan_generation(&mut rng, task, &id, spec, config)?
        }
        TaskKind::PlanExecution => draft_plan_execution(&mut rng, &id, spec, config)?,
        TaskKind::GoalShuffle => {
            // Three-block partial goals have a single atom and cannot be reordered.
            let kind = if spec.num_blocks <= 3 { GoalKind::Full } else { spec.goal_kind };
            draft_goal_variant(&mut rng, task, &id, spec, config, kind, shuffle_derive)?
        }
        TaskKind::GoalFullToPartial => {
            draft_goal_variant(&mut rng, task, &id, spec, config, GoalKind::Full, full_to_partial_derive)?
        }
        TaskKind::GoalPartialToFull => {
            draft_goal_variant(&mut rng, task, &id, spec, config, GoalKind::Full, partial_to_full_derive)?
        }
        TaskKind::PlanReuse => draft_plan_reuse(&mut rng, task, &id, spec, config)?,
        TaskKind::Replanning => draft_replanning(&mut rng, task, &id, spec, config)?,
        TaskKind::Generalization => draft_generalization(&mut rng, task, &id, spec, config, program)?,
    };
    render(task, id, spec, config, draft)
}

pub fn make_plan_generation(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::PlanGeneration, spec, config)
}

pub fn make_optimal_planning(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::OptimalPlanning, spec, config)
}

pub fn make_plan_execution(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::PlanExecution, spec, config)
}

pub fn make_goal_shuffle(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::GoalShuffle, spec, config)
}

pub fn make_goal_full_to_partial(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::GoalFullToPartial, spec, config)
}

pub fn make_goal_partial_to_full(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::GoalPartialToFull, spec, config)
}

pub fn make_plan_reuse(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::PlanReuse, spec, config)
}

pub fn make_replanning(spec: &BlocksworldInstanceSpec, config: &CurriculumConfig) -> Result<TestInstance, CurriculumError> {
    make_instance(TaskKind::Replanning, spec, config)
}

pub fn make_generalization(
    spec: &BlocksworldInstanceSpec,
    program: GeneralizationProgram,
    config: &CurriculumConfig,
) -> Result<TestInstance, CurriculumError> {
    make_instance_with(TaskKind::Generalization, spec, config, program)
}

/// Executes `actions` from `state` and answers each question.
pub fn execution_answers(state: &State, actions: &Plan, questions: &[Atom]) -> Option<Vec<bool>> {
    let end = execute(state, actions).ok()?;
    Some(questions.iter().map(|q| end.contains(q)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, kind: GoalKind, seed: u64) -> BlocksworldInstanceSpec {
        BlocksworldInstanceSpec {
            num_blocks: n,
            goal_kind: kind,
            seed,
        }
    }

    fn parts(inst: &TestInstance) -> (Domain, Problem, Vec<Problem>, Plan) {
        let d = inst.payload.parse_domain().unwrap();
        let q = inst.payload.parse_problem(&d).unwrap();
        let ex = inst.payload.parse_examples(&d).unwrap();
        let r = inst.payload.reference(&d, &q.objects).unwrap();
        (d, q, ex, r)
    }

    #[test]
    fn task_names_round_trip() {
        for t in TaskKind::ALL {
            assert_eq!(t.as_str().parse::<TaskKind>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{t}\""));
        }
        assert!("nonsense".parse::<TaskKind>().is_err());
    }

    #[test]
    fn plan_generation_one_shot() {
        let inst = make_plan_generation(&spec(4, GoalKind::Full, 3), &CurriculumConfig::default()).unwrap();
        assert_eq!(inst.prompt.matches("[STATEMENT]").count(), 2);
        assert_eq!(inst.prompt.matches("[PLAN END]").count(), 1);
        assert!(inst.prompt.ends_with("[PLAN]\n"));
        let (_, q, ex, r) = parts(&inst);
        assert!(!goal_satisfied(&q.init, &q.goal));
        assert_ne!((&ex[0].init, ex[0].goal_set()), (&q.init, q.goal_set()));
        assert!(validate(&q, &r).valid);
        assert_eq!(inst.examples_used.len(), 1);
    }

    #[test]
    fn instances_are_reproducible() {
        for t in TaskKind::ALL {
            let s = spec(4, GoalKind::Partial, 11);
            let a = make_instance(t, &s, &CurriculumConfig::default()).unwrap();
            let b = make_instance(t, &s, &CurriculumConfig::default()).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn optimal_planning_mentions_cost() {
        let inst = make_optimal_planning(&spec(3, GoalKind::Full, 5), &CurriculumConfig::default()).unwrap();
        assert!(inst.prompt.contains("one minute"));
        assert!(inst.prompt.contains("The fastest plan takes"));
        let (d, q, _, _) = parts(&inst);
        let bfs = crate::planner::oracle_bfs(&d, &q, Default::default()).unwrap();
        assert_eq!(inst.payload.reference_cost, bfs);
    }

    #[test]
    fn shared_init_tasks() {
        let cfg = CurriculumConfig {
            shots: 2,
            ..Default::default()
        };
        for task in [
            TaskKind::GoalShuffle,
            TaskKind::GoalFullToPartial,
            TaskKind::GoalPartialToFull,
            TaskKind::PlanReuse,
        ] {
            for seed in 0..5 {
                let inst = make_instance(task, &spec(4, GoalKind::Full, seed), &cfg).unwrap();
                let (_, q, ex, _) = parts(&inst);
                assert_eq!(ex.len(), 2);
                assert!(ex.iter().all(|e| e.init == q.init), "{task}");
                let last = ex.last().unwrap();
                match task {
                    TaskKind::GoalShuffle => {
                        assert_eq!(last.goal_set(), q.goal_set());
                        assert_ne!(last.goal, q.goal);
                    }
                    TaskKind::GoalFullToPartial => {
                        assert!(q.goal_set().is_subset(&last.goal_set()));
                        assert!(q.goal.len() < last.goal.len());
                    }
                    TaskKind::GoalPartialToFull => {
                        assert!(last.goal_set().is_subset(&q.goal_set()));
                        assert!(last.goal.len() < q.goal.len());
                    }
                    _ => {
                        let p = inst.payload.prefix_len.unwrap();
                        assert!(p >= 1);
                        assert_eq!(inst.payload.reference_cost, p);
                    }
                }
            }
        }
    }

    #[test]
    fn shown_plan_carries_over_for_shuffles_and_subsets() {
        for task in [TaskKind::GoalShuffle, TaskKind::GoalFullToPartial] {
            let inst = make_instance(task, &spec(4, GoalKind::Full, 8), &CurriculumConfig::default()).unwrap();
            let (d, q, ex, _) = parts(&inst);
            let shown = crate::planner::solve_optimal(&d, &ex[0]).unwrap().0;
            assert!(validate(&q, &shown).valid);
        }
    }

    #[test]
    fn replanning_state_is_legal_and_narrated() {
        for seed in 0..20 {
            let inst = make_replanning(&spec(4, GoalKind::Full, seed), &CurriculumConfig::default()).unwrap();
            let (_, q, _, r) = parts(&inst);
            assert!(legal_state(&q.init, &q.objects));
            assert!(validate(&q, &r).valid);
            assert!(inst.prompt.contains("Unexpectedly"));
            assert!(inst.payload.base_problem.is_some());
        }
    }

    #[test]
    fn execution_questions_follow_the_executor() {
        let cfg = CurriculumConfig::default();
        let inst = make_plan_execution(&spec(3, GoalKind::Full, 2), &cfg).unwrap();
        let (d, q, _, _) = parts(&inst);
        let e = inst.payload.execution.as_ref().unwrap();
        assert_eq!(e.questions.len(), 3);
        let actions = parse_plan(&e.actions.join("\n"), &d, &q.objects).unwrap();
        assert_eq!(execution_answers(&q.init, &actions, &e.questions).unwrap(), e.expected);
        assert!(inst.prompt.ends_with("[ANSWER]\n"));
        assert!(inst.prompt.contains("[ANSWER END]"));
    }

    #[test]
    fn execution_after_pickup_red_block_is_not_clear() {
        let v = Vocabulary::default();
        let names = block_names(3);
        let init = towers_state(&vec![vec![0], vec![1], vec![2]], &names, &v);
        let d = blocksworld_domain();
        let plan = Plan::new(vec![crate::pddl::ground_named(&d, "pickup", &["a".into()]).unwrap()]);
        assert_eq!(execution_answers(&init, &plan, &[v.clear("a")]).unwrap(), vec![false]);
        assert_eq!(
            execution_answers(&init, &Plan::default(), &[v.clear("a"), v.holding("a")]).unwrap(),
            vec![true, false]
        );
    }

    #[test]
    fn generalization_examples_are_traces() {
        let inst = make_generalization(&spec(4, GoalKind::Partial, 9), UNSTACK_ALL_THEN_BUILD, &CurriculumConfig::default()).unwrap();
        let (_, q, ex, r) = parts(&inst);
        assert_eq!(r, (UNSTACK_ALL_THEN_BUILD.trace)(&q));
        assert!(validate(&q, &r).valid);
        assert!(inst.prompt.contains(&plan_to_nl(&(UNSTACK_ALL_THEN_BUILD.trace)(&ex[0]), &inst.payload.templates).unwrap()));
        assert_eq!(inst.payload.program.as_deref(), Some("unstack-all-then-build"));
    }

    #[test]
    fn disguised_instances_use_renamed_tokens() {
        let cfg = CurriculumConfig {
            disguise: DisguiseChoice::Deceptive,
            ..Default::default()
        };
        let inst = make_plan_generation(&spec(3, GoalKind::Full, 1), &cfg).unwrap();
        assert!(!inst.prompt.contains("block"));
        assert!(inst.prompt.contains("attack"));
        let (d, q, _, r) = parts(&inst);
        assert_eq!(d.name, "mystery-blocksworld");
        assert!(validate(&q, &r).valid);
    }

    #[test]
    fn zero_shots_where_examples_define_the_task() {
        let cfg = CurriculumConfig {
            shots: 0,
            ..Default::default()
        };
        assert!(matches!(
            make_goal_shuffle(&spec(3, GoalKind::Full, 0), &cfg),
            Err(CurriculumError::ShotsRequired(_))
        ));
        let zero = make_plan_generation(&spec(3, GoalKind::Full, 0), &cfg).unwrap();
        assert_eq!(zero.prompt.matches("[STATEMENT]").count(), 1);
    }

    #[test]
    fn out_of_range_blocks() {
        assert!(matches!(
            make_plan_generation(&spec(7, GoalKind::Full, 0), &CurriculumConfig::default()),
            Err(CurriculumError::Gen(_))
        ));
    }
}

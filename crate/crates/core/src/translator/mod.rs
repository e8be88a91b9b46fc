//! Template-based translation of states, goals and plans to natural language,
//! few-shot prompt assembly, and plan extraction from completions.

use thiserror::Error;

use crate::pddl::{Atom, Plan, Problem, State};

mod extract;
mod templates;

pub use extract::{extract_plan, ExtractError, Extraction, Extractor, ParsePath};
pub use templates::{TemplateSet, DEFAULT_PLAN_END_TAG, DEFAULT_TEMPLATES};

use templates::fill;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("no template for `{0}`")]
    MissingTemplate(String),
    #[error("template for `{name}` must use slots {{0}}..{{{arity}}} exactly once: `{pattern}`")]
    SlotMismatch {
        name: String,
        arity: usize,
        pattern: String,
    },
    #[error("template config: {0}")]
    Config(String),
}

pub fn atom_to_nl(atom: &Atom, templates: &TemplateSet) -> Result<String, TranslateError> {
    let pattern = templates
        .predicate_pattern(&atom.predicate)
        .ok_or_else(|| TranslateError::MissingTemplate(atom.predicate.clone()))?;
    let args: Vec<String> = atom
        .args
        .iter()
        .map(|a| templates.object_name(a).to_string())
        .collect();
    Ok(fill(pattern, &args))
}

/// One clause per atom, ordered by the template set's predicate order and
/// then by arguments.
pub fn state_to_nl(state: &State, templates: &TemplateSet) -> Result<String, TranslateError> {
    let mut atoms: Vec<&Atom> = state.iter().collect();
    atoms.sort_by_key(|a| (templates.predicate_rank(&a.predicate), *a));
    let clauses = atoms
        .into_iter()
        .map(|a| atom_to_nl(a, templates))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(clauses.join(", "))
}

/// Goal clauses in listing order, the last one joined with "and".
pub fn goal_to_nl(goal: &[Atom], templates: &TemplateSet) -> Result<String, TranslateError> {
    let clauses = goal
        .iter()
        .map(|a| atom_to_nl(a, templates))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(join_and(&clauses))
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

pub fn action_to_nl(action: &crate::pddl::GroundAction, templates: &TemplateSet) -> Result<String, TranslateError> {
    let pattern = templates
        .action_pattern(&action.name)
        .ok_or_else(|| TranslateError::MissingTemplate(action.name.clone()))?;
    let args: Vec<String> = action
        .args
        .iter()
        .map(|a| templates.object_name(a).to_string())
        .collect();
    Ok(fill(pattern, &args))
}

/// One imperative line per action followed by the plan-end tag.
pub fn plan_to_nl(plan: &Plan, templates: &TemplateSet) -> Result<String, TranslateError> {
    let mut out = String::new();
    for step in &plan.steps {
        out.push_str(&action_to_nl(step, templates)?);
        out.push('\n');
    }
    out.push_str(&templates.plan_end_tag);
    Ok(out)
}

/// Natural-language rendering of a problem's initial state and goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemText {
    pub initial: String,
    pub goal: String,
}

impl ProblemText {
    pub fn new(init: &State, goal: &[Atom], templates: &TemplateSet) -> Result<Self, TranslateError> {
        Ok(ProblemText {
            initial: state_to_nl(init, templates)?,
            goal: goal_to_nl(goal, templates)?,
        })
    }

    pub fn of(problem: &Problem, templates: &TemplateSet) -> Result<Self, TranslateError> {
        ProblemText::new(&problem.init, &problem.goal, templates)
    }
}

/// A worked example: problem text, optional note printed before the plan
/// (e.g. its cost), and the plan text ending in the plan-end tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shot {
    pub problem: ProblemText,
    pub note: Option<String>,
    pub plan: String,
}

/// The problem the model must solve; `note` precedes the completion cue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub problem: ProblemText,
    pub note: Option<String>,
}

pub const PLAN_CUE: &str = "[PLAN]";

fn push_problem(out: &mut String, problem: &ProblemText, note: Option<&str>) {
    out.push_str("[STATEMENT]\n");
    out.push_str(&format!("Initially, {}.\n", problem.initial));
    out.push_str(&format!("My goal is that {}.\n", problem.goal));
    if let Some(note) = note {
        out.push_str(note);
        out.push('\n');
    }
    out.push('\n');
    out.push_str(PLAN_CUE);
    out.push('\n');
}

/// Domain description, then each example (initial state, goal, plan with
/// its end tag), then the query's initial state and goal followed by the
/// `[PLAN]` cue. An empty domain description is omitted.
pub fn assemble_prompt(domain_nl: &str, examples: &[Shot], query: &Query) -> String {
    let mut out = String::new();
    if !domain_nl.trim().is_empty() {
        out.push_str(domain_nl.trim_end());
        out.push_str("\n\n");
    }
    for shot in examples {
        push_problem(&mut out, &shot.problem, shot.note.as_deref());
        out.push_str(shot.plan.trim_end());
        out.push_str("\n\n");
    }
    push_problem(&mut out, &query.problem, query.note.as_deref());
    out
}

use std::collections::{BTreeMap, BTreeSet};

use super::model::{ActionSchema, Atom, Domain, GroundAction, Plan, Problem, State, ValidationReport};
use super::sexpr::read_one;
use super::{ExecError, PddlError};

/// Binds `schema`'s parameters to `args` positionally.
pub fn ground(schema: &ActionSchema, args: &[String]) -> Result<GroundAction, PddlError> {
    if args.len() != schema.params.len() {
        return Err(PddlError::Arity {
            name: schema.name.clone(),
            expected: schema.params.len(),
            found: args.len(),
        });
    }
    let binding: BTreeMap<&str, &str> = schema
        .params
        .iter()
        .map(String::as_str)
        .zip(args.iter().map(String::as_str))
        .collect();
    let subst = |set: &BTreeSet<Atom>| -> BTreeSet<Atom> {
        set.iter()
            .map(|a| a.map_args(|t| binding.get(t).copied().unwrap_or(t).to_string()))
            .collect()
    };
    Ok(GroundAction {
        name: schema.name.clone(),
        args: args.to_vec(),
        precondition: subst(&schema.precondition),
        add: subst(&schema.add),
        del: subst(&schema.del),
    })
}

/// Grounds an action by name, validating it against the domain.
pub fn ground_named(domain: &Domain, name: &str, args: &[String]) -> Result<GroundAction, PddlError> {
    let schema = domain
        .action(name)
        .ok_or_else(|| PddlError::UnknownAction(name.to_string()))?;
    ground(schema, args)
}

/// Every grounding of every action with pairwise-distinct objects, sorted by
/// action token. Repeated-object groundings (e.g. `(stack a a)`) are omitted;
/// they remain expressible through [`ground`].
pub fn ground_all(domain: &Domain, objects: &[String]) -> Vec<GroundAction> {
    fn rec(
        schema: &ActionSchema,
        objects: &[String],
        current: &mut Vec<String>,
        out: &mut Vec<GroundAction>,
    ) {
        if current.len() == schema.params.len() {
            out.push(ground(schema, current).expect("arity matches by construction"));
            return;
        }
        for o in objects {
            if current.contains(o) {
                continue;
            }
            current.push(o.clone());
            rec(schema, objects, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    for schema in &domain.actions {
        rec(schema, objects, &mut Vec::new(), &mut out);
    }
    out.sort_by_cached_key(GroundAction::token);
    out
}

pub fn applicable(state: &State, action: &GroundAction) -> bool {
    action.precondition.iter().all(|a| state.contains(a))
}

pub fn missing_preconditions(state: &State, action: &GroundAction) -> BTreeSet<Atom> {
    action
        .precondition
        .iter()
        .filter(|a| !state.contains(a))
        .cloned()
        .collect()
}

/// `(state \ del) ∪ add`, or an error naming the unmet preconditions.
pub fn apply(state: &State, action: &GroundAction) -> Result<State, ExecError> {
    let missing = missing_preconditions(state, action);
    if !missing.is_empty() {
        return Err(ExecError::Inapplicable {
            action: action.token(),
            missing,
        });
    }
    Ok(apply_unchecked(state, action))
}

pub(crate) fn apply_unchecked(state: &State, action: &GroundAction) -> State {
    let mut next = state.clone();
    for a in &action.del {
        next.remove(a);
    }
    for a in &action.add {
        next.insert(a.clone());
    }
    next
}

/// Failure of a plan execution at `step` (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionFailure {
    pub step: usize,
    pub missing: BTreeSet<Atom>,
    /// State in which the failing step was attempted.
    pub state: State,
}

pub fn execute(state: &State, plan: &Plan) -> Result<State, ExecutionFailure> {
    let mut current = state.clone();
    for (step, action) in plan.steps.iter().enumerate() {
        let missing = missing_preconditions(&current, action);
        if !missing.is_empty() {
            return Err(ExecutionFailure {
                step,
                missing,
                state: current,
            });
        }
        current = apply_unchecked(&current, action);
    }
    Ok(current)
}

pub fn goal_satisfied<'a>(state: &State, goal: impl IntoIterator<Item = &'a Atom>) -> bool {
    goal.into_iter().all(|g| state.contains(g))
}

pub fn validate(problem: &Problem, plan: &Plan) -> ValidationReport {
    validate_from(&problem.init, &problem.goal, plan)
}

/// Validation from an arbitrary start state, e.g. a replanning state.
pub fn validate_from(init: &State, goal: &[Atom], plan: &Plan) -> ValidationReport {
    match execute(init, plan) {
        Ok(final_state) => {
            let unmet: BTreeSet<Atom> = goal
                .iter()
                .filter(|g| !final_state.contains(g))
                .cloned()
                .collect();
            ValidationReport {
                valid: unmet.is_empty(),
                failure_step: None,
                missing_preconditions: BTreeSet::new(),
                unmet_goals: unmet,
                final_state: Some(final_state),
            }
        }
        Err(f) => ValidationReport {
            valid: false,
            failure_step: Some(f.step),
            missing_preconditions: f.missing,
            unmet_goals: BTreeSet::new(),
            final_state: Some(f.state),
        },
    }
}

/// Parses a plan file: one `(action obj...)` per line, `;` comments and
/// blank lines ignored. Every object must be declared.
pub fn parse_plan(text: &str, domain: &Domain, objects: &[String]) -> Result<Plan, PddlError> {
    let mut steps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let expr = read_one(line).map_err(|e| match e {
            PddlError::Syntax { col, msg, .. } => PddlError::Syntax {
                line: i + 1,
                col,
                msg,
            },
            other => other,
        })?;
        let items = expr.as_list().ok_or_else(|| PddlError::Syntax {
            line: i + 1,
            col: 1,
            msg: "expected (action args...)".into(),
        })?;
        let mut syms = items.iter().map(|s| {
            s.as_sym().map(str::to_string).ok_or_else(|| PddlError::Syntax {
                line: i + 1,
                col: s.pos().col,
                msg: "nested list in plan step".into(),
            })
        });
        let name = syms.next().ok_or_else(|| PddlError::Syntax {
            line: i + 1,
            col: 1,
            msg: "empty plan step".into(),
        })??;
        let args = syms.collect::<Result<Vec<_>, _>>()?;
        if let Some(bad) = args.iter().find(|a| !objects.contains(a)) {
            return Err(PddlError::UndeclaredObject(bad.clone()));
        }
        steps.push(ground_named(domain, &name, &args)?);
    }
    Ok(Plan::new(steps))
}

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PddlError;

/// Returns true for PDDL variable names (`?ob`).
pub fn is_variable(term: &str) -> bool {
    term.starts_with('?')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<String>,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// A predicate applied to terms. Terms beginning with `?` are variables;
/// everything else is an object name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<P, I, S>(predicate: P, args: I) -> Self
    where
        P: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Atom {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    pub fn is_grounded(&self) -> bool {
        !self.args.iter().any(|a| is_variable(a))
    }

    /// Replaces every argument through `f`.
    pub fn map_args(&self, mut f: impl FnMut(&str) -> String) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|a| f(a)).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Lifted STRIPS operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<String>,
    pub precondition: BTreeSet<Atom>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub predicates: Vec<PredicateSchema>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Checks the structural invariants the parser enforces, so that
    /// programmatically built domains get the same guarantees.
    pub fn check(&self) -> Result<(), PddlError> {
        let mut seen = BTreeSet::new();
        for p in &self.predicates {
            if p.name.is_empty() {
                return Err(PddlError::Invalid("empty predicate name".into()));
            }
            if !seen.insert(p.name.as_str()) {
                return Err(PddlError::Duplicate(format!("predicate `{}`", p.name)));
            }
            let params: BTreeSet<_> = p.params.iter().collect();
            if params.len() != p.params.len() {
                return Err(PddlError::Duplicate(format!(
                    "parameter in predicate `{}`",
                    p.name
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for a in &self.actions {
            if !seen.insert(a.name.as_str()) {
                return Err(PddlError::Duplicate(format!("action `{}`", a.name)));
            }
            let params: BTreeSet<&str> = a.params.iter().map(String::as_str).collect();
            if params.len() != a.params.len() {
                return Err(PddlError::Duplicate(format!(
                    "parameter in action `{}`",
                    a.name
                )));
            }
            for atom in a.precondition.iter().chain(&a.add).chain(&a.del) {
                self.check_atom(atom)?;
                for arg in &atom.args {
                    if is_variable(arg) && !params.contains(arg.as_str()) {
                        return Err(PddlError::UnboundVariable {
                            action: a.name.clone(),
                            var: arg.clone(),
                        });
                    }
                }
            }
            if let Some(atom) = a.add.intersection(&a.del).next() {
                return Err(PddlError::Invalid(format!(
                    "action `{}` both adds and deletes {atom}",
                    a.name
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn check_atom(&self, atom: &Atom) -> Result<(), PddlError> {
        let schema = self
            .predicate(&atom.predicate)
            .ok_or_else(|| PddlError::UnknownPredicate(atom.predicate.clone()))?;
        if schema.arity() != atom.args.len() {
            return Err(PddlError::Arity {
                name: atom.predicate.clone(),
                expected: schema.arity(),
                found: atom.args.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    #[default]
    Full,
    Partial,
}

/// Closed-world state: atoms absent from the set are false. Kept sorted so
/// equality, hashing and iteration order are canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct State(BTreeSet<Atom>);

impl State {
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Self {
        State(atoms.into_iter().collect())
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.0
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.0.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn insert(&mut self, atom: Atom) -> bool {
        self.0.insert(atom)
    }

    pub fn remove(&mut self, atom: &Atom) -> bool {
        self.0.remove(atom)
    }

    pub fn into_atoms(self) -> BTreeSet<Atom> {
        self.0
    }
}

impl FromIterator<Atom> for State {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        State::new(iter)
    }
}

/// A planning problem over a domain. The goal keeps its listing order (which
/// matters for prompt text) but is interpreted as a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<String>,
    pub init: State,
    pub goal: Vec<Atom>,
    #[serde(default)]
    pub goal_kind: GoalKind,
}

impl Problem {
    pub fn goal_set(&self) -> BTreeSet<Atom> {
        self.goal.iter().cloned().collect()
    }

    /// Checks that every atom is grounded over `objects` and known to
    /// `domain`, and that the goal is nonempty.
    pub fn check(&self, domain: &Domain) -> Result<(), PddlError> {
        let objects: BTreeSet<&str> = self.objects.iter().map(String::as_str).collect();
        if objects.len() != self.objects.len() {
            return Err(PddlError::Duplicate("object".into()));
        }
        if self.goal.is_empty() {
            return Err(PddlError::EmptyGoal);
        }
        for atom in self.init.iter().chain(&self.goal) {
            domain.check_atom(atom)?;
            for arg in &atom.args {
                if !objects.contains(arg.as_str()) {
                    return Err(PddlError::UndeclaredObject(arg.clone()));
                }
            }
        }
        let unique: BTreeSet<&Atom> = self.goal.iter().collect();
        if unique.len() != self.goal.len() {
            return Err(PddlError::Duplicate("goal atom".into()));
        }
        Ok(())
    }
}

/// An action schema with its parameters bound to objects.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub precondition: BTreeSet<Atom>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
}

impl GroundAction {
    /// The atom-like token `(name arg...)`, used as the plan file line and as
    /// the symbol for edit distances and tie-breaking.
    pub fn token(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Sequence of ground actions with unit cost per step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<GroundAction>,
}

impl Plan {
    pub fn new(steps: Vec<GroundAction>) -> Self {
        Plan { steps }
    }

    pub fn cost(&self) -> usize {
        self.steps.len()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tokens(&self) -> Vec<String> {
        self.steps.iter().map(GroundAction::token).collect()
    }

    /// One action per line, `(action obj1 obj2)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&s.token());
            out.push('\n');
        }
        out
    }
}

/// Outcome of checking a plan against a problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub failure_step: Option<usize>,
    pub missing_preconditions: BTreeSet<Atom>,
    pub unmet_goals: BTreeSet<Atom>,
    /// State after the last successfully applied step.
    pub final_state: Option<State>,
}

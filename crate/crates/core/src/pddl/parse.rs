use std::collections::BTreeSet;

use super::model::{is_variable, ActionSchema, Atom, Domain, GoalKind, PredicateSchema, Problem, State};
use super::sexpr::{read_one, Pos, SExpr};
use super::PddlError;

/// Comment pragma recording a partial goal; PDDL itself has no notion of it.
pub(crate) const GOAL_KIND_PRAGMA: &str = "; goal-kind: partial";

fn syntax(pos: Pos, msg: impl Into<String>) -> PddlError {
    PddlError::Syntax {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    }
}

fn unsupported(pos: Pos, feature: impl Into<String>) -> PddlError {
    PddlError::Unsupported {
        line: pos.line,
        col: pos.col,
        feature: feature.into(),
    }
}

fn expect_sym<'a>(e: &'a SExpr, what: &str) -> Result<&'a str, PddlError> {
    e.as_sym()
        .ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

fn expect_list<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], PddlError> {
    e.as_list()
        .ok_or_else(|| syntax(e.pos(), format!("expected {what}")))
}

/// Splits `(define (KIND name) sections...)` into the name and sections.
fn define_header<'a>(root: &'a SExpr, kind: &str) -> Result<(&'a str, &'a [SExpr]), PddlError> {
    let items = expect_list(root, "(define ...)")?;
    match items.first().and_then(SExpr::as_sym) {
        Some("define") => {}
        _ => return Err(syntax(root.pos(), "expected (define ...)")),
    }
    let header = items
        .get(1)
        .ok_or_else(|| syntax(root.pos(), format!("missing ({kind} <name>)")))?;
    let hl = expect_list(header, &format!("({kind} <name>)"))?;
    if hl.len() != 2 || hl[0].as_sym() != Some(kind) {
        return Err(syntax(header.pos(), format!("expected ({kind} <name>)")));
    }
    let name = expect_sym(&hl[1], &format!("{kind} name"))?;
    Ok((name, &items[2..]))
}

/// Parameter lists are flat variable lists; a `-` marks typing, which the
/// STRIPS subset does not support.
fn parse_params(e: &SExpr, owner: &str) -> Result<Vec<String>, PddlError> {
    let items = expect_list(e, "parameter list")?;
    let mut params = Vec::with_capacity(items.len());
    for item in items {
        let s = expect_sym(item, "variable")?;
        if s == "-" {
            return Err(unsupported(item.pos(), "typing"));
        }
        if !is_variable(s) || s.len() < 2 {
            return Err(syntax(item.pos(), format!("expected a ?variable, found `{s}`")));
        }
        if params.iter().any(|p| p == s) {
            return Err(PddlError::Duplicate(format!("parameter `{s}` in `{owner}`")));
        }
        params.push(s.to_string());
    }
    Ok(params)
}

fn parse_atom(e: &SExpr) -> Result<Atom, PddlError> {
    let items = expect_list(e, "atom")?;
    let (head, args) = items
        .split_first()
        .ok_or_else(|| syntax(e.pos(), "empty atom"))?;
    let predicate = expect_sym(head, "predicate name")?;
    match predicate {
        "not" | "and" | "or" | "imply" | "forall" | "exists" | "when" | "=" | "increase"
        | "decrease" => return Err(unsupported(e.pos(), format!("`{predicate}` here"))),
        _ => {}
    }
    let args = args
        .iter()
        .map(|a| expect_sym(a, "term").map(str::to_string))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Atom {
        predicate: predicate.to_string(),
        args,
    })
}

/// Flattens `(and a b ...)`, a single atom, or `()` into its conjuncts.
fn conjuncts(e: &SExpr) -> Result<&[SExpr], PddlError> {
    let items = expect_list(e, "formula")?;
    match items.first().and_then(SExpr::as_sym) {
        None if items.is_empty() => Ok(&[]),
        Some("and") => Ok(&items[1..]),
        _ => Ok(std::slice::from_ref(e)),
    }
}

fn parse_precondition(e: &SExpr) -> Result<BTreeSet<Atom>, PddlError> {
    let mut out = BTreeSet::new();
    for c in conjuncts(e)? {
        if c.head() == Some("not") {
            return Err(unsupported(c.pos(), "negative preconditions"));
        }
        out.insert(parse_atom(c)?);
    }
    Ok(out)
}

fn parse_effect(e: &SExpr) -> Result<(BTreeSet<Atom>, BTreeSet<Atom>), PddlError> {
    let mut add = BTreeSet::new();
    let mut del = BTreeSet::new();
    for c in conjuncts(e)? {
        if c.head() == Some("not") {
            let inner = expect_list(c, "(not <atom>)")?;
            if inner.len() != 2 {
                return Err(syntax(c.pos(), "expected (not <atom>)"));
            }
            del.insert(parse_atom(&inner[1])?);
        } else {
            add.insert(parse_atom(c)?);
        }
    }
    Ok((add, del))
}

fn parse_action(items: &[SExpr], pos: Pos) -> Result<ActionSchema, PddlError> {
    let name = items
        .get(1)
        .ok_or_else(|| syntax(pos, "missing action name"))
        .and_then(|e| expect_sym(e, "action name"))?
        .to_string();
    let mut params = Vec::new();
    let mut precondition = BTreeSet::new();
    let mut add = BTreeSet::new();
    let mut del = BTreeSet::new();
    let mut rest = items[2..].iter();
    while let Some(key) = rest.next() {
        let k = expect_sym(key, "action keyword")?;
        let value = rest
            .next()
            .ok_or_else(|| syntax(key.pos(), format!("missing value for {k}")))?;
        match k {
            ":parameters" => params = parse_params(value, &name)?,
            ":precondition" => precondition = parse_precondition(value)?,
            ":effect" => (add, del) = parse_effect(value)?,
            other => return Err(unsupported(key.pos(), format!("action keyword {other}"))),
        }
    }
    Ok(ActionSchema {
        name,
        params,
        precondition,
        add,
        del,
    })
}

fn check_requirements(items: &[SExpr]) -> Result<(), PddlError> {
    for r in &items[1..] {
        match expect_sym(r, "requirement")? {
            ":strips" => {}
            other => return Err(unsupported(r.pos(), format!("requirement {other}"))),
        }
    }
    Ok(())
}

/// Parses a STRIPS domain. Typing, negative preconditions and other ADL
/// features are rejected with a diagnostic.
pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let root = read_one(text)?;
    let (name, sections) = define_header(&root, "domain")?;
    let mut domain = Domain {
        name: name.to_string(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    for section in sections {
        let items = expect_list(section, "domain section")?;
        match items.first().and_then(SExpr::as_sym) {
            Some(":requirements") => check_requirements(items)?,
            Some(":predicates") => {
                for p in &items[1..] {
                    let pl = expect_list(p, "predicate declaration")?;
                    let (head, rest) = pl
                        .split_first()
                        .ok_or_else(|| syntax(p.pos(), "empty predicate declaration"))?;
                    let pname = expect_sym(head, "predicate name")?.to_string();
                    let params = parse_params(&SExpr::List(rest.to_vec(), p.pos()), &pname)?;
                    domain.predicates.push(PredicateSchema { name: pname, params });
                }
            }
            Some(":action") => domain.actions.push(parse_action(items, section.pos())?),
            Some(other) => return Err(unsupported(section.pos(), format!("section {other}"))),
            None => return Err(syntax(section.pos(), "expected a (:keyword ...) section")),
        }
    }
    domain.check()?;
    Ok(domain)
}

/// Parses a problem and validates every atom against `domain`.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem, PddlError> {
    let root = read_one(text)?;
    let (name, sections) = define_header(&root, "problem")?;
    let mut domain_name = None;
    let mut objects = Vec::new();
    let mut init = State::default();
    let mut goal = Vec::new();
    for section in sections {
        let items = expect_list(section, "problem section")?;
        match items.first().and_then(SExpr::as_sym) {
            Some(":domain") => {
                let d = items
                    .get(1)
                    .ok_or_else(|| syntax(section.pos(), "missing domain name"))?;
                domain_name = Some(expect_sym(d, "domain name")?.to_string());
            }
            Some(":requirements") => check_requirements(items)?,
            Some(":objects") => {
                for o in &items[1..] {
                    let s = expect_sym(o, "object name")?;
                    if s == "-" {
                        return Err(unsupported(o.pos(), "typed objects"));
                    }
                    objects.push(s.to_string());
                }
            }
            Some(":init") => {
                for a in &items[1..] {
                    if a.head() == Some("not") {
                        return Err(unsupported(a.pos(), "negative literals in :init"));
                    }
                    init.insert(parse_atom(a)?);
                }
            }
            Some(":goal") => {
                let g = items
                    .get(1)
                    .ok_or_else(|| syntax(section.pos(), "missing goal formula"))?;
                for c in conjuncts(g)? {
                    if c.head() == Some("not") {
                        return Err(unsupported(c.pos(), "negative goals"));
                    }
                    let atom = parse_atom(c)?;
                    if !goal.contains(&atom) {
                        goal.push(atom);
                    }
                }
            }
            Some(other) => return Err(unsupported(section.pos(), format!("section {other}"))),
            None => return Err(syntax(section.pos(), "expected a (:keyword ...) section")),
        }
    }
    let domain_name = domain_name.ok_or_else(|| syntax(root.pos(), "missing (:domain <name>)"))?;
    if domain_name != domain.name {
        return Err(PddlError::DomainMismatch {
            expected: domain.name.clone(),
            found: domain_name,
        });
    }
    let goal_kind = if text.lines().any(|l| l.trim() == GOAL_KIND_PRAGMA) {
        GoalKind::Partial
    } else {
        GoalKind::Full
    };
    let problem = Problem {
        name: name.to_string(),
        domain_name,
        objects,
        init,
        goal,
        goal_kind,
    };
    problem.check(domain)?;
    Ok(problem)
}

use std::fmt::Write;

use super::model::{ActionSchema, Atom, Domain, GoalKind, Problem};
use super::parse::GOAL_KIND_PRAGMA;

fn conjunction<'a>(atoms: impl IntoIterator<Item = &'a Atom>, negated: bool) -> Vec<String> {
    atoms
        .into_iter()
        .map(|a| if negated { format!("(not {a})") } else { a.to_string() })
        .collect()
}

fn and_form(parts: &[String]) -> String {
    if parts.is_empty() {
        "()".to_string()
    } else {
        format!("(and {})", parts.join(" "))
    }
}

fn emit_action(out: &mut String, a: &ActionSchema) {
    let _ = writeln!(out, "  (:action {}", a.name);
    let _ = writeln!(out, "    :parameters ({})", a.params.join(" "));
    let pre = conjunction(&a.precondition, false);
    let _ = writeln!(out, "    :precondition {}", and_form(&pre));
    let mut eff = conjunction(&a.add, false);
    eff.extend(conjunction(&a.del, true));
    let _ = writeln!(out, "    :effect {})", and_form(&eff));
}

pub fn emit_domain(domain: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", domain.name);
    if !domain.predicates.is_empty() || !domain.actions.is_empty() {
        out.push_str("  (:requirements :strips)\n");
    }
    if !domain.predicates.is_empty() {
        out.push_str("  (:predicates");
        for p in &domain.predicates {
            if p.params.is_empty() {
                let _ = write!(out, " ({})", p.name);
            } else {
                let _ = write!(out, " ({} {})", p.name, p.params.join(" "));
            }
        }
        out.push_str(")\n");
    }
    for a in &domain.actions {
        emit_action(&mut out, a);
    }
    out.push_str(")\n");
    out
}

pub fn emit_problem(problem: &Problem) -> String {
    let mut out = String::new();
    if problem.goal_kind == GoalKind::Partial {
        let _ = writeln!(out, "{GOAL_KIND_PRAGMA}");
    }
    let _ = writeln!(out, "(define (problem {})", problem.name);
    let _ = writeln!(out, "  (:domain {})", problem.domain_name);
    let _ = writeln!(out, "  (:objects {})", problem.objects.join(" "));
    out.push_str("  (:init");
    for a in problem.init.iter() {
        let _ = write!(out, "\n    {a}");
    }
    out.push_str(")\n");
    let goal = conjunction(&problem.goal, false);
    let _ = writeln!(out, "  (:goal {}))", and_form(&goal));
    out
}

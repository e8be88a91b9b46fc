//! STRIPS subset of PDDL: parsing, emission, grounding, execution and plan
//! validation.

use std::collections::BTreeSet;

use thiserror::Error;

mod emit;
mod exec;
mod model;
mod parse;
pub mod sexpr;

pub use emit::{emit_domain, emit_problem};
pub use exec::{
    applicable, apply, execute, goal_satisfied, ground, ground_all, ground_named,
    missing_preconditions, parse_plan, validate, validate_from, ExecutionFailure,
};
pub(crate) use exec::apply_unchecked;
pub use model::{
    is_variable, ActionSchema, Atom, Domain, GoalKind, GroundAction, Plan, PredicateSchema,
    Problem, State, ValidationReport,
};
pub use parse::{parse_domain, parse_problem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unsupported PDDL feature at {line}:{col}: {feature} (only the STRIPS subset is accepted)")]
    Unsupported {
        line: usize,
        col: usize,
        feature: String,
    },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("arity mismatch for `{name}`: expected {expected}, found {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("reference to undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("goal nonempty violated")]
    EmptyGoal,
    #[error("duplicate {0}")]
    Duplicate(String),
    #[error("variable `{var}` in action `{action}` is not a parameter")]
    UnboundVariable { action: String, var: String },
    #[error("problem is for domain `{found}`, expected `{expected}`")]
    DomainMismatch { expected: String, found: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("action {action} is not applicable; missing {}", fmt_atoms(.missing))]
    Inapplicable {
        action: String,
        missing: BTreeSet<Atom>,
    },
}

pub(crate) fn fmt_atoms(atoms: &BTreeSet<Atom>) -> String {
    let parts: Vec<String> = atoms.iter().map(Atom::to_string).collect();
    format!("{{{}}}", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PICKUP_DOMAIN: &str = "
(define (domain bw)
  (:predicates (clear ?x) (on-table ?x) (arm-empty) (holding ?x) (on ?x ?y))
  (:action pickup
    :parameters (?ob)
    :precondition (and (clear ?ob) (on-table ?ob) (arm-empty))
    :effect (and (holding ?ob) (not (clear ?ob)) (not (on-table ?ob))
                 (not (arm-empty))))
  (:action stack
    :parameters (?ob ?underob)
    :precondition (and (clear ?underob) (holding ?ob))
    :effect (and (arm-empty) (clear ?ob) (on ?ob ?underob)
                 (not (clear ?underob)) (not (holding ?ob)))))";

    fn atom(p: &str, args: &[&str]) -> Atom {
        Atom::new(p, args.iter().copied())
    }

    fn objs(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pickup_listing_parses_into_pre_add_del() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let pickup = d.action("pickup").unwrap();
        assert_eq!(pickup.params, vec!["?ob"]);
        let pre: BTreeSet<_> = [
            atom("clear", &["?ob"]),
            atom("on-table", &["?ob"]),
            atom("arm-empty", &[]),
        ]
        .into();
        assert_eq!(pickup.precondition, pre);
        assert_eq!(pickup.add, [atom("holding", &["?ob"])].into());
        assert_eq!(pickup.del, pre);
    }

    #[test]
    fn empty_domain() {
        let d = parse_domain("(define (domain d))").unwrap();
        assert_eq!(d.name, "d");
        assert!(d.predicates.is_empty() && d.actions.is_empty());
        assert_eq!(parse_domain(&emit_domain(&d)).unwrap(), d);
    }

    #[test]
    fn identifiers_are_case_insensitive() {
        let d = parse_domain("(DEFINE (DOMAIN Foo) (:PREDICATES (P ?X)))").unwrap();
        assert_eq!(d.name, "foo");
        assert_eq!(d.predicates[0].name, "p");
    }

    #[test]
    fn unbalanced_parentheses_report_position() {
        let err = parse_domain("(define (domain d)\n  (:predicates (p ?x)").unwrap_err();
        assert!(matches!(err, PddlError::Syntax { line: 2, col: 3, .. }), "{err}");
    }

    #[test]
    fn unknown_predicate_and_arity_in_action_body() {
        let unknown = "(define (domain d) (:predicates (p ?x))
            (:action a :parameters (?x) :precondition (q ?x) :effect (p ?x)))";
        assert_eq!(
            parse_domain(unknown).unwrap_err(),
            PddlError::UnknownPredicate("q".into())
        );
        let arity = "(define (domain d) (:predicates (p ?x))
            (:action a :parameters (?x) :precondition (p ?x ?x) :effect (p ?x)))";
        assert!(matches!(
            parse_domain(arity).unwrap_err(),
            PddlError::Arity { expected: 1, found: 2, .. }
        ));
    }

    #[test]
    fn richer_pddl_is_rejected() {
        let typed = "(define (domain d) (:predicates (p ?x - block)))";
        assert!(matches!(parse_domain(typed), Err(PddlError::Unsupported { .. })));
        let negpre = "(define (domain d) (:predicates (p ?x))
            (:action a :parameters (?x) :precondition (not (p ?x)) :effect (p ?x)))";
        assert!(matches!(parse_domain(negpre), Err(PddlError::Unsupported { .. })));
        let reqs = "(define (domain d) (:requirements :strips :typing))";
        assert!(matches!(parse_domain(reqs), Err(PddlError::Unsupported { .. })));
    }

    #[test]
    fn unbound_variable_is_rejected() {
        let text = "(define (domain d) (:predicates (p ?x))
            (:action a :parameters (?x) :precondition (p ?y) :effect (p ?x)))";
        assert!(matches!(parse_domain(text), Err(PddlError::UnboundVariable { .. })));
    }

    const PROBLEM: &str = "(define (problem p3) (:domain bw)
        (:objects a b c)
        (:init (on-table a) (on-table b) (on-table c) (clear a) (clear b) (clear c) (arm-empty))
        (:goal (and (on a b))))";

    #[test]
    fn problem_is_transcribed() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let p = parse_problem(PROBLEM, &d).unwrap();
        assert_eq!(p.objects, objs(&["a", "b", "c"]));
        assert_eq!(p.init.len(), 7);
        assert!(p.init.contains(&atom("arm-empty", &[])));
        assert_eq!(p.goal, vec![atom("on", &["a", "b"])]);
        assert_eq!(p.goal_kind, GoalKind::Full);
        assert_eq!(parse_problem(&emit_problem(&p), &d).unwrap(), p);
    }

    #[test]
    fn empty_goal_and_undeclared_object_are_errors() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let empty = PROBLEM.replace("(and (on a b))", "(and)");
        let err = parse_problem(&empty, &d).unwrap_err();
        assert_eq!(err, PddlError::EmptyGoal);
        assert_eq!(err.to_string(), "goal nonempty violated");
        let undeclared = PROBLEM.replace("(on a b)", "(on a d)");
        assert_eq!(
            parse_problem(&undeclared, &d).unwrap_err(),
            PddlError::UndeclaredObject("d".into())
        );
        let unknown = PROBLEM.replace("(on a b)", "(above a b)");
        assert_eq!(
            parse_problem(&unknown, &d).unwrap_err(),
            PddlError::UnknownPredicate("above".into())
        );
    }

    #[test]
    fn ground_substitutes_and_checks_arity() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let g = ground(d.action("pickup").unwrap(), &objs(&["a"])).unwrap();
        assert_eq!(
            g.precondition,
            [atom("clear", &["a"]), atom("on-table", &["a"]), atom("arm-empty", &[])].into()
        );
        assert_eq!(g.to_string(), "(pickup a)");
        assert!(matches!(
            ground(d.action("stack").unwrap(), &objs(&["a"])),
            Err(PddlError::Arity { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn apply_pickup_and_failure_names_missing_atoms() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let pickup = ground(d.action("pickup").unwrap(), &objs(&["a"])).unwrap();
        let s = State::new([atom("clear", &["a"]), atom("on-table", &["a"]), atom("arm-empty", &[])]);
        assert!(applicable(&s, &pickup));
        assert_eq!(apply(&s, &pickup).unwrap(), State::new([atom("holding", &["a"])]));

        let s2 = State::new([atom("clear", &["a"]), atom("on-table", &["a"])]);
        assert!(!applicable(&s2, &pickup));
        match apply(&s2, &pickup).unwrap_err() {
            ExecError::Inapplicable { missing, .. } => {
                assert_eq!(missing, [atom("arm-empty", &[])].into())
            }
        }
    }

    #[test]
    fn empty_precondition_is_always_applicable() {
        let d = parse_domain(
            "(define (domain d) (:predicates (p)) (:action noop :parameters () :precondition () :effect (p)))",
        )
        .unwrap();
        let g = ground(d.action("noop").unwrap(), &[]).unwrap();
        assert!(applicable(&State::default(), &g));
    }

    #[test]
    fn execute_reports_first_failing_step() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let init = State::new([
            atom("on-table", &["a"]),
            atom("on-table", &["b"]),
            atom("clear", &["a"]),
            atom("clear", &["b"]),
            atom("arm-empty", &[]),
        ]);
        assert_eq!(execute(&init, &Plan::default()).unwrap(), init);
        let stack_first = Plan::new(vec![ground(d.action("stack").unwrap(), &objs(&["a", "b"])).unwrap()]);
        let f = execute(&init, &stack_first).unwrap_err();
        assert_eq!(f.step, 0);
        assert_eq!(f.missing, [atom("holding", &["a"])].into());

        let plan = parse_plan("(pickup a)\n\n(stack a b) ; done\n", &d, &objs(&["a", "b"])).unwrap();
        let end = execute(&init, &plan).unwrap();
        assert_eq!(
            end,
            State::new([
                atom("on", &["a", "b"]),
                atom("clear", &["a"]),
                atom("on-table", &["b"]),
                atom("arm-empty", &[]),
            ])
        );
    }

    #[test]
    fn validate_diagnostics() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let p = parse_problem(PROBLEM, &d).unwrap();
        let objects = p.objects.clone();
        let good = parse_plan("(pickup a)\n(stack a b)", &d, &objects).unwrap();
        let r = validate(&p, &good);
        assert!(r.valid && r.failure_step.is_none() && r.unmet_goals.is_empty());

        let swapped = parse_plan("(stack a b)\n(pickup a)", &d, &objects).unwrap();
        let r = validate(&p, &swapped);
        assert!(!r.valid);
        assert_eq!(r.failure_step, Some(0));

        let short = parse_plan("(pickup a)", &d, &objects).unwrap();
        let r = validate(&p, &short);
        assert!(!r.valid && r.failure_step.is_none());
        assert_eq!(r.unmet_goals, [atom("on", &["a", "b"])].into());

        let mut trivial = p.clone();
        trivial.goal = vec![atom("clear", &["c"])];
        assert!(validate(&trivial, &Plan::default()).valid);
    }

    #[test]
    fn plan_file_rejects_unknown_action_and_object() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let objects = objs(&["a", "b"]);
        assert_eq!(
            parse_plan("(fly a)", &d, &objects).unwrap_err(),
            PddlError::UnknownAction("fly".into())
        );
        assert_eq!(
            parse_plan("(pickup z)", &d, &objects).unwrap_err(),
            PddlError::UndeclaredObject("z".into())
        );
    }

    #[test]
    fn ground_all_uses_distinct_objects() {
        let d = parse_domain(PICKUP_DOMAIN).unwrap();
        let all = ground_all(&d, &objs(&["a", "b", "c"]));
        // 3 pickups + 6 stacks
        assert_eq!(all.len(), 9);
        assert!(all.windows(2).all(|w| w[0].token() < w[1].token()));
    }
}

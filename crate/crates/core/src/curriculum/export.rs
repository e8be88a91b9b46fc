use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocksworld::Vocabulary;
use crate::pddl::{validate, Domain, Plan, Problem};
use crate::translator::{assemble_prompt, plan_to_nl, ProblemText, Query, TemplateSet, TranslateError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneRecord {
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{problems} problems but {plans} plans")]
    LengthMismatch { problems: usize, plans: usize },
    #[error("plan {index} does not solve `{problem}`")]
    InvalidPlan { index: usize, problem: String },
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn templates_for(domain: &Domain, problem: &Problem) -> TemplateSet {
    if Vocabulary::default().matches(domain) {
        TemplateSet::blocksworld(&problem.objects)
    } else {
        TemplateSet::neutral(domain, &problem.objects)
    }
}

/// Zero-shot prompt without domain text, and the plan text with its tag.
pub fn finetune_record(domain: &Domain, problem: &Problem, plan: &Plan) -> Result<FinetuneRecord, TranslateError> {
    let templates = templates_for(domain, problem);
    let query = Query {
        problem: ProblemText::of(problem, &templates)?,
        note: None,
    };
    Ok(FinetuneRecord {
        prompt: assemble_prompt("", &[], &query),
        completion: plan_to_nl(plan, &templates)?,
    })
}

/// Writes one JSON line per (problem, plan) pair. Every plan is validated
/// before anything is written.
pub fn export_finetune_dataset<W: Write>(
    domain: &Domain,
    problems: &[Problem],
    plans: &[Plan],
    mut out: W,
) -> Result<usize, ExportError> {
    if problems.len() != plans.len() {
        return Err(ExportError::LengthMismatch {
            problems: problems.len(),
            plans: plans.len(),
        });
    }
    let mut records = Vec::with_capacity(problems.len());
    for (index, (problem, plan)) in problems.iter().zip(plans).enumerate() {
        if !validate(problem, plan).valid {
            return Err(ExportError::InvalidPlan {
                index,
                problem: problem.name.clone(),
            });
        }
        records.push(finetune_record(domain, problem, plan)?);
    }
    for r in &records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(out, "{line}")?;
    }
    Ok(records.len())
}

//! Offline scoring of a completion against a test instance's payload.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curriculum::{answers_to_text, execution_answers, ScoringKind, TestInstance, ANSWER_END_TAG};
use crate::pddl::{parse_plan, validate, Plan};
use crate::translator::{plan_to_nl, ExtractError, Extractor, ParsePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    Incorrect,
    /// Nothing could be extracted from the completion.
    Ignored,
    /// No usable completion (transport failure) or a broken payload.
    Errored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionOutcome {
    Plan { actions: Vec<String>, paths: Vec<ParsePath> },
    Answers { answers: Vec<bool> },
    Failed { error: ExtractError },
    NotAttempted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub verdict: Verdict,
    pub extraction: ExtractionOutcome,
    pub diagnostics: String,
}

impl Score {
    fn errored(msg: impl Into<String>) -> Self {
        Score {
            verdict: Verdict::Errored,
            extraction: ExtractionOutcome::NotAttempted,
            diagnostics: msg.into(),
        }
    }
}

static LIST_MARKER: std::sync::LazyLock<regex::Regex> =
    std::sync::LazyLock::new(|| regex::Regex::new(r"^\s*(?:\d+\s*[.):]|[-*•])?\s*").unwrap());

/// Yes/no answers, one per nonempty line before the answer-end tag.
pub fn extract_answers(completion: &str) -> Result<Vec<bool>, ExtractError> {
    let end = completion.find(ANSWER_END_TAG).ok_or(ExtractError::MissingTag)?;
    let mut out = Vec::new();
    for (i, raw) in completion[..end].lines().enumerate() {
        let line = LIST_MARKER.replace(raw, "").to_lowercase();
        if line.trim().is_empty() {
            continue;
        }
        let word = line
            .split(|c: char| !c.is_alphanumeric())
            .find(|w| matches!(*w, "yes" | "no" | "true" | "false"));
        match word {
            Some("yes" | "true") => out.push(true),
            Some(_) => out.push(false),
            None => {
                return Err(ExtractError::UnparseableLine {
                    line: i + 1,
                    text: raw.trim().to_string(),
                    reason: "no yes/no answer".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Scores a completion using only the instance payload.
pub fn score_completion(instance: &TestInstance, completion: &str) -> Score {
    let payload = &instance.payload;
    let domain = match payload.parse_domain() {
        Ok(d) => d,
        Err(e) => return Score::errored(format!("payload domain: {e}")),
    };
    let problem = match payload.parse_problem(&domain) {
        Ok(p) => p,
        Err(e) => return Score::errored(format!("payload problem: {e}")),
    };

    if instance.scoring_kind == ScoringKind::ExecutionAnswers {
        let Some(exec) = &payload.execution else {
            return Score::errored("payload has no execution questions");
        };
        let actions = match parse_plan(&exec.actions.join("\n"), &domain, &problem.objects) {
            Ok(p) => p,
            Err(e) => return Score::errored(format!("payload actions: {e}")),
        };
        let Some(truth) = execution_answers(&problem.init, &actions, &exec.questions) else {
            return Score::errored("payload actions are not executable");
        };
        return match extract_answers(completion) {
            Err(error) => Score {
                verdict: Verdict::Ignored,
                diagnostics: error.to_string(),
                extraction: ExtractionOutcome::Failed { error },
            },
            Ok(answers) => {
                let (verdict, diagnostics) = if answers.len() != truth.len() {
                    (Verdict::Incorrect, format!("{} answers for {} questions", answers.len(), truth.len()))
                } else {
                    let wrong: Vec<String> = answers
                        .iter()
                        .zip(&truth)
                        .enumerate()
                        .filter(|(_, (a, t))| a != t)
                        .map(|(i, _)| (i + 1).to_string())
                        .collect();
                    if wrong.is_empty() {
                        (Verdict::Correct, String::new())
                    } else {
                        (Verdict::Incorrect, format!("wrong answers: {}", wrong.join(", ")))
                    }
                };
                Score {
                    verdict,
                    extraction: ExtractionOutcome::Answers { answers },
                    diagnostics,
                }
            }
        };
    }

    let extractor = Extractor::new(&domain, &problem.objects, &payload.templates);
    let extraction = match extractor.extract(completion) {
        Ok(e) => e,
        Err(error) => {
            return Score {
                verdict: Verdict::Ignored,
                diagnostics: error.to_string(),
                extraction: ExtractionOutcome::Failed { error },
            }
        }
    };
    let report = validate(&problem, &extraction.plan);
    let mut diagnostics = String::new();
    let mut verdict = if report.valid { Verdict::Correct } else { Verdict::Incorrect };
    if let Some(step) = report.failure_step {
        diagnostics = format!(
            "step {} not executable, missing {}",
            step + 1,
            crate::pddl::fmt_atoms(&report.missing_preconditions)
        );
    } else if !report.unmet_goals.is_empty() {
        diagnostics = format!("unmet goals {}", crate::pddl::fmt_atoms(&report.unmet_goals));
    }
    if report.valid && instance.scoring_kind == ScoringKind::OptimalPlan && extraction.plan.cost() != payload.reference_cost {
        verdict = Verdict::Incorrect;
        diagnostics = format!(
            "valid but costs {} (optimal {})",
            extraction.plan.cost(),
            payload.reference_cost
        );
    }
    Score {
        verdict,
        extraction: ExtractionOutcome::Plan {
            actions: extraction.plan.tokens(),
            paths: extraction.paths,
        },
        diagnostics,
    }
}

fn reference_plan(instance: &TestInstance) -> Option<Plan> {
    let d = instance.payload.parse_domain().ok()?;
    let p = instance.payload.parse_problem(&d).ok()?;
    instance.payload.reference(&d, &p.objects).ok()
}

/// The ground-truth answer rendered the way a model should write it.
pub fn reference_completion(instance: &TestInstance) -> Option<String> {
    if let Some(exec) = &instance.payload.execution {
        return Some(answers_to_text(&exec.expected));
    }
    plan_to_nl(&reference_plan(instance)?, &instance.payload.templates).ok()
}

/// The ground truth with one action deleted, or for plan execution one
/// answer flipped. `None` when there is nothing to corrupt.
pub fn corrupted_completion<R: Rng + ?Sized>(instance: &TestInstance, rng: &mut R) -> Option<String> {
    if let Some(exec) = &instance.payload.execution {
        let mut answers = exec.expected.clone();
        let i = (0..answers.len()).collect::<Vec<_>>().choose(rng).copied()?;
        answers[i] = !answers[i];
        return Some(answers_to_text(&answers));
    }
    let mut plan = reference_plan(instance)?;
    if plan.is_empty() {
        return None;
    }
    let i = rng.random_range(0..plan.len());
    plan.steps.remove(i);
    plan_to_nl(&plan, &instance.payload.templates).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld::BlocksworldInstanceSpec;
    use crate::curriculum::{make_instance, make_optimal_planning, CurriculumConfig, TaskKind};
    use crate::pddl::GoalKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(seed: u64) -> BlocksworldInstanceSpec {
        BlocksworldInstanceSpec {
            num_blocks: 4,
            goal_kind: GoalKind::Full,
            seed,
        }
    }

    #[test]
    fn every_task_self_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for task in TaskKind::ALL {
            for seed in 0..4 {
                let inst = make_instance(task, &spec(seed), &CurriculumConfig::default()).unwrap();
                let good = reference_completion(&inst).unwrap();
                assert_eq!(score_completion(&inst, &good).verdict, Verdict::Correct, "{task} {seed}");
                let bad = corrupted_completion(&inst, &mut rng).unwrap();
                assert_eq!(score_completion(&inst, &bad).verdict, Verdict::Incorrect, "{task} {seed}");
            }
        }
    }

    #[test]
    fn missing_tag_is_ignored() {
        let inst = make_instance(TaskKind::PlanGeneration, &spec(1), &CurriculumConfig::default()).unwrap();
        let good = reference_completion(&inst).unwrap();
        let s = score_completion(&inst, good.trim_end_matches("[PLAN END]"));
        assert_eq!(s.verdict, Verdict::Ignored);
        assert!(matches!(s.extraction, ExtractionOutcome::Failed { error: ExtractError::MissingTag }));
    }

    #[test]
    fn longer_valid_plan_fails_optimal_planning() {
        let inst = make_optimal_planning(&spec(2), &CurriculumConfig::default()).unwrap();
        let d = inst.payload.parse_domain().unwrap();
        let p = inst.payload.parse_problem(&d).unwrap();
        let mut plan = inst.payload.reference(&d, &p.objects).unwrap();
        // A pickup/putdown detour of some clear table block at the start.
        let detour = crate::pddl::ground_all(&d, &p.objects)
            .into_iter()
            .find(|g| g.name == "pickup" && crate::pddl::applicable(&p.init, g))
            .unwrap();
        let back = crate::pddl::ground_named(&d, "putdown", &detour.args).unwrap();
        plan.steps.splice(0..0, [detour, back]);
        assert!(validate(&p, &plan).valid);
        let text = plan_to_nl(&plan, &inst.payload.templates).unwrap();
        let s = score_completion(&inst, &text);
        assert_eq!(s.verdict, Verdict::Incorrect);
        assert!(s.diagnostics.contains("optimal"));
    }

    #[test]
    fn answers_parse_loosely() {
        assert_eq!(
            extract_answers("1. Yes.\n2) no\n\n- true\n[ANSWER END] 4. yes").unwrap(),
            vec![true, false, true]
        );
        assert_eq!(extract_answers("yes"), Err(ExtractError::MissingTag));
        assert!(matches!(
            extract_answers("1. maybe\n[ANSWER END]"),
            Err(ExtractError::UnparseableLine { line: 1, .. })
        ));
    }

    #[test]
    fn broken_payload_is_errored() {
        let mut inst = make_instance(TaskKind::PlanGeneration, &spec(1), &CurriculumConfig::default()).unwrap();
        inst.payload.problem = "(define".into();
        assert_eq!(score_completion(&inst, "[PLAN END]").verdict, Verdict::Errored);
    }
}

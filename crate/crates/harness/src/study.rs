use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use planbench_core::curriculum::TestInstance;
use planbench_core::evaluator::EvalRecord;
use planbench_core::pddl::{ground_all, parse_plan, validate, Domain, GroundAction, Plan, Problem};
use planbench_core::scoring::ExtractionOutcome;
use planbench_core::stats::mean;
use planbench_core::translator::{action_to_nl, plan_to_nl, ProblemText, TemplateSet};

use crate::events::{EventKind, EventLog, StudyEvent};
use crate::StudyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Assisted,
    Unassisted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionPolicy {
    /// Assisted, unassisted, assisted, ...
    #[default]
    Alternating,
    AllAssisted,
    AllUnassisted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Example,
    Main,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubPhase {
    Write,
    Translate,
    Done,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub seed: u64,
    pub policy: ConditionPolicy,
    /// Allow a main instance to be assigned to more than one session.
    pub reuse: bool,
}

/// Six NASA-TLX scales, each in `0..=100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tlx {
    pub mental: f64,
    pub physical: f64,
    pub temporal: f64,
    pub performance: f64,
    pub effort: f64,
    pub frustration: f64,
}

impl Tlx {
    pub fn values(&self) -> [f64; 6] {
        [self.mental, self.physical, self.temporal, self.performance, self.effort, self.frustration]
    }

    /// Raw (unweighted) TLX.
    pub fn load(&self) -> Result<f64, StudyError> {
        let v = self.values();
        if let Some(bad) = v.iter().find(|x| !(0.0..=100.0).contains(*x)) {
            return Err(StudyError::OutOfRange(format!("TLX value {bad} outside 0..=100")));
        }
        Ok(mean(&v).expect("six values"))
    }
}

/// A pool instance with everything the service needs pre-parsed.
#[derive(Debug, Clone)]
pub struct PoolItem {
    pub instance: TestInstance,
    pub domain: Domain,
    pub problem: Problem,
    pub templates: TemplateSet,
    pub actions: Vec<GroundAction>,
    pub reference: Plan,
}

impl PoolItem {
    pub fn resolve(instance: TestInstance) -> Result<Self, StudyError> {
        let bad = |e: &dyn std::fmt::Display| StudyError::BadPool(format!("{}: {e}", instance.id));
        let domain = instance.payload.parse_domain().map_err(|e| bad(&e))?;
        let problem = instance.payload.parse_problem(&domain).map_err(|e| bad(&e))?;
        let reference = instance.payload.reference(&domain, &problem.objects).map_err(|e| bad(&e))?;
        let templates = instance.payload.templates.clone();
        let actions = ground_all(&domain, &problem.objects);
        Ok(PoolItem {
            instance,
            domain,
            problem,
            templates,
            actions,
            reference,
        })
    }

    pub fn description(&self) -> Result<String, StudyError> {
        let text = ProblemText::of(&self.problem, &self.templates)?;
        Ok(format!(
            "{}\n\nInitially, {}.\nMy goal is that {}.",
            self.templates.describe_domain(&self.domain).trim_end(),
            text.initial,
            text.goal
        ))
    }

    pub fn plan_from_ids(&self, ids: &[usize]) -> Result<Plan, StudyError> {
        ids.iter()
            .map(|&i| self.actions.get(i).cloned().ok_or(StudyError::UnknownAction(i)))
            .collect::<Result<Vec<_>, _>>()
            .map(Plan::new)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: Uuid,
    pub condition: Condition,
    pub instance_id: String,
    pub phase: Phase,
    pub sub_phase: SubPhase,
    pub ended: bool,
    pub created_at: f64,
    /// `(transition, unix seconds)` in order.
    pub timestamps: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleView {
    pub instance_id: String,
    pub description: String,
    pub solution: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceView {
    pub phase: Phase,
    pub sub_phase: SubPhase,
    pub instance_id: String,
    pub description: String,
    /// Only during the example phase.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub id: usize,
    pub action: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionView {
    pub instance_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeformSubmission {
    pub text: String,
    /// Participant's judgement of the suggestion, assisted sessions only.
    #[serde(default)]
    pub suggestion_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationSubmission {
    pub action_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationVerdict {
    pub valid: bool,
    pub failure_step: Option<usize>,
    pub missing_preconditions: Vec<String>,
    pub unmet_goals: Vec<String>,
    pub plan: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlxAck {
    pub load: f64,
}

#[derive(Debug)]
struct Session {
    view: SessionView,
    main: usize,
    tlx: Option<f64>,
}

struct Assigner {
    rng: ChaCha8Rng,
    created: u64,
    used: BTreeSet<usize>,
}

pub struct Study {
    config: StudyConfig,
    pool: Vec<PoolItem>,
    suggestions: HashMap<String, EvalRecord>,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<Session>>>>,
    assigner: Mutex<Assigner>,
    log: EventLog,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Study {
    /// `pool[0]` is the worked example; main instances come from the rest
    /// (or `pool[0]` itself when it is alone).
    pub fn new(
        config: StudyConfig,
        pool: Vec<TestInstance>,
        suggestions: Vec<EvalRecord>,
        log: EventLog,
    ) -> Result<Self, StudyError> {
        if pool.is_empty() {
            return Err(StudyError::PoolEmpty);
        }
        let pool = pool.into_iter().map(PoolItem::resolve).collect::<Result<Vec<_>, _>>()?;
        let assigner = Assigner {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            created: 0,
            used: BTreeSet::new(),
        };
        Ok(Study {
            config,
            pool,
            suggestions: suggestions.into_iter().map(|r| (r.instance_id.clone(), r)).collect(),
            sessions: RwLock::new(HashMap::new()),
            assigner: Mutex::new(assigner),
            log,
        })
    }

    pub fn pool(&self) -> &[PoolItem] {
        &self.pool
    }

    pub fn events(&self) -> Vec<StudyEvent> {
        self.log.events()
    }

    fn emit(&self, session_id: Uuid, kind: EventKind) -> Result<f64, StudyError> {
        let timestamp = now();
        self.log.append(StudyEvent {
            session_id,
            timestamp,
            kind,
        })?;
        Ok(timestamp)
    }

    fn session(&self, id: Uuid) -> Result<Arc<Mutex<Session>>, StudyError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(&id)
            .cloned()
            .ok_or(StudyError::UnknownSession(id))
    }

    fn main_candidates(&self) -> std::ops::Range<usize> {
        if self.pool.len() == 1 {
            0..1
        } else {
            1..self.pool.len()
        }
    }

    pub fn create_session(&self) -> Result<SessionView, StudyError> {
        let (condition, main) = {
            let mut a = self.assigner.lock().expect("assigner lock");
            let candidates: Vec<usize> = self
                .main_candidates()
                .filter(|i| self.config.reuse || !a.used.contains(i))
                .collect();
            if candidates.is_empty() {
                return Err(StudyError::PoolExhausted);
            }
            let main = candidates[a.rng.random_range(0..candidates.len())];
            a.used.insert(main);
            let condition = match self.config.policy {
                ConditionPolicy::Alternating if a.created % 2 == 0 => Condition::Assisted,
                ConditionPolicy::Alternating => Condition::Unassisted,
                ConditionPolicy::AllAssisted => Condition::Assisted,
                ConditionPolicy::AllUnassisted => Condition::Unassisted,
            };
            a.created += 1;
            (condition, main)
        };
        let session_id = Uuid::new_v4();
        let instance_id = self.pool[main].instance.id.clone();
        let created_at = self.emit(
            session_id,
            EventKind::SessionStart {
                condition,
                instance_id: instance_id.clone(),
                example_id: self.pool[0].instance.id.clone(),
            },
        )?;
        let view = SessionView {
            session_id,
            condition,
            instance_id,
            phase: Phase::Example,
            sub_phase: SubPhase::Write,
            ended: false,
            created_at,
            timestamps: vec![("session_start".into(), created_at)],
        };
        self.sessions.write().expect("sessions lock").insert(
            session_id,
            Arc::new(Mutex::new(Session {
                view: view.clone(),
                main,
                tlx: None,
            })),
        );
        Ok(view)
    }

    pub fn session_view(&self, id: Uuid) -> Result<SessionView, StudyError> {
        Ok(self.session(id)?.lock().expect("session lock").view.clone())
    }

    pub fn instance(&self, id: Uuid) -> Result<InstanceView, StudyError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session lock");
        let item = &self.pool[s.main];
        let example = if s.view.phase == Phase::Example {
            let ex = &self.pool[0];
            Some(ExampleView {
                instance_id: ex.instance.id.clone(),
                description: ex.description()?,
                solution: plan_to_nl(&ex.reference, &ex.templates)?,
            })
        } else {
            None
        };
        Ok(InstanceView {
            phase: s.view.phase,
            sub_phase: s.view.sub_phase,
            instance_id: item.instance.id.clone(),
            description: item.description()?,
            example,
        })
    }

    pub fn actions(&self, id: Uuid) -> Result<Vec<ActionEntry>, StudyError> {
        let main = self.session(id)?.lock().expect("session lock").main;
        let item = &self.pool[main];
        item.actions
            .iter()
            .enumerate()
            .map(|(i, a)| {
                Ok(ActionEntry {
                    id: i,
                    action: a.token(),
                    text: action_to_nl(a, &item.templates)?,
                })
            })
            .collect()
    }

    /// The stored model output for the session's instance, re-rendered from
    /// its extracted plan; the raw completion when extraction had failed.
    pub fn suggestion(&self, id: Uuid) -> Result<SuggestionView, StudyError> {
        let s = self.session(id)?;
        let s = s.lock().expect("session lock");
        if s.view.condition != Condition::Assisted {
            return Err(StudyError::ConditionViolation);
        }
        if s.view.ended {
            return Err(StudyError::Ended);
        }
        let item = &self.pool[s.main];
        let text = self.suggestion_text(item)?;
        self.emit(id, EventKind::SuggestionShown { text: text.clone() })?;
        Ok(SuggestionView {
            instance_id: item.instance.id.clone(),
            text,
        })
    }

    pub fn suggestion_text(&self, item: &PoolItem) -> Result<String, StudyError> {
        let record = self
            .suggestions
            .get(&item.instance.id)
            .ok_or_else(|| StudyError::SuggestionUnavailable(item.instance.id.clone()))?;
        match (&record.extraction, &record.completion) {
            (ExtractionOutcome::Plan { actions, .. }, _) => {
                let plan = parse_plan(&actions.join("\n"), &item.domain, &item.problem.objects)
                    .map_err(|e| StudyError::BadPool(format!("{}: stored suggestion: {e}", item.instance.id)))?;
                Ok(plan_to_nl(&plan, &item.templates)?)
            }
            (_, Some(raw)) => Ok(raw.clone()),
            (_, None) => Err(StudyError::SuggestionUnavailable(item.instance.id.clone())),
        }
    }

    fn expect_sub_phase(s: &Session, want: SubPhase) -> Result<(), StudyError> {
        if s.view.ended {
            return Err(StudyError::Ended);
        }
        if s.view.sub_phase != want {
            return Err(StudyError::PhaseViolation {
                expected: want,
                actual: s.view.sub_phase,
            });
        }
        Ok(())
    }

    pub fn submit_freeform(&self, id: Uuid, body: FreeformSubmission) -> Result<SessionView, StudyError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        Self::expect_sub_phase(&s, SubPhase::Write)?;
        if body.suggestion_correct.is_some() && s.view.condition != Condition::Assisted {
            return Err(StudyError::ConditionViolation);
        }
        let t = self.emit(id, EventKind::FreeformSubmitted { text: body.text })?;
        if let Some(correct) = body.suggestion_correct {
            self.emit(id, EventKind::SuggestionFeedback { correct })?;
        }
        s.view.phase = Phase::Main;
        s.view.sub_phase = SubPhase::Translate;
        s.view.timestamps.push(("freeform_submitted".into(), t));
        Ok(s.view.clone())
    }

    pub fn submit_translation(&self, id: Uuid, body: TranslationSubmission) -> Result<TranslationVerdict, StudyError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        Self::expect_sub_phase(&s, SubPhase::Translate)?;
        let item = &self.pool[s.main];
        let plan = item.plan_from_ids(&body.action_ids)?;
        let report = validate(&item.problem, &plan);
        let verdict = TranslationVerdict {
            valid: report.valid,
            failure_step: report.failure_step,
            missing_preconditions: report.missing_preconditions.iter().map(|a| a.to_string()).collect(),
            unmet_goals: report.unmet_goals.iter().map(|a| a.to_string()).collect(),
            plan: plan.tokens(),
        };
        let t = self.emit(
            id,
            EventKind::TranslationSubmitted {
                action_ids: body.action_ids,
                plan: verdict.plan.clone(),
                valid: verdict.valid,
                failure_step: verdict.failure_step,
            },
        )?;
        s.view.sub_phase = SubPhase::Done;
        s.view.timestamps.push(("translation_submitted".into(), t));
        Ok(verdict)
    }

    /// Allowed once the translation is in, including after `end`.
    pub fn submit_tlx(&self, id: Uuid, scales: Tlx) -> Result<TlxAck, StudyError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        if s.view.sub_phase != SubPhase::Done {
            return Err(StudyError::PhaseViolation {
                expected: SubPhase::Done,
                actual: s.view.sub_phase,
            });
        }
        if s.tlx.is_some() {
            return Err(StudyError::AlreadySubmitted("tlx"));
        }
        let load = scales.load()?;
        let t = self.emit(id, EventKind::TlxSubmitted { scales, load })?;
        s.tlx = Some(load);
        s.view.timestamps.push(("tlx_submitted".into(), t));
        Ok(TlxAck { load })
    }

    pub fn end(&self, id: Uuid) -> Result<SessionView, StudyError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session lock");
        if s.view.ended {
            return Err(StudyError::Ended);
        }
        let t = self.emit(id, EventKind::SessionEnd)?;
        s.view.ended = true;
        s.view.timestamps.push(("session_end".into(), t));
        Ok(s.view.clone())
    }
}

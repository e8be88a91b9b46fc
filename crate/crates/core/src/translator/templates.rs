use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TranslateError;
use crate::blocksworld::{block_color, block_name};
use crate::pddl::{Atom, Domain};

pub const DEFAULT_TEMPLATES: &str = include_str!("../../config/templates.toml");

pub const DEFAULT_PLAN_END_TAG: &str = "[PLAN END]";

/// Surface wording for one domain and object set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    /// Predicate name and sentence pattern, in listing order.
    pub predicate_templates: Vec<(String, String)>,
    pub action_templates: Vec<(String, String)>,
    pub object_namer: BTreeMap<String, String>,
    pub plan_end_tag: String,
    pub domain_description: String,
    #[serde(default)]
    pub cost_statement: String,
}

#[derive(Debug, Deserialize)]
struct RawTemplates {
    #[serde(default)]
    plan_end_tag: Option<String>,
    #[serde(default)]
    object_pattern: Option<String>,
    #[serde(default)]
    domain_description: String,
    #[serde(default)]
    cost_statement: String,
    predicates: toml::Table,
    actions: toml::Table,
    #[serde(default)]
    objects: toml::Table,
}

fn pairs(table: &toml::Table, what: &str) -> Result<Vec<(String, String)>, TranslateError> {
    table
        .iter()
        .map(|(k, v)| match v.as_str() {
            Some(s) => Ok((k.to_lowercase(), s.to_string())),
            None => Err(TranslateError::Config(format!("{what} `{k}` must be a string"))),
        })
        .collect()
}

impl TemplateSet {
    /// Loads a template config. Objects without an explicit `[objects]`
    /// entry are named through `object_pattern`, whose `{color}` is the
    /// palette color of the block with that name (`a` is red, ...).
    pub fn from_toml(text: &str, objects: &[String]) -> Result<Self, TranslateError> {
        let raw: RawTemplates =
            toml::from_str(text).map_err(|e| TranslateError::Config(e.to_string()))?;
        let explicit: BTreeMap<String, String> = pairs(&raw.objects, "object")?.into_iter().collect();
        let pattern = raw.object_pattern.unwrap_or_else(|| "{name}".to_string());
        let object_namer = objects
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let name = explicit.get(o).cloned().unwrap_or_else(|| {
                    let color = (0..crate::blocksworld::MAX_BLOCKS)
                        .find(|&j| block_name(j) == *o)
                        .map(block_color)
                        .unwrap_or_else(|| block_color(i));
                    pattern.replace("{color}", &color).replace("{name}", o)
                });
                (o.clone(), name)
            })
            .collect();
        Ok(TemplateSet {
            predicate_templates: pairs(&raw.predicates, "predicate")?,
            action_templates: pairs(&raw.actions, "action")?,
            object_namer,
            plan_end_tag: raw.plan_end_tag.unwrap_or_else(|| DEFAULT_PLAN_END_TAG.into()),
            domain_description: raw.domain_description.trim().to_string(),
            cost_statement: raw.cost_statement.trim().to_string(),
        })
    }

    /// The shipped blocksworld wording.
    pub fn blocksworld(objects: &[String]) -> Self {
        TemplateSet::from_toml(DEFAULT_TEMPLATES, objects).expect("shipped templates parse")
    }

    /// Wording for domains without templates (disguised domains): tokens are
    /// used verbatim, e.g. `perform attack on lantern`.
    pub fn neutral(domain: &Domain, objects: &[String]) -> Self {
        let slots = |k: usize| (0..k).map(|i| format!("{{{i}}}")).collect::<Vec<_>>();
        let predicate_templates = domain
            .predicates
            .iter()
            .map(|p| {
                let s = slots(p.arity());
                let pattern = match s.len() {
                    0 => p.name.clone(),
                    1 => format!("{} {}", p.name, s[0]),
                    2 => format!("{} {} {}", s[0], p.name, s[1]),
                    _ => format!("{} {}", p.name, s.join(" ")),
                };
                (p.name.clone(), pattern)
            })
            .collect();
        let action_templates = domain
            .actions
            .iter()
            .map(|a| {
                let s = slots(a.params.len());
                let pattern = if s.is_empty() {
                    format!("perform {}", a.name)
                } else {
                    format!("perform {} on {}", a.name, s.join(" and "))
                };
                (a.name.clone(), pattern)
            })
            .collect();
        let mut t = TemplateSet {
            predicate_templates,
            action_templates,
            object_namer: objects.iter().map(|o| (o.clone(), o.clone())).collect(),
            plan_end_tag: DEFAULT_PLAN_END_TAG.into(),
            domain_description: String::new(),
            cost_statement: TemplateSet::blocksworld(&[]).cost_statement,
        };
        t.domain_description = t.describe_domain(domain);
        t
    }

    /// Generic lifted-domain description built from the schemas.
    pub fn describe_domain(&self, domain: &Domain) -> String {
        let var_name = |v: &str| format!("object {}", v.trim_start_matches('?'));
        let mut out = String::from("I can perform the following actions:\n");
        for a in &domain.actions {
            let args: Vec<String> = a.params.iter().map(|v| var_name(v)).collect();
            let line = self
                .action_pattern(&a.name)
                .map(|p| fill(p, &args))
                .unwrap_or_else(|| a.name.clone());
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("\nThe actions obey these rules:\n");
        for a in &domain.actions {
            let args: Vec<String> = a.params.iter().map(|v| var_name(v)).collect();
            let head = self
                .action_pattern(&a.name)
                .map(|p| fill(p, &args))
                .unwrap_or_else(|| a.name.clone());
            let lifted = |set: &std::collections::BTreeSet<Atom>| -> String {
                let parts: Vec<String> = set
                    .iter()
                    .map(|atom| {
                        let args: Vec<String> = atom.args.iter().map(|v| var_name(v)).collect();
                        self.predicate_pattern(&atom.predicate)
                            .map(|p| fill(p, &args))
                            .unwrap_or_else(|| atom.to_string())
                    })
                    .collect();
                if parts.is_empty() {
                    "nothing".to_string()
                } else {
                    parts.join(", ")
                }
            };
            out.push_str(&format!(
                "To {head}, these facts must hold: {}.\nOnce I {head}, these facts become true: {}.\nOnce I {head}, these facts become false: {}.\n",
                lifted(&a.precondition),
                lifted(&a.add),
                lifted(&a.del)
            ));
        }
        out.trim_end().to_string()
    }

    pub fn predicate_pattern(&self, name: &str) -> Option<&str> {
        self.predicate_templates
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn action_pattern(&self, name: &str) -> Option<&str> {
        self.action_templates
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub(crate) fn predicate_rank(&self, name: &str) -> usize {
        self.predicate_templates
            .iter()
            .position(|(k, _)| k == name)
            .unwrap_or(usize::MAX)
    }

    pub fn object_name<'a>(&'a self, object: &'a str) -> &'a str {
        self.object_namer.get(object).map(String::as_str).unwrap_or(object)
    }

    /// Every predicate and action of `domain` has a template whose slots are
    /// exactly `{0}`..`{arity-1}`.
    pub fn check(&self, domain: &Domain) -> Result<(), TranslateError> {
        for p in &domain.predicates {
            let pat = self
                .predicate_pattern(&p.name)
                .ok_or_else(|| TranslateError::MissingTemplate(p.name.clone()))?;
            check_slots(&p.name, pat, p.arity())?;
        }
        for a in &domain.actions {
            let pat = self
                .action_pattern(&a.name)
                .ok_or_else(|| TranslateError::MissingTemplate(a.name.clone()))?;
            check_slots(&a.name, pat, a.params.len())?;
        }
        Ok(())
    }
}

/// Slot indices appearing in a pattern, in order of appearance.
pub(crate) fn slots_of(pattern: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                if let Ok(i) = after[..end].parse::<usize>() {
                    out.push(i);
                }
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

fn check_slots(name: &str, pattern: &str, arity: usize) -> Result<(), TranslateError> {
    let mut found = slots_of(pattern);
    found.sort_unstable();
    if found != (0..arity).collect::<Vec<_>>() {
        return Err(TranslateError::SlotMismatch {
            name: name.to_string(),
            arity,
            pattern: pattern.to_string(),
        });
    }
    Ok(())
}

pub(crate) fn fill(pattern: &str, args: &[String]) -> String {
    let mut out = pattern.to_string();
    for (i, a) in args.iter().enumerate() {
        out = out.replace(&format!("{{{i}}}"), a);
    }
    out
}

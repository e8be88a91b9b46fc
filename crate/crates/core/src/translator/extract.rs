use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::templates::slots_of;
use super::TemplateSet;
use crate::pddl::{ground_named, Domain, Plan};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ExtractError {
    #[error("plan-end tag missing")]
    MissingTag,
    #[error("line {line} could not be parsed ({reason}): `{text}`")]
    UnparseableLine {
        line: usize,
        text: String,
        reason: String,
    },
}

/// Which strategy recognized a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParsePath {
    Template,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub plan: Plan,
    pub paths: Vec<ParsePath>,
}

static LIST_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:\d+\s*[.):]|[-*•])\s*").unwrap());

const FILLER: [&str; 6] = ["the", "a", "an", "block", "blocks", "object"];

fn normalize(s: &str) -> String {
    let lowered = s.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    let unlisted = LIST_MARKER.replace(&collapsed, "");
    unlisted
        .trim_end_matches(|c: char| matches!(c, '.' | ',' | ';' | '!'))
        .trim()
        .to_string()
}

fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

struct CompiledTemplate {
    action: String,
    arity: usize,
    regex: Regex,
    /// Slot index of each capture group, in order.
    slots: Vec<usize>,
}

struct ObjectForms {
    name: String,
    surface: String,
    descriptors: Vec<String>,
}

/// Plan parser for one domain, object set and template set.
pub struct Extractor<'a> {
    domain: &'a Domain,
    tag: String,
    templates: Vec<CompiledTemplate>,
    objects: Vec<ObjectForms>,
    verbs: Vec<(Vec<String>, String)>,
}

impl<'a> Extractor<'a> {
    pub fn new(domain: &'a Domain, objects: &[String], templates: &TemplateSet) -> Self {
        let mut compiled = Vec::new();
        let mut verbs = Vec::new();
        for action in &domain.actions {
            let arity = action.params.len();
            let mut keys = vec![tokens(&action.name), tokens(&action.name.replace(['-', '_'], " "))];
            if let Some(pattern) = templates.action_pattern(&action.name) {
                let norm = normalize(pattern);
                let slots = slots_of(&norm);
                let mut re = String::from("^");
                let mut rest = norm.as_str();
                for slot in &slots {
                    let marker = format!("{{{slot}}}");
                    let at = rest.find(&marker).expect("slot present");
                    re.push_str(&regex::escape(&rest[..at]));
                    re.push_str("(.+?)");
                    rest = &rest[at + marker.len()..];
                }
                re.push_str(&regex::escape(rest));
                re.push('$');
                compiled.push(CompiledTemplate {
                    action: action.name.clone(),
                    arity,
                    regex: Regex::new(&re).expect("escaped template compiles"),
                    slots,
                });
                let lead = norm.split('{').next().unwrap_or("");
                let lead_tokens = tokens(lead);
                if !lead_tokens.is_empty() {
                    if lead_tokens.len() > 1 {
                        keys.push(lead_tokens[..lead_tokens.len() - 1].to_vec());
                    }
                    keys.push(lead_tokens);
                }
            }
            keys.sort();
            keys.dedup();
            for k in keys.into_iter().filter(|k| !k.is_empty()) {
                verbs.push((k, action.name.clone()));
            }
        }
        let objects = objects
            .iter()
            .map(|o| {
                let surface = normalize(templates.object_name(o));
                let descriptors = tokens(&surface)
                    .into_iter()
                    .filter(|t| !FILLER.contains(&t.as_str()))
                    .collect();
                ObjectForms {
                    name: o.to_lowercase(),
                    surface,
                    descriptors,
                }
            })
            .collect();
        Extractor {
            domain,
            tag: templates.plan_end_tag.clone(),
            templates: compiled,
            objects,
            verbs,
        }
    }

    /// Truncates at the first plan-end tag and parses each nonempty line.
    pub fn extract(&self, completion: &str) -> Result<Extraction, ExtractError> {
        let end = completion.find(&self.tag).ok_or(ExtractError::MissingTag)?;
        let mut steps = Vec::new();
        let mut paths = Vec::new();
        for (i, raw) in completion[..end].lines().enumerate() {
            let line = normalize(raw);
            if line.is_empty() || line == "[plan]" {
                continue;
            }
            let fail = |reason: &str| ExtractError::UnparseableLine {
                line: i + 1,
                text: raw.trim().to_string(),
                reason: reason.to_string(),
            };
            let (action, args, path) = match self.match_template(&line) {
                Some((a, args)) => (a, args, ParsePath::Template),
                None => {
                    let (a, args) = self.match_fallback(&line).map_err(|r| fail(&r))?;
                    (a, args, ParsePath::Fallback)
                }
            };
            let step = ground_named(self.domain, &action, &args).map_err(|e| fail(&e.to_string()))?;
            steps.push(step);
            paths.push(path);
        }
        Ok(Extraction {
            plan: Plan::new(steps),
            paths,
        })
    }

    fn object_by_surface(&self, text: &str) -> Option<&ObjectForms> {
        let t = text.trim();
        let mut hits = self.objects.iter().filter(|o| o.surface == t);
        match (hits.next(), hits.next()) {
            (Some(o), None) => Some(o),
            _ => None,
        }
    }

    fn match_template(&self, line: &str) -> Option<(String, Vec<String>)> {
        'templates: for t in &self.templates {
            let Some(caps) = t.regex.captures(line) else { continue };
            let mut args = vec![String::new(); t.arity];
            for (group, &slot) in t.slots.iter().enumerate() {
                let text = caps.get(group + 1).map(|m| m.as_str()).unwrap_or("");
                match self.object_by_surface(text) {
                    Some(o) => args[slot] = o.name.clone(),
                    None => continue 'templates,
                }
            }
            return Some((t.action.clone(), args));
        }
        None
    }

    /// Verb at the start of the line names the action; object mentions
    /// (descriptor words such as colors, or bare names after "block" /
    /// "object") fill its parameters in order.
    fn match_fallback(&self, line: &str) -> Result<(String, Vec<String>), String> {
        let words = tokens(line);
        let best = self
            .verbs
            .iter()
            .filter(|(k, _)| words.len() >= k.len() && words[..k.len()] == k[..])
            .map(|(k, a)| (k.len(), a))
            .max_by_key(|(len, _)| *len);
        let (len, action) = best.ok_or_else(|| "no action verb recognized".to_string())?;
        let rivals = self
            .verbs
            .iter()
            .filter(|(k, a)| k.len() == len && a != action && words[..len] == k[..])
            .count();
        if rivals > 0 {
            return Err("verb matches several actions".into());
        }

        let rest = &words[len..];
        let mut mentions: Vec<(usize, &str)> = Vec::new();
        for (i, w) in rest.iter().enumerate() {
            let after_noun = i > 0 && matches!(rest[i - 1].as_str(), "block" | "object");
            let hits: Vec<&ObjectForms> = self
                .objects
                .iter()
                .filter(|o| {
                    o.descriptors.iter().any(|d| d == w)
                        || (o.name == *w && (o.name.chars().count() > 1 || after_noun))
                })
                .collect();
            match hits.as_slice() {
                [] => {}
                [o] => {
                    if let Some(&(prev_i, prev_o)) = mentions.last() {
                        let between = &rest[prev_i + 1..i];
                        let only_filler = between.iter().all(|t| FILLER.contains(&t.as_str()));
                        if prev_o == o.name && only_filler {
                            mentions.last_mut().expect("nonempty").0 = i;
                            continue;
                        }
                        if prev_i + 1 == i {
                            return Err("two objects named in one noun phrase".into());
                        }
                    }
                    mentions.push((i, o.name.as_str()));
                }
                _ => return Err(format!("`{w}` names several objects")),
            }
        }
        let arity = self
            .domain
            .action(action)
            .map(|a| a.params.len())
            .ok_or_else(|| format!("unknown action `{action}`"))?;
        if mentions.len() != arity {
            return Err(format!(
                "`{action}` takes {arity} objects, found {}",
                mentions.len()
            ));
        }
        Ok((
            action.clone(),
            mentions.into_iter().map(|(_, o)| o.to_string()).collect(),
        ))
    }
}

pub fn extract_plan(
    completion: &str,
    domain: &Domain,
    objects: &[String],
    templates: &TemplateSet,
) -> Result<Extraction, ExtractError> {
    Extractor::new(domain, objects, templates).extract(completion)
}

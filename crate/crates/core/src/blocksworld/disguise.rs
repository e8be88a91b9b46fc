use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{ActionSchema, Atom, Domain, GroundAction, Plan, PredicateSchema, Problem, State};

pub const DEFAULT_LEXICON: &str = include_str!("../../config/deceptive_lexicon.toml");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DisguiseError {
    #[error("lexicon too small: {needed} names need fresh words, {available} usable")]
    LexiconTooSmall { needed: usize, available: usize },
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
}

/// Word table for deceptive disguising.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Lexicon {
    #[serde(default)]
    pub actions: BTreeMap<String, String>,
    #[serde(default)]
    pub predicates: BTreeMap<String, String>,
    #[serde(default)]
    pub words: Vec<String>,
}

impl Lexicon {
    pub fn from_toml(text: &str) -> Result<Self, DisguiseError> {
        let mut lex: Lexicon =
            toml::from_str(text).map_err(|e| DisguiseError::InvalidLexicon(e.to_string()))?;
        let lower = |s: &String| s.to_lowercase();
        lex.actions = lex.actions.iter().map(|(k, v)| (lower(k), lower(v))).collect();
        lex.predicates = lex.predicates.iter().map(|(k, v)| (lower(k), lower(v))).collect();
        lex.words = lex.words.iter().map(lower).collect();
        for w in lex.actions.values().chain(lex.predicates.values()).chain(&lex.words) {
            if w.is_empty() || w.contains(|c: char| c.is_whitespace() || c == '(' || c == ')') {
                return Err(DisguiseError::InvalidLexicon(format!("`{w}` is not a PDDL name")));
            }
        }
        Ok(lex)
    }

    /// The lexicon shipped in `config/deceptive_lexicon.toml`.
    pub fn shipped() -> Self {
        Lexicon::from_toml(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DisguiseMode {
    Deceptive(Lexicon),
    Randomized { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisguiseKind {
    Deceptive,
    Randomized,
}

/// Bijective renaming of action, predicate and object names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisguiseMapping {
    pub mode: DisguiseKind,
    pub rename: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Original and disguised domain names.
    pub domain_name: (String, String),
}

impl DisguiseMapping {
    /// Names outside the mapping (variables, unknown tokens) pass through.
    pub fn rename_token(&self, s: &str) -> String {
        self.rename.get(s).cloned().unwrap_or_else(|| s.to_string())
    }

    pub fn inverse(&self) -> DisguiseMapping {
        DisguiseMapping {
            mode: self.mode,
            rename: self.rename.iter().map(|(k, v)| (v.clone(), k.clone())).collect(),
            seed: self.seed,
            domain_name: (self.domain_name.1.clone(), self.domain_name.0.clone()),
        }
    }

    fn domain_name(&self, name: &str) -> String {
        if name == self.domain_name.0 {
            self.domain_name.1.clone()
        } else {
            name.to_string()
        }
    }

    pub fn atom(&self, a: &Atom) -> Atom {
        Atom {
            predicate: self.rename_token(&a.predicate),
            args: a.args.iter().map(|t| self.rename_token(t)).collect(),
        }
    }

    fn atoms(&self, set: &BTreeSet<Atom>) -> BTreeSet<Atom> {
        set.iter().map(|a| self.atom(a)).collect()
    }

    pub fn state(&self, s: &State) -> State {
        s.iter().map(|a| self.atom(a)).collect()
    }

    pub fn domain(&self, d: &Domain) -> Domain {
        Domain {
            name: self.domain_name(&d.name),
            predicates: d
                .predicates
                .iter()
                .map(|p| PredicateSchema {
                    name: self.rename_token(&p.name),
                    params: p.params.clone(),
                })
                .collect(),
            actions: d
                .actions
                .iter()
                .map(|a| ActionSchema {
                    name: self.rename_token(&a.name),
                    params: a.params.clone(),
                    precondition: self.atoms(&a.precondition),
                    add: self.atoms(&a.add),
                    del: self.atoms(&a.del),
                })
                .collect(),
        }
    }

    pub fn problem(&self, p: &Problem) -> Problem {
        Problem {
            name: p.name.clone(),
            domain_name: self.domain_name(&p.domain_name),
            objects: p.objects.iter().map(|o| self.rename_token(o)).collect(),
            init: self.state(&p.init),
            goal: p.goal.iter().map(|a| self.atom(a)).collect(),
            goal_kind: p.goal_kind,
        }
    }

    pub fn action(&self, g: &GroundAction) -> GroundAction {
        GroundAction {
            name: self.rename_token(&g.name),
            args: g.args.iter().map(|t| self.rename_token(t)).collect(),
            precondition: self.atoms(&g.precondition),
            add: self.atoms(&g.add),
            del: self.atoms(&g.del),
        }
    }

    pub fn plan(&self, plan: &Plan) -> Plan {
        Plan::new(plan.steps.iter().map(|g| self.action(g)).collect())
    }
}

/// Renames every action, predicate and object name of `domain` and
/// `problems`. Arities, effects and init/goal structure are untouched.
pub fn disguise(
    domain: &Domain,
    problems: &[Problem],
    mode: &DisguiseMode,
) -> Result<(Domain, Vec<Problem>, DisguiseMapping), DisguiseError> {
    let mut originals: Vec<(&str, Category)> = Vec::new();
    originals.extend(domain.actions.iter().map(|a| (a.name.as_str(), Category::Action)));
    originals.extend(domain.predicates.iter().map(|p| (p.name.as_str(), Category::Predicate)));
    let objects: BTreeSet<&str> = problems
        .iter()
        .flat_map(|p| p.objects.iter().map(String::as_str))
        .collect();
    originals.extend(objects.iter().map(|o| (*o, Category::Object)));

    let reserved: BTreeSet<String> = originals.iter().map(|(n, _)| n.to_string()).collect();
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut rename = BTreeMap::new();

    let (kind, seed) = match mode {
        DisguiseMode::Deceptive(lex) => {
            let mut pool = lex.words.iter().filter(|w| !reserved.contains(*w));
            let needed = originals
                .iter()
                .filter(|(n, c)| fixed_word(lex, n, *c).is_none())
                .count();
            for (name, cat) in &originals {
                if rename.contains_key(*name) {
                    continue;
                }
                let word = match fixed_word(lex, name, *cat) {
                    Some(w) => {
                        if reserved.contains(w) || used.contains(w) {
                            return Err(DisguiseError::InvalidLexicon(format!(
                                "`{w}` for `{name}` collides with another name"
                            )));
                        }
                        w.clone()
                    }
                    None => loop {
                        match pool.next() {
                            Some(w) if used.contains(w) => continue,
                            Some(w) => break w.clone(),
                            None => {
                                let available = lex
                                    .words
                                    .iter()
                                    .filter(|w| !reserved.contains(*w))
                                    .collect::<BTreeSet<_>>()
                                    .len();
                                return Err(DisguiseError::LexiconTooSmall { needed, available });
                            }
                        }
                    },
                };
                used.insert(word.clone());
                rename.insert(name.to_string(), word);
            }
            (DisguiseKind::Deceptive, None)
        }
        DisguiseMode::Randomized { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for (name, _) in &originals {
                if rename.contains_key(*name) {
                    continue;
                }
                let token = loop {
                    let t = random_token(&mut rng);
                    if !reserved.contains(&t) && !used.contains(&t) {
                        break t;
                    }
                };
                used.insert(token.clone());
                rename.insert(name.to_string(), token);
            }
            (DisguiseKind::Randomized, Some(*seed))
        }
    };

    let mapping = DisguiseMapping {
        mode: kind,
        rename,
        seed,
        domain_name: (domain.name.clone(), format!("mystery-{}", domain.name)),
    };
    let d = mapping.domain(domain);
    let ps = problems.iter().map(|p| mapping.problem(p)).collect();
    Ok((d, ps, mapping))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Action,
    Predicate,
    Object,
}

fn fixed_word<'a>(lex: &'a Lexicon, name: &str, cat: Category) -> Option<&'a String> {
    match cat {
        Category::Action => lex.actions.get(name),
        Category::Predicate => lex.predicates.get(name),
        Category::Object => None,
    }
}

/// Eight lowercase alphanumerics, starting with a letter.
fn random_token<R: Rng>(rng: &mut R) -> String {
    const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let mut s = String::with_capacity(8);
    s.push(char::from(b'a' + rng.random_range(0..26u8)));
    for _ in 0..7 {
        s.push(char::from(ALNUM[rng.random_range(0..ALNUM.len())]));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocksworld::{blocksworld_domain, gen_instance, BlocksworldInstanceSpec};
    use crate::pddl::{emit_domain, emit_problem, parse_domain, parse_problem, GoalKind};

    fn instances(n: u64) -> Vec<Problem> {
        (0..n)
            .map(|seed| {
                gen_instance(&BlocksworldInstanceSpec {
                    num_blocks: 3 + (seed % 3) as usize,
                    goal_kind: GoalKind::Full,
                    seed,
                })
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn deceptive_uses_the_lexicon() {
        let d = blocksworld_domain();
        let (dd, ps, m) = disguise(&d, &instances(3), &DisguiseMode::Deceptive(Lexicon::shipped())).unwrap();
        assert_eq!(m.rename["pickup"], "attack");
        assert_eq!(m.rename["on"], "craves");
        assert!(dd.action("attack").is_some());
        assert_eq!(ps[0].objects[0], "lantern");
        // disguised text is valid PDDL and round-trips
        let reparsed = parse_domain(&emit_domain(&dd)).unwrap();
        assert_eq!(reparsed, dd);
        assert_eq!(parse_problem(&emit_problem(&ps[2]), &dd).unwrap(), ps[2]);
    }

    #[test]
    fn randomized_is_a_bijection_and_inverts() {
        let d = blocksworld_domain();
        let probs = instances(4);
        let (dd, ps, m) = disguise(&d, &probs, &DisguiseMode::Randomized { seed: 11 }).unwrap();
        let values: BTreeSet<_> = m.rename.values().collect();
        assert_eq!(values.len(), m.rename.len());
        for (k, v) in &m.rename {
            assert_ne!(k, v);
            assert!(!m.rename.contains_key(v), "token {v} collides with an original");
            assert_eq!(v.len(), 8);
        }
        let inv = m.inverse();
        assert_eq!(inv.domain(&dd), d);
        for (orig, dis) in probs.iter().zip(&ps) {
            assert_eq!(&inv.problem(dis), orig);
        }
        // same seed, same tokens
        let (_, _, m2) = disguise(&d, &probs, &DisguiseMode::Randomized { seed: 11 }).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn small_lexicon_is_rejected() {
        let lex = Lexicon {
            words: vec!["x".into(), "y".into()],
            ..Lexicon::default()
        };
        let err = disguise(&blocksworld_domain(), &instances(1), &DisguiseMode::Deceptive(lex)).unwrap_err();
        assert!(matches!(err, DisguiseError::LexiconTooSmall { .. }));
    }

    #[test]
    fn colliding_lexicon_word_is_rejected() {
        let mut lex = Lexicon::shipped();
        lex.actions.insert("pickup".into(), "stack".into());
        assert!(matches!(
            disguise(&blocksworld_domain(), &instances(1), &DisguiseMode::Deceptive(lex)),
            Err(DisguiseError::InvalidLexicon(_))
        ));
    }
}

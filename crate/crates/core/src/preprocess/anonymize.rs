use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InstanceId, User};
use crate::text::{email_regex, tokens, Token};

/// Name tokens shorter than this (in characters) are never redacted on their own.
const MIN_NAME_TOKEN_CHARS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub display_name: String,
    #[serde(default)]
    pub email: Option<String>,
}

/// Everyone taking part in an instance: subject, evaluators, teachers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    pub entries: Vec<RosterEntry>,
}

impl Roster {
    pub fn from_users<'a>(users: impl IntoIterator<Item = &'a User>) -> Self {
        Self {
            entries: users
                .into_iter()
                .map(|u| RosterEntry {
                    display_name: u.display_name.clone(),
                    email: u.email.clone(),
                })
                .collect(),
        }
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Self {
        Self {
            entries: names
                .iter()
                .map(|n| RosterEntry {
                    display_name: n.as_ref().to_owned(),
                    email: None,
                })
                .collect(),
        }
    }

    /// Folded single name tokens (long enough to redact) → owning entries.
    fn name_tokens(&self) -> HashMap<String, BTreeSet<usize>> {
        let mut out: HashMap<String, BTreeSet<usize>> = HashMap::new();
        for (idx, e) in self.entries.iter().enumerate() {
            for t in tokens(&e.display_name) {
                if t.folded.chars().count() >= MIN_NAME_TOKEN_CHARS {
                    out.entry(t.folded).or_default().insert(idx);
                }
            }
        }
        out
    }

    /// Folded multi-token full names → owning entries, longest first.
    fn full_names(&self) -> Vec<(Vec<String>, BTreeSet<usize>)> {
        let mut map: HashMap<Vec<String>, BTreeSet<usize>> = HashMap::new();
        for (idx, e) in self.entries.iter().enumerate() {
            let toks: Vec<String> = tokens(&e.display_name).into_iter().map(|t| t.folded).collect();
            if toks.len() >= 2 {
                map.entry(toks).or_default().insert(idx);
            }
        }
        let mut v: Vec<_> = map.into_iter().collect();
        v.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }

    fn emails(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter_map(|e| e.email.as_ref().map(|m| m.to_lowercase()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionEntry {
    pub surface_form: String,
    pub placeholder: String,
    /// Set when the surface form belongs to more than one roster entry.
    #[serde(default)]
    pub ambiguous: bool,
}

/// Invertible mapping between surface forms and `PERSON_k` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionMap {
    pub instance_id: InstanceId,
    pub entries: Vec<RedactionEntry>,
}

impl RedactionMap {
    pub fn new(instance_id: InstanceId) -> Self {
        Self {
            instance_id,
            entries: Vec::new(),
        }
    }

    pub fn id(&self) -> String {
        format!("redaction-{}", self.instance_id)
    }

    pub fn placeholder_of(&self, surface: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.surface_form == surface)
            .map(|e| e.placeholder.as_str())
    }

    pub fn surface_of(&self, placeholder: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.placeholder == placeholder)
            .map(|e| e.surface_form.as_str())
    }

    fn assign(&mut self, surface: &str, ambiguous: bool) -> String {
        if let Some(e) = self.entries.iter_mut().find(|e| e.surface_form == surface) {
            e.ambiguous |= ambiguous;
            return e.placeholder.clone();
        }
        let placeholder = format!("PERSON_{}", self.entries.len() + 1);
        self.entries.push(RedactionEntry {
            surface_form: surface.to_owned(),
            placeholder: placeholder.clone(),
            ambiguous,
        });
        placeholder
    }

    /// Placeholders are `PERSON_1..=PERSON_n` in order and surface forms are distinct.
    pub fn check(&self) -> Result<()> {
        let mut surfaces = BTreeSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.placeholder != format!("PERSON_{}", i + 1) {
                return Err(Error::domain(format!("unexpected placeholder {}", e.placeholder)));
            }
            if !surfaces.insert(&e.surface_form) {
                return Err(Error::domain(format!("surface form {:?} mapped twice", e.surface_form)));
            }
        }
        Ok(())
    }
}

struct Span {
    start: usize,
    end: usize,
    ambiguous: bool,
}

fn only_whitespace_between(text: &str, a: &Token, b: &Token) -> bool {
    let gap = &text[a.end..b.start];
    !gap.is_empty() && gap.chars().all(char::is_whitespace)
}

/// Replaces roster names and email-shaped tokens with stable placeholders.
///
/// Full names are matched as whitespace-separated token phrases first, then
/// single name tokens of at least three characters, all case- and
/// diacritic-insensitively. New surface forms extend `map`; existing entries
/// are never renumbered.
pub fn anonymize(text: &str, roster: &Roster, map: &mut RedactionMap) -> String {
    let mut spans: Vec<Span> = email_regex()
        .find_iter(text)
        .map(|m| Span {
            start: m.start(),
            end: m.end(),
            ambiguous: false,
        })
        .collect();

    let in_email = |t: &Token| spans.iter().any(|s| t.start < s.end && s.start < t.end);
    let toks: Vec<Token> = tokens(text).into_iter().filter(|t| !in_email(t)).collect();
    let full_names = roster.full_names();
    let name_tokens = roster.name_tokens();

    let mut i = 0;
    while i < toks.len() {
        let phrase = full_names.iter().find(|(phrase, _)| {
            let n = phrase.len();
            i + n <= toks.len()
                && toks[i..i + n].iter().zip(phrase).all(|(t, p)| &t.folded == p)
                && toks[i..i + n].windows(2).all(|w| only_whitespace_between(text, &w[0], &w[1]))
        });
        if let Some((phrase, owners)) = phrase {
            let n = phrase.len();
            spans.push(Span {
                start: toks[i].start,
                end: toks[i + n - 1].end,
                ambiguous: owners.len() > 1,
            });
            i += n;
            continue;
        }
        if let Some(owners) = name_tokens.get(&toks[i].folded) {
            spans.push(Span {
                start: toks[i].start,
                end: toks[i].end,
                ambiguous: owners.len() > 1,
            });
        }
        i += 1;
    }

    spans.sort_by_key(|s| s.start);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in spans {
        out.push_str(&text[cursor..span.start]);
        out.push_str(&map.assign(&text[span.start..span.end], span.ambiguous));
        cursor = span.end;
    }
    out.push_str(&text[cursor..]);
    out
}

pub fn placeholder_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bPERSON_[0-9]+\b").expect("static regex"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deanonymized {
    pub text: String,
    /// Placeholders with no entry in the map; left verbatim.
    pub warnings: Vec<String>,
}

/// Restores surface forms for every known placeholder.
pub fn deanonymize(text: &str, map: &RedactionMap) -> Deanonymized {
    let mut warnings = Vec::new();
    let text = placeholder_regex()
        .replace_all(text, |caps: &regex::Captures<'_>| {
            let ph = &caps[0];
            match map.surface_of(ph) {
                Some(surface) => surface.to_owned(),
                None => {
                    warnings.push(format!("unknown placeholder {ph}"));
                    ph.to_owned()
                }
            }
        })
        .into_owned();
    Deanonymized { text, warnings }
}

/// Identifying tokens left in `text`: roster name tokens of at least three
/// characters, roster emails, and any email-shaped token.
pub fn find_residuals(text: &str, roster: &Roster) -> Vec<String> {
    let names = roster.name_tokens();
    let emails = roster.emails();
    let mut found: Vec<String> = email_regex().find_iter(text).map(|m| m.as_str().to_owned()).collect();
    let lower = text.to_lowercase();
    found.extend(emails.into_iter().filter(|e| lower.contains(e.as_str())));
    found.extend(
        tokens(text)
            .into_iter()
            .filter(|t| names.contains_key(&t.folded))
            .map(|t| text[t.start..t.end].to_owned()),
    );
    found
}

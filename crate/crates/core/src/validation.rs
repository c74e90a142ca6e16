//! Teacher-defined constraints on generated feedback.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::{detect, Detected};
use crate::model::Language;
use crate::preprocess::RedactionMap;
use crate::prompt::LengthLimits;
use crate::text::{contains_token_sequence, folded_tokens, is_terminal_punct, split_paragraphs, word_count};

pub const DEFAULT_MIN_WORDS: usize = 80;
pub const DEFAULT_MAX_WORDS: usize = 400;
pub const DEFAULT_MAX_REGENERATIONS: u32 = 3;
/// Strengths, areas for improvement, action plan.
pub const REQUIRED_PARAGRAPHS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationPolicy {
    pub min_words: usize,
    pub max_words: usize,
    #[serde(default = "required_paragraphs")]
    pub required_paragraphs: usize,
    #[serde(default)]
    pub restricted_terms: BTreeSet<String>,
    pub language: Language,
    #[serde(default = "max_regenerations")]
    pub max_regenerations: u32,
}

fn required_paragraphs() -> usize {
    REQUIRED_PARAGRAPHS
}

fn max_regenerations() -> u32 {
    DEFAULT_MAX_REGENERATIONS
}

impl ValidationPolicy {
    pub fn new(language: Language) -> Self {
        Self {
            min_words: DEFAULT_MIN_WORDS,
            max_words: DEFAULT_MAX_WORDS,
            required_paragraphs: REQUIRED_PARAGRAPHS,
            restricted_terms: BTreeSet::new(),
            language,
            max_regenerations: DEFAULT_MAX_REGENERATIONS,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.min_words == 0 || self.min_words >= self.max_words {
            return Err(Error::config(format!(
                "policy needs 0 < min_words < max_words, got {} and {}",
                self.min_words, self.max_words
            )));
        }
        if self.required_paragraphs == 0 {
            return Err(Error::config("policy needs at least one paragraph"));
        }
        Ok(())
    }

    pub fn limits(&self) -> LengthLimits {
        LengthLimits {
            min_words: self.min_words,
            max_words: self.max_words,
        }
    }

    pub fn with_restricted<I, S>(mut self, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.restricted_terms.extend(terms.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    TooShort,
    TooLong,
    WrongParagraphCount,
    RestrictedTerm,
    EmptyParagraph,
    LanguageMismatch,
    TruncatedEnding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    #[serde(default)]
    pub candidate_ref: Option<String>,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

impl ValidationVerdict {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            candidate_ref: None,
            passed: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

/// Restricted terms and roster surface forms found in `text`.
///
/// Matching is by whole folded tokens, so the checks ignore case and accents.
pub fn restricted_findings(text: &str, terms: &BTreeSet<String>, map: Option<&RedactionMap>) -> Vec<String> {
    let words = folded_tokens(text);
    let surfaces = map.into_iter().flat_map(|m| m.entries.iter().map(|e| &e.surface_form));
    let mut seen = BTreeSet::new();
    terms
        .iter()
        .chain(surfaces)
        .filter(|t| contains_token_sequence(&words, &folded_tokens(t)))
        .filter(|t| seen.insert(crate::text::fold(t)))
        .cloned()
        .collect()
}

/// Checks every constraint and reports all violations.
///
/// Coherence is structural: the paragraph count, non-empty paragraphs, the
/// detected language and a final paragraph ending in terminal punctuation.
pub fn validate(raw_text: &str, policy: &ValidationPolicy, map: Option<&RedactionMap>) -> ValidationVerdict {
    let mut violations = Vec::new();
    let paragraphs = split_paragraphs(raw_text);

    if paragraphs.len() != policy.required_paragraphs {
        violations.push(Violation {
            code: ViolationCode::WrongParagraphCount,
            detail: format!("expected {} paragraphs, found {}", policy.required_paragraphs, paragraphs.len()),
        });
    }
    for (i, p) in paragraphs.iter().enumerate() {
        if p.trim().is_empty() {
            violations.push(Violation {
                code: ViolationCode::EmptyParagraph,
                detail: format!("paragraph {} is empty", i + 1),
            });
        }
    }

    let words = word_count(raw_text);
    if words < policy.min_words {
        violations.push(Violation {
            code: ViolationCode::TooShort,
            detail: format!("{words} words, minimum {}", policy.min_words),
        });
    } else if words > policy.max_words {
        violations.push(Violation {
            code: ViolationCode::TooLong,
            detail: format!("{words} words, maximum {}", policy.max_words),
        });
    }

    for term in restricted_findings(raw_text, &policy.restricted_terms, map) {
        violations.push(Violation {
            code: ViolationCode::RestrictedTerm,
            detail: term,
        });
    }

    match detect(raw_text) {
        Detected::Language(l) if l == policy.language => {}
        Detected::Language(l) => violations.push(Violation {
            code: ViolationCode::LanguageMismatch,
            detail: format!("expected {}, detected {}", policy.language, l),
        }),
        Detected::Unknown => violations.push(Violation {
            code: ViolationCode::LanguageMismatch,
            detail: format!("expected {}, language could not be identified", policy.language),
        }),
    }

    let ending = raw_text
        .trim_end()
        .trim_end_matches(|c: char| matches!(c, '"' | '\'' | '”' | '’' | ')' | '»' | ']'));
    if !ending.chars().last().is_some_and(is_terminal_punct) {
        violations.push(Violation {
            code: ViolationCode::TruncatedEnding,
            detail: "final paragraph does not end with terminal punctuation".to_owned(),
        });
    }

    ValidationVerdict::from_violations(violations)
}

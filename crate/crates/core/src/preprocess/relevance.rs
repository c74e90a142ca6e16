use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::normalize::{normalize_with, CharacterPolicy};
use crate::error::{Error, Result};
use crate::model::{EvaluationId, ItemId, Rubric, RubricId, RubricItem};
use crate::text::folded_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceVerdict {
    pub relevant: bool,
    pub matched_terms: BTreeSet<String>,
}

/// Screens a normalized comment against an item's term list.
///
/// Each term matches when its tokens are prefixes of consecutive comment
/// tokens, compared case- and diacritic-insensitively. An empty term list
/// accepts every comment.
pub fn screen_relevance(comment: &str, item: &RubricItem) -> RelevanceVerdict {
    if item.relevance_terms.is_empty() {
        return RelevanceVerdict {
            relevant: true,
            matched_terms: BTreeSet::new(),
        };
    }
    let words = folded_tokens(comment);
    let matched_terms: BTreeSet<String> = item
        .relevance_terms
        .iter()
        .filter(|term| term_matches(&words, &folded_tokens(term)))
        .cloned()
        .collect();
    RelevanceVerdict {
        relevant: !matched_terms.is_empty(),
        matched_terms,
    }
}

fn term_matches(words: &[String], term: &[String]) -> bool {
    if term.is_empty() || term.len() > words.len() {
        return false;
    }
    words
        .windows(term.len())
        .any(|w| w.iter().zip(term).all(|(word, t)| word.starts_with(t.as_str())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenedComment {
    pub source_evaluation_id: EvaluationId,
    pub item_id: ItemId,
    pub original_text: String,
    pub normalized_text: String,
    pub relevant: bool,
    pub matched_terms: BTreeSet<String>,
}

impl ScreenedComment {
    /// Normalizes and screens a raw comment.
    pub fn screen(
        evaluation: &EvaluationId,
        item: &RubricItem,
        raw: &str,
        policy: &CharacterPolicy,
    ) -> Self {
        let normalized_text = normalize_with(raw, policy);
        let verdict = screen_relevance(&normalized_text, item);
        Self {
            source_evaluation_id: evaluation.clone(),
            item_id: item.id.clone(),
            original_text: raw.to_owned(),
            normalized_text,
            relevant: verdict.relevant,
            matched_terms: verdict.matched_terms,
        }
    }
}

/// Per-rubric preprocessing configuration document.
///
/// ```json
/// {
///   "rubric_id": "oral-presentation",
///   "character_policy": { "strip_control": true, "strip_format": true,
///                         "strip_unassigned": true, "strip_private_use": false,
///                         "extra_removed": [] },
///   "relevance_terms": { "eye-contact": ["eye contact", "gaze", "mirada"] }
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub rubric_id: RubricId,
    #[serde(default)]
    pub character_policy: CharacterPolicy,
    #[serde(default)]
    pub relevance_terms: BTreeMap<ItemId, BTreeSet<String>>,
}

impl PreprocessConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::config(format!("preprocess config: {e}")))
    }

    /// Overwrites the term lists of the listed items, lowercasing every term.
    pub fn apply_to(&self, rubric: &mut Rubric) -> Result<()> {
        if self.rubric_id != rubric.id {
            return Err(Error::config(format!(
                "preprocess config targets rubric {}, not {}",
                self.rubric_id, rubric.id
            )));
        }
        for (item_id, terms) in &self.relevance_terms {
            let item = rubric
                .items
                .iter_mut()
                .find(|i| &i.id == item_id)
                .ok_or_else(|| Error::config(format!("unknown rubric item {item_id}")))?;
            item.relevance_terms = terms.iter().map(|t| t.to_lowercase()).collect();
        }
        Ok(())
    }
}

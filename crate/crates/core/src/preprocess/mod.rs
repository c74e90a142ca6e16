//! Comment preprocessing: normalization, relevance screening and anonymization.

mod anonymize;
mod normalize;
mod relevance;

pub use anonymize::{
    anonymize, deanonymize, find_residuals, placeholder_regex, Deanonymized, RedactionEntry,
    RedactionMap, Roster, RosterEntry,
};
pub use normalize::{normalize_comment, normalize_with, CharacterPolicy};
pub use relevance::{screen_relevance, PreprocessConfig, RelevanceVerdict, ScreenedComment};

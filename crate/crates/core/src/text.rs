//! Text primitives shared by preprocessing, validation and curation.

use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategory, UnicodeGeneralCategory};

/// Case- and diacritic-insensitive comparison key.
pub fn fold(s: &str) -> String {
    s.nfd()
        .filter(|c| {
            !matches!(
                c.general_category(),
                GeneralCategory::NonspacingMark | GeneralCategory::EnclosingMark
            )
        })
        .flat_map(char::to_lowercase)
        .collect()
}

/// A word token with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub folded: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
        || matches!(
            c.general_category(),
            GeneralCategory::NonspacingMark
                | GeneralCategory::SpacingMark
                | GeneralCategory::EnclosingMark
        )
}

/// Maximal runs of letters, digits and combining marks.
pub fn tokens(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Token {
                    start: s,
                    end: i,
                    folded: fold(&text[s..i]),
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            start: s,
            end: text.len(),
            folded: fold(&text[s..]),
        });
    }
    out
}

/// Folded tokens only.
pub fn folded_tokens(text: &str) -> Vec<String> {
    tokens(text).into_iter().map(|t| t.folded).collect()
}

/// Whitespace-delimited word count, used for length limits everywhere.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn blank_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\r?\n[ \t]*\r?\n").expect("static regex"))
}

/// Splits on blank lines. Consecutive blank lines yield empty paragraphs.
pub fn split_paragraphs(text: &str) -> Vec<&str> {
    blank_line().split(text.trim()).collect()
}

/// Collapses whitespace runs to single spaces and trims.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical paragraph layout: each paragraph whitespace-collapsed, paragraphs
/// joined by exactly one blank line.
pub fn canonical_layout(text: &str) -> String {
    split_paragraphs(text)
        .into_iter()
        .map(collapse_whitespace)
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn is_terminal_punct(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

/// Email-shaped tokens.
pub fn email_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9\-]+(?:\.[A-Za-z0-9\-]+)*\.[A-Za-z]{2,}")
            .expect("static regex")
    })
}

/// Whether `needle` (a folded token sequence) occurs as consecutive whole tokens.
pub fn contains_token_sequence(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

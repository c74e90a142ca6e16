use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategory, UnicodeGeneralCategory};

/// Which characters count as invalid and are stripped from comments.
///
/// Letters, digits, punctuation and symbols of every script are kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CharacterPolicy {
    /// C0/C1 control characters other than whitespace.
    pub strip_control: bool,
    /// Invisible format characters: zero-width space and joiners, BOM, bidi controls.
    pub strip_format: bool,
    /// Unassigned code points, noncharacters and U+FFFD.
    pub strip_unassigned: bool,
    pub strip_private_use: bool,
    /// Additional characters to drop.
    pub extra_removed: Vec<char>,
}

impl Default for CharacterPolicy {
    fn default() -> Self {
        Self {
            strip_control: true,
            strip_format: true,
            strip_unassigned: true,
            strip_private_use: false,
            extra_removed: Vec::new(),
        }
    }
}

impl CharacterPolicy {
    pub fn removes(&self, c: char) -> bool {
        if c == char::REPLACEMENT_CHARACTER && self.strip_unassigned {
            return true;
        }
        if self.extra_removed.contains(&c) {
            return true;
        }
        match c.general_category() {
            GeneralCategory::Control => self.strip_control,
            GeneralCategory::Format => self.strip_format,
            GeneralCategory::Unassigned => self.strip_unassigned,
            GeneralCategory::PrivateUse => self.strip_private_use,
            _ => false,
        }
    }
}

/// Normalizes a comment with the default character policy.
pub fn normalize_comment(raw: &str) -> String {
    normalize_with(raw, &CharacterPolicy::default())
}

/// Whitespace becomes a space, invalid characters are dropped, the rest is
/// NFC-composed, then whitespace runs collapse and the ends are trimmed.
pub fn normalize_with(raw: &str, policy: &CharacterPolicy) -> String {
    let filtered: String = raw
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if policy.removes(c) {
                None
            } else {
                Some(c)
            }
        })
        .collect();
    let composed: String = filtered.nfc().collect();
    composed.split(' ').filter(|s| !s.is_empty()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_nul_and_collapses() {
        assert_eq!(normalize_comment("Great  pace!\u{0000}\n"), "Great pace!");
        assert_eq!(normalize_comment(""), "");
    }

    #[test]
    fn keeps_bilingual_text_and_composes() {
        assert_eq!(normalize_comment("Buena expresio\u{301}n, ¿verdad?"), "Buena expresión, ¿verdad?");
    }

    #[test]
    fn drops_zero_width_and_replacement() {
        assert_eq!(normalize_comment("ey\u{200B}e con\u{FEFF}tact \u{FFFD}ok"), "eye contact ok");
        assert_eq!(normalize_comment("\u{10FFFF}x\u{0378}"), "x");
    }

    #[test]
    fn custom_policy() {
        let p = CharacterPolicy {
            strip_private_use: true,
            extra_removed: vec!['#'],
            ..Default::default()
        };
        assert_eq!(normalize_with("#tag \u{E000}x", &p), "tag x");
    }
}

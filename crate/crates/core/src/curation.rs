//! Sentence-level curation with provenance.
//!
//! Candidates are segmented into attributed sentences. Teachers compose
//! feedback by picking sentences, optionally editing them or adding their
//! own text; every composition is an immutable versioned snapshot whose
//! [`ContributionBreakdown`] is derived from the sentences alone.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CandidateId, FeedbackId, InstanceId, SentenceId, UserId};
use crate::text::{canonical_layout, is_terminal_punct, split_paragraphs};
use crate::validation::ValidationVerdict;

/// Where a sentence's content came from. The three LLM lanes plus the teacher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSource {
    Gpt,
    Gemini,
    Llama,
    Teacher,
}

impl FeedbackSource {
    pub const ALL: [FeedbackSource; 4] = [
        FeedbackSource::Gpt,
        FeedbackSource::Gemini,
        FeedbackSource::Llama,
        FeedbackSource::Teacher,
    ];

    pub fn is_llm(self) -> bool {
        self != FeedbackSource::Teacher
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackSource::Gpt => "gpt",
            FeedbackSource::Gemini => "gemini",
            FeedbackSource::Llama => "llama",
            FeedbackSource::Teacher => "teacher",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: SentenceId,
    pub text: String,
    pub source: FeedbackSource,
    #[serde(default)]
    pub origin_candidate_id: Option<CandidateId>,
    #[serde(default)]
    pub origin_sentence_id: Option<SentenceId>,
    #[serde(default)]
    pub edited: bool,
    /// Text of the origin sentence, kept once the sentence has been edited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_text: Option<String>,
}

impl Sentence {
    /// Normalized edit distance against the origin, 0 for unedited sentences.
    pub fn edit_ratio(&self) -> f64 {
        match (&self.origin_text, self.edited) {
            (Some(orig), true) => edit_ratio(orig, &self.text),
            _ => 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::domain(format!("sentence {} is empty", self.id)));
        }
        if self.source.is_llm() && (self.origin_candidate_id.is_none() || self.origin_sentence_id.is_none()) {
            return Err(Error::domain(format!("sentence {} lacks its origin", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    /// Tokens ending in a period that never close a sentence. Case-insensitive.
    pub abbreviations: Vec<String>,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            abbreviations: ["Dr.", "Dra.", "Sr.", "Sra.", "Mr.", "Mrs.", "Ms.", "etc.", "e.g.", "i.e.", "p. ej.", "vs."]
                .into_iter()
                .map(String::from)
                .collect(),
        }
    }
}

impl SegmenterConfig {
    fn ends_with_abbreviation(&self, head: &str) -> bool {
        let lower = head.to_lowercase();
        self.abbreviations.iter().any(|abbr| {
            let abbr = abbr.to_lowercase();
            lower.ends_with(&abbr) && {
                let before = &lower[..lower.len() - abbr.len()];
                before.chars().last().map_or(true, |c| !c.is_alphanumeric())
            }
        })
    }
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | '”' | '’' | ')' | ']' | '»')
}

fn is_opening(c: char) -> bool {
    c.is_uppercase() || matches!(c, '"' | '\'' | '“' | '‘' | '(' | '[' | '¿' | '¡' | '«')
}

/// Splits one whitespace-collapsed paragraph into sentences.
///
/// A boundary is terminal punctuation (plus any closing quotes or brackets)
/// followed by a single space and an uppercase or opening character, unless
/// the text up to the punctuation ends with a configured abbreviation.
pub fn split_sentences(paragraph: &str, cfg: &SegmenterConfig) -> Vec<String> {
    let chars: Vec<(usize, char)> = paragraph.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_terminal_punct(chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminal_punct(chars[j].1) || is_closing(chars[j].1)) {
            j += 1;
        }
        let at_boundary = j + 1 < chars.len() && chars[j].1 == ' ' && is_opening(chars[j + 1].1);
        if at_boundary {
            let end = chars[j].0;
            let punct_end = chars[i].0 + chars[i].1.len_utf8();
            if !cfg.ends_with_abbreviation(&paragraph[start..punct_end]) {
                out.push(paragraph[start..end].to_owned());
                start = chars[j + 1].0;
            }
        }
        i = j;
    }
    if start < paragraph.len() {
        out.push(paragraph[start..].to_owned());
    }
    out
}

/// Paragraphs of sentences over the canonical layout of `text`.
pub fn segment_text(text: &str, cfg: &SegmenterConfig) -> Result<Vec<Vec<String>>> {
    let canonical = canonical_layout(text);
    if canonical.trim().is_empty() {
        return Err(Error::domain("cannot segment empty feedback text"));
    }
    Ok(split_paragraphs(&canonical)
        .into_iter()
        .map(|p| split_sentences(p, cfg))
        .collect())
}

/// Sentences joined by single spaces, paragraphs by one blank line.
pub fn join_paragraphs<S: AsRef<str>>(paragraphs: &[Vec<S>]) -> String {
    paragraphs
        .iter()
        .map(|p| p.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCandidate {
    pub id: CandidateId,
    pub instance_id: InstanceId,
    pub provider_id: String,
    pub source: FeedbackSource,
    pub paragraphs: Vec<Vec<Sentence>>,
    pub verdict: ValidationVerdict,
    pub regenerations: u32,
    pub created_at: DateTime<Utc>,
}

pub struct CandidateSpec<'a> {
    pub id: CandidateId,
    pub instance_id: InstanceId,
    pub provider_id: &'a str,
    pub source: FeedbackSource,
    pub verdict: ValidationVerdict,
    pub regenerations: u32,
    pub created_at: DateTime<Utc>,
}

impl FeedbackCandidate {
    /// Segments validated text into an attributed candidate.
    pub fn segment(text: &str, spec: CandidateSpec<'_>, cfg: &SegmenterConfig) -> Result<Self> {
        if !spec.source.is_llm() {
            return Err(Error::domain("candidates come from an LLM lane"));
        }
        let paragraphs = segment_text(text, cfg)?
            .into_iter()
            .enumerate()
            .map(|(p, sentences)| {
                sentences
                    .into_iter()
                    .enumerate()
                    .map(|(s, text)| Sentence {
                        id: SentenceId::new(format!("p{}s{}", p + 1, s + 1)),
                        text,
                        source: spec.source,
                        origin_candidate_id: Some(spec.id.clone()),
                        origin_sentence_id: Some(SentenceId::new(format!("p{}s{}", p + 1, s + 1))),
                        edited: false,
                        origin_text: None,
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            id: spec.id,
            instance_id: spec.instance_id,
            provider_id: spec.provider_id.to_owned(),
            source: spec.source,
            paragraphs,
            verdict: spec.verdict,
            regenerations: spec.regenerations,
            created_at: spec.created_at,
        })
    }

    pub fn text(&self) -> String {
        let texts: Vec<Vec<&str>> = self
            .paragraphs
            .iter()
            .map(|p| p.iter().map(|s| s.text.as_str()).collect())
            .collect();
        join_paragraphs(&texts)
    }

    pub fn sentence(&self, id: &SentenceId) -> Option<&Sentence> {
        self.paragraphs.iter().flatten().find(|s| &s.id == id)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.paragraphs.iter().flatten()
    }
}

/// Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `levenshtein(a, b) / max(|a|, |b|)`, 0 when both are empty.
pub fn edit_ratio(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / longest as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionBreakdown {
    /// Character-weighted share per source; all four sources are present.
    pub proportions: BTreeMap<FeedbackSource, f64>,
    pub teacher_modification_extent: f64,
}

impl ContributionBreakdown {
    /// Integer percentages for the legend.
    pub fn percentages(&self) -> BTreeMap<FeedbackSource, i64> {
        self.proportions.iter().map(|(&s, &p)| (s, (p * 100.0).round() as i64)).collect()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.teacher_modification_extent - other.teacher_modification_extent).abs() <= tol
            && FeedbackSource::ALL.iter().all(|s| {
                let a = self.proportions.get(s).copied().unwrap_or(0.0);
                let b = other.proportions.get(s).copied().unwrap_or(0.0);
                (a - b).abs() <= tol
            })
    }
}

/// Credits each sentence's characters to its sources.
///
/// An edited LLM sentence with edit ratio `d` credits `1 − d` of its length to
/// the LLM and `d` to the teacher. Teacher-authored sentences credit the
/// teacher fully but do not enter the modification extent, which is the
/// length-weighted mean of `d` over LLM-origin sentences.
pub fn compute_breakdown(sentences: &[Sentence]) -> ContributionBreakdown {
    let mut credit: BTreeMap<FeedbackSource, f64> = FeedbackSource::ALL.iter().map(|&s| (s, 0.0)).collect();
    let mut total = 0.0;
    let mut llm_chars = 0.0;
    let mut llm_weighted_d = 0.0;

    for s in sentences {
        let len = s.text.chars().count() as f64;
        total += len;
        if s.source.is_llm() {
            let d = s.edit_ratio();
            *credit.entry(s.source).or_default() += (1.0 - d) * len;
            *credit.entry(FeedbackSource::Teacher).or_default() += d * len;
            llm_chars += len;
            llm_weighted_d += d * len;
        } else {
            *credit.entry(FeedbackSource::Teacher).or_default() += len;
        }
    }

    let proportions = credit
        .into_iter()
        .map(|(s, c)| (s, if total > 0.0 { c / total } else { 0.0 }))
        .collect();
    ContributionBreakdown {
        proportions,
        teacher_modification_extent: if llm_chars > 0.0 { llm_weighted_d / llm_chars } else { 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackState {
    Draft,
    Sent,
}

impl FeedbackState {
    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackState::Draft => "draft",
            FeedbackState::Sent => "sent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedFeedback {
    pub id: FeedbackId,
    pub instance_id: InstanceId,
    pub version: u32,
    pub state: FeedbackState,
    pub sentences: Vec<Sentence>,
    pub composed_by: UserId,
    pub breakdown: ContributionBreakdown,
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub sent_at: Option<DateTime<Utc>>,
    /// Set when the composition draws on a candidate that failed validation.
    #[serde(default)]
    pub override_unpassed: bool,
    #[serde(default)]
    pub parent_version: Option<u32>,
}

pub fn feedback_id(instance: &InstanceId, version: u32) -> FeedbackId {
    FeedbackId::new(format!("{instance}-v{version}"))
}

impl ComposedFeedback {
    pub fn text(&self) -> String {
        self.sentences.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ")
    }

    /// Checks sentence invariants and that the stored breakdown is current.
    pub fn verify(&self) -> Result<()> {
        if self.version == 0 {
            return Err(Error::domain("feedback versions start at 1"));
        }
        for s in &self.sentences {
            s.check()?;
        }
        if self.state == FeedbackState::Sent && self.sent_at.is_none() {
            return Err(Error::domain(format!("sent feedback {} lacks sent_at", self.id)));
        }
        if !compute_breakdown(&self.sentences).approx_eq(&self.breakdown, 1e-12) {
            return Err(Error::domain(format!("feedback {} carries a stale breakdown", self.id)));
        }
        Ok(())
    }

    pub fn mark_sent(&self, now: DateTime<Utc>) -> Result<ComposedFeedback> {
        if self.state == FeedbackState::Sent {
            return Err(Error::state(format!("feedback {} was already sent", self.id)));
        }
        let mut sent = self.clone();
        sent.state = FeedbackState::Sent;
        sent.sent_at = Some(now);
        Ok(sent)
    }
}

/// One entry of a composition request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Selection {
    Sentence {
        candidate_id: CandidateId,
        sentence_id: SentenceId,
    },
    Paragraph {
        candidate_id: CandidateId,
        paragraph: usize,
    },
    TeacherText {
        teacher_text: String,
    },
}

pub struct Composition<'a> {
    pub instance_id: &'a InstanceId,
    pub version: u32,
    pub composed_by: &'a UserId,
    pub selections: &'a [Selection],
    pub candidates: &'a [FeedbackCandidate],
    pub allow_unpassed: bool,
    pub now: DateTime<Utc>,
}

fn find_candidate<'c>(candidates: &'c [FeedbackCandidate], instance: &InstanceId, id: &CandidateId) -> Result<&'c FeedbackCandidate> {
    let c = candidates
        .iter()
        .find(|c| &c.id == id)
        .ok_or_else(|| Error::not_found(format!("candidate {id}")))?;
    if &c.instance_id != instance {
        return Err(Error::domain(format!("candidate {id} belongs to another instance")));
    }
    Ok(c)
}

/// Builds a draft from selections, copying provenance from the candidates.
pub fn compose(req: Composition<'_>) -> Result<ComposedFeedback> {
    if req.selections.is_empty() {
        return Err(Error::domain("empty selection"));
    }
    let mut picked: Vec<Sentence> = Vec::new();
    let mut uses_unpassed = false;
    for sel in req.selections {
        match sel {
            Selection::Sentence { candidate_id, sentence_id } => {
                let c = find_candidate(req.candidates, req.instance_id, candidate_id)?;
                let s = c
                    .sentence(sentence_id)
                    .ok_or_else(|| Error::not_found(format!("sentence {sentence_id} in candidate {candidate_id}")))?;
                uses_unpassed |= !c.verdict.passed;
                picked.push(s.clone());
            }
            Selection::Paragraph { candidate_id, paragraph } => {
                let c = find_candidate(req.candidates, req.instance_id, candidate_id)?;
                let p = c
                    .paragraphs
                    .get(*paragraph)
                    .ok_or_else(|| Error::not_found(format!("paragraph {paragraph} in candidate {candidate_id}")))?;
                uses_unpassed |= !c.verdict.passed;
                picked.extend(p.iter().cloned());
            }
            Selection::TeacherText { teacher_text } => {
                if teacher_text.trim().is_empty() {
                    return Err(Error::domain("teacher text must not be empty"));
                }
                picked.push(Sentence {
                    id: SentenceId::new(String::new()),
                    text: teacher_text.clone(),
                    source: FeedbackSource::Teacher,
                    origin_candidate_id: None,
                    origin_sentence_id: None,
                    edited: false,
                    origin_text: None,
                });
            }
        }
    }
    if uses_unpassed && !req.allow_unpassed {
        return Err(Error::state("selection uses a candidate that failed validation; override required"));
    }
    for (i, s) in picked.iter_mut().enumerate() {
        s.id = SentenceId::new(format!("s{}", i + 1));
    }
    let breakdown = compute_breakdown(&picked);
    Ok(ComposedFeedback {
        id: feedback_id(req.instance_id, req.version),
        instance_id: req.instance_id.clone(),
        version: req.version,
        state: FeedbackState::Draft,
        sentences: picked,
        composed_by: req.composed_by.clone(),
        breakdown,
        created_at: req.now,
        sent_at: None,
        override_unpassed: uses_unpassed,
        parent_version: None,
    })
}

/// A new draft version with one sentence replaced.
pub fn edit_sentence(
    draft: &ComposedFeedback,
    sentence_id: &SentenceId,
    new_text: &str,
    version: u32,
    editor: &UserId,
    now: DateTime<Utc>,
) -> Result<ComposedFeedback> {
    if draft.state == FeedbackState::Sent {
        return Err(Error::state(format!("feedback {} was sent and cannot be edited", draft.id)));
    }
    if new_text.trim().is_empty() {
        return Err(Error::domain("edited sentence must not be empty"));
    }
    let mut next = draft.clone();
    let s = next
        .sentences
        .iter_mut()
        .find(|s| &s.id == sentence_id)
        .ok_or_else(|| Error::not_found(format!("sentence {sentence_id} in {}", draft.id)))?;
    if s.text != new_text {
        if s.source.is_llm() {
            if s.origin_text.is_none() {
                s.origin_text = Some(s.text.clone());
            }
            s.edited = s.origin_text.as_deref() != Some(new_text);
        }
        s.text = new_text.to_owned();
    }
    next.breakdown = compute_breakdown(&next.sentences);
    next.version = version;
    next.id = feedback_id(&draft.instance_id, version);
    next.parent_version = Some(draft.version);
    next.composed_by = editor.clone();
    next.created_at = now;
    Ok(next)
}

/// Every LLM sentence resolves to a candidate sentence of the same lane, and
/// unedited sentences still equal their origin.
pub fn check_provenance(feedback: &ComposedFeedback, candidates: &[FeedbackCandidate]) -> Result<()> {
    for s in feedback.sentences.iter().filter(|s| s.source.is_llm()) {
        let (Some(cid), Some(sid)) = (&s.origin_candidate_id, &s.origin_sentence_id) else {
            return Err(Error::domain(format!("sentence {} lacks its origin", s.id)));
        };
        let c = find_candidate(candidates, &feedback.instance_id, cid)?;
        let origin = c
            .sentence(sid)
            .ok_or_else(|| Error::not_found(format!("origin sentence {sid} in {cid}")))?;
        if origin.source != s.source {
            return Err(Error::domain(format!("sentence {} changed source", s.id)));
        }
        let expected = if s.edited { s.origin_text.as_deref() } else { Some(s.text.as_str()) };
        if expected != Some(origin.text.as_str()) {
            return Err(Error::domain(format!("sentence {} no longer matches its origin", s.id)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::ValidationVerdict;

    fn candidate(id: &str, source: FeedbackSource, text: &str) -> FeedbackCandidate {
        FeedbackCandidate::segment(
            text,
            CandidateSpec {
                id: id.into(),
                instance_id: "i".into(),
                provider_id: source.as_str(),
                source,
                verdict: ValidationVerdict::from_violations(vec![]),
                regenerations: 0,
                created_at: Utc::now(),
            },
            &SegmenterConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn splits_on_terminal_punctuation() {
        let cfg = SegmenterConfig::default();
        assert_eq!(split_sentences("Good pace. Clear voice.", &cfg), ["Good pace.", "Clear voice."]);
        assert_eq!(split_sentences("e.g. slides were dense.", &cfg).len(), 1);
        assert_eq!(split_sentences("Ask Dr. Smith. Then rest!", &cfg), ["Ask Dr. Smith.", "Then rest!"]);
        assert_eq!(split_sentences("Véase p. ej. Tema dos. Bien.", &cfg), ["Véase p. ej. Tema dos.", "Bien."]);
        assert_eq!(split_sentences("Wow?! \"Yes,\" he said. ¿Claro? Sí…", &cfg).len(), 4);
        assert_eq!(split_sentences("Version 2.0 is out. ok then", &cfg), ["Version 2.0 is out. ok then"]);
    }

    #[test]
    fn empty_text_cannot_be_segmented() {
        assert!(segment_text("  \n\n ", &SegmenterConfig::default()).is_err());
    }

    #[test]
    fn candidate_round_trips() {
        let text = "Good pace. Clear voice.\n\nToo many slides. Shorter ending.\n\nRehearse twice.";
        let c = candidate("c1", FeedbackSource::Gpt, text);
        assert_eq!(c.paragraphs.len(), 3);
        assert_eq!(c.text(), text);
    }

    #[test]
    fn levenshtein_basics() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("ñandú", "nandu"), 2);
        assert_eq!(edit_ratio("", ""), 0.0);
        assert_eq!(edit_ratio("abc", "xyz"), 1.0);
    }

    #[test]
    fn character_weighted_proportions() {
        // 20 + 20 gpt chars, 20 + 20 gemini chars, 20 teacher chars
        let gpt = candidate("g", FeedbackSource::Gpt, "Aaaaaaaaaaaaaaaaaaa. Bbbbbbbbbbbbbbbbbbb.\n\nX.\n\nY.");
        let gem = candidate("m", FeedbackSource::Gemini, "Ccccccccccccccccccc. Ddddddddddddddddddd.\n\nX.\n\nY.");
        let sel = vec![
            Selection::Sentence { candidate_id: "g".into(), sentence_id: "p1s1".into() },
            Selection::Sentence { candidate_id: "g".into(), sentence_id: "p1s2".into() },
            Selection::Sentence { candidate_id: "m".into(), sentence_id: "p1s1".into() },
            Selection::Sentence { candidate_id: "m".into(), sentence_id: "p1s2".into() },
            Selection::TeacherText { teacher_text: "Ttttttttttttttttttt.".into() },
        ];
        let f = compose(Composition {
            instance_id: &"i".into(),
            version: 1,
            composed_by: &"t".into(),
            selections: &sel,
            candidates: &[gpt, gem],
            allow_unpassed: false,
            now: Utc::now(),
        })
        .unwrap();
        let p = &f.breakdown.proportions;
        assert!((p[&FeedbackSource::Gpt] - 0.4).abs() < 1e-12);
        assert!((p[&FeedbackSource::Gemini] - 0.4).abs() < 1e-12);
        assert_eq!(p[&FeedbackSource::Llama], 0.0);
        assert!((p[&FeedbackSource::Teacher] - 0.2).abs() < 1e-12);
        assert_eq!(f.breakdown.teacher_modification_extent, 0.0);
        f.verify().unwrap();
    }

    #[test]
    fn verbatim_candidate_is_fully_attributed() {
        let c = candidate("g", FeedbackSource::Llama, "One. Two.\n\nThree.\n\nFour.");
        let sel: Vec<_> = (0..3).map(|p| Selection::Paragraph { candidate_id: "g".into(), paragraph: p }).collect();
        let f = compose(Composition {
            instance_id: &"i".into(),
            version: 1,
            composed_by: &"t".into(),
            selections: &sel,
            candidates: std::slice::from_ref(&c),
            allow_unpassed: false,
            now: Utc::now(),
        })
        .unwrap();
        assert_eq!(f.breakdown.proportions[&FeedbackSource::Llama], 1.0);
        assert_eq!(f.breakdown.teacher_modification_extent, 0.0);
        check_provenance(&f, &[c]).unwrap();
    }

    #[test]
    fn edited_sentence_splits_credit() {
        let orig: String = "a".repeat(100);
        let edited: String = "b".repeat(30) + &"a".repeat(70);
        let s = Sentence {
            id: "s1".into(),
            text: edited,
            source: FeedbackSource::Gpt,
            origin_candidate_id: Some("c".into()),
            origin_sentence_id: Some("p1s1".into()),
            edited: true,
            origin_text: Some(orig),
        };
        let b = compute_breakdown(&[s]);
        assert!((b.proportions[&FeedbackSource::Gpt] - 0.7).abs() < 1e-12);
        assert!((b.proportions[&FeedbackSource::Teacher] - 0.3).abs() < 1e-12);
        assert!((b.teacher_modification_extent - 0.3).abs() < 1e-12);
    }

    fn draft_from(c: &FeedbackCandidate) -> ComposedFeedback {
        compose(Composition {
            instance_id: &"i".into(),
            version: 1,
            composed_by: &"t".into(),
            selections: &[Selection::Paragraph { candidate_id: c.id.clone(), paragraph: 0 }],
            candidates: std::slice::from_ref(c),
            allow_unpassed: false,
            now: Utc::now(),
        })
        .unwrap()
    }

    #[test]
    fn edits_create_new_versions() {
        let c = candidate("g", FeedbackSource::Gpt, "Abc def. Ghi jkl.\n\nX.\n\nY.");
        let v1 = draft_from(&c);
        let v2 = edit_sentence(&v1, &"s1".into(), "Zzz zzz.", 2, &"t".into(), Utc::now()).unwrap();
        assert_eq!(v2.version, 2);
        assert_eq!(v2.parent_version, Some(1));
        assert!(v2.sentences[0].edited);
        assert_eq!(v2.sentences[0].source, FeedbackSource::Gpt);
        assert!(v2.breakdown.teacher_modification_extent > 0.0);
        check_provenance(&v2, &[c.clone()]).unwrap();
        // v1 untouched
        assert_eq!(v1.sentences[0].text, "Abc def.");

        let noop = edit_sentence(&v1, &"s1".into(), "Abc def.", 3, &"t".into(), Utc::now()).unwrap();
        assert_eq!(noop.breakdown, v1.breakdown);

        // editing back to the origin clears the edit
        let back = edit_sentence(&v2, &"s1".into(), "Abc def.", 4, &"t".into(), Utc::now()).unwrap();
        assert!(!back.sentences[0].edited);
        assert_eq!(back.breakdown.teacher_modification_extent, 0.0);
    }

    #[test]
    fn sent_feedback_is_frozen() {
        let c = candidate("g", FeedbackSource::Gpt, "Abc def.\n\nX.\n\nY.");
        let sent = draft_from(&c).mark_sent(Utc::now()).unwrap();
        assert!(matches!(
            edit_sentence(&sent, &"s1".into(), "New.", 2, &"t".into(), Utc::now()),
            Err(Error::State(_))
        ));
        assert!(sent.mark_sent(Utc::now()).is_err());
    }

    #[test]
    fn composition_errors() {
        let c = candidate("g", FeedbackSource::Gpt, "Abc def.\n\nX.\n\nY.");
        let base = |sel: &[Selection], cands: &[FeedbackCandidate]| {
            compose(Composition {
                instance_id: &"i".into(),
                version: 1,
                composed_by: &"t".into(),
                selections: sel,
                candidates: cands,
                allow_unpassed: false,
                now: Utc::now(),
            })
        };
        assert!(matches!(base(&[], &[c.clone()]), Err(Error::Domain(_))));
        let dangling = [Selection::Sentence { candidate_id: "g".into(), sentence_id: "p9s9".into() }];
        assert!(matches!(base(&dangling, &[c.clone()]), Err(Error::NotFound(_))));
        let blank = [Selection::TeacherText { teacher_text: "  ".into() }];
        assert!(matches!(base(&blank, &[c.clone()]), Err(Error::Domain(_))));

        let mut bad = c.clone();
        bad.verdict = ValidationVerdict::from_violations(vec![crate::validation::Violation {
            code: crate::validation::ViolationCode::TooShort,
            detail: "x".into(),
        }]);
        let sel = [Selection::Paragraph { candidate_id: "g".into(), paragraph: 0 }];
        assert!(matches!(base(&sel, &[bad.clone()]), Err(Error::State(_))));
        let ok = compose(Composition {
            instance_id: &"i".into(),
            version: 1,
            composed_by: &"t".into(),
            selections: &sel,
            candidates: &[bad],
            allow_unpassed: true,
            now: Utc::now(),
        })
        .unwrap();
        assert!(ok.override_unpassed);
    }

    #[test]
    fn selection_json_shapes() {
        let s: Selection = serde_json::from_str(r#"{"candidate_id":"c","sentence_id":"p1s1"}"#).unwrap();
        assert!(matches!(s, Selection::Sentence { .. }));
        let s: Selection = serde_json::from_str(r#"{"teacher_text":"Hi."}"#).unwrap();
        assert!(matches!(s, Selection::TeacherText { .. }));
        let s: Selection = serde_json::from_str(r#"{"candidate_id":"c","paragraph":1}"#).unwrap();
        assert!(matches!(s, Selection::Paragraph { paragraph: 1, .. }));
    }
}

//! Segmentation, composition and contribution accounting against brute force.

use aicofe_core::curation::{
    compose, edit_sentence, join_paragraphs, levenshtein, segment_text, CandidateSpec, Composition,
    FeedbackCandidate, FeedbackSource, SegmenterConfig, Selection,
};
use aicofe_core::model::{SentenceId, UserId};
use aicofe_core::text::canonical_layout;
use aicofe_core::validation::ValidationVerdict;
use chrono::Utc;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: [&str; 30] = [
    "One sentence only.",
    "First. Second! Third?",
    "Dr. Pérez praised the pace. The slides were clear.",
    "La Dra. Gil habló primero. Después habló el Sr. Ruiz.",
    "Use examples, e.g. a chart. Then conclude.",
    "Rehearse more, etc. Also sleep well.",
    "\"Great job.\" The audience agreed.",
    "He said (quietly.) Then he stopped.",
    "¿Preparaste el cierre? ¡Sí! Muy bien.",
    "Wait... What happened next? Nobody knew.",
    "Ellipsis… Then more.",
    "No terminal punctuation at the end",
    "Version 2.5 was used. It worked.",
    "Ends with a number 3. 4 follows lowercase? no split here.",
    "Strengths first.\n\nImprovements second.\n\nPlan third.",
    "  Leading and trailing spaces.  \n\n  Second paragraph.  ",
    "Tabs\tinside\ttext. Another sentence.",
    "Line\nbreak inside a paragraph. Still one paragraph.",
    "Windows\r\n\r\nline endings. Work too.",
    "p. ej. usa un mapa. Luego explica.",
    "Mr. Smith and Mrs. Jones met Ms. Lee. They talked.",
    "A vs. B was the topic. It was fun.",
    "Quote inside: 'Yes.' Then: 'No.'",
    "Bracket [note.] Then the end.",
    "«Bien hecho.» Continúa así.",
    "Multiple   spaces    here. And   here.",
    "i.e. this is fine. Good.",
    "Paragraph one.\n\n\n\nParagraph after two blank lines.",
    "Short.\n \nSpaced blank line. Works.",
    "Final paragraph ends with question?",
];

#[test]
fn corpus_round_trips_against_canonical_layout() {
    let cfg = SegmenterConfig::default();
    for text in CORPUS {
        let paragraphs = segment_text(text, &cfg).unwrap();
        assert_eq!(join_paragraphs(&paragraphs), canonical_layout(text), "{text:?}");
        assert!(paragraphs.iter().flatten().all(|s| !s.is_empty()), "{text:?}");
    }
}

#[test]
fn abbreviations_and_boundaries() {
    let cfg = SegmenterConfig::default();
    let count = |t: &str| segment_text(t, &cfg).unwrap()[0].len();
    assert_eq!(count("Dr. Pérez praised the pace. The slides were clear."), 2);
    assert_eq!(count("Mr. Smith and Mrs. Jones met Ms. Lee. They talked."), 2);
    assert_eq!(count("First. Second! Third?"), 3);
    assert_eq!(count("¿Preparaste el cierre? ¡Sí! Muy bien."), 3);
    assert_eq!(count("Version 2.5 was used. It worked."), 2);
}

proptest! {
    #[test]
    fn segmentation_is_lossless(
        words in proptest::collection::vec("[A-Za-zñé]{1,8}|Dr\\.|e\\.g\\.|[.!?]|\\n\\n|\\n| |  |\"|¿", 0..60),
    ) {
        let text = words.join(" ");
        let cfg = SegmenterConfig::default();
        match segment_text(&text, &cfg) {
            Ok(paragraphs) => prop_assert_eq!(join_paragraphs(&paragraphs), canonical_layout(&text)),
            Err(_) => prop_assert!(canonical_layout(&text).trim().is_empty()),
        }
    }
}

/// Full (n+1)×(m+1) matrix edit distance.
fn levenshtein_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=b.len() {
        d[0][j] = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

proptest! {
    #[test]
    fn levenshtein_matches_matrix_oracle(a in "[abcñé ]{0,24}", b in "[abcñé ]{0,24}") {
        prop_assert_eq!(levenshtein(&a, &b), levenshtein_oracle(&a, &b));
    }
}

const WORDS: [&str; 12] = [
    "clear", "voice", "slides", "pace", "ritmo", "claro", "público", "contacto", "structure", "ideas", "práctica", "ensayo",
];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(3..10);
    let mut words: Vec<String> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_owned()).collect();
    let mut first = words[0].chars();
    let cap: String = first.next().unwrap().to_uppercase().chain(first).collect();
    words[0] = cap;
    format!("{}.", words.join(" "))
}

fn candidate(rng: &mut ChaCha8Rng, id: &str, source: FeedbackSource) -> FeedbackCandidate {
    let text = (0..3)
        .map(|_| (0..rng.gen_range(1..4)).map(|_| sentence(rng)).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n\n");
    FeedbackCandidate::segment(
        &text,
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

/// Recounts characters per source from scratch using the matrix oracle.
fn brute_force(
    sentences: &[(FeedbackSource, String, Option<String>)],
) -> (std::collections::BTreeMap<FeedbackSource, f64>, f64) {
    let mut per = std::collections::BTreeMap::new();
    for s in FeedbackSource::ALL {
        per.insert(s, 0.0f64);
    }
    let mut total = 0usize;
    let mut llm_len = 0usize;
    let mut weighted = 0.0;
    for (source, text, origin) in sentences {
        let chars: Vec<char> = text.chars().collect();
        total += chars.len();
        if *source == FeedbackSource::Teacher {
            *per.get_mut(source).unwrap() += chars.len() as f64;
            continue;
        }
        let d = match origin {
            Some(o) => {
                let longest = o.chars().count().max(chars.len());
                levenshtein_oracle(o, text) as f64 / longest as f64
            }
            None => 0.0,
        };
        *per.get_mut(source).unwrap() += (1.0 - d) * chars.len() as f64;
        *per.get_mut(&FeedbackSource::Teacher).unwrap() += d * chars.len() as f64;
        llm_len += chars.len();
        weighted += d * chars.len() as f64;
    }
    for v in per.values_mut() {
        *v /= total as f64;
    }
    (per, if llm_len == 0 { 0.0 } else { weighted / llm_len as f64 })
}

#[test]
fn random_compositions_match_character_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let teacher = UserId::new("t");
    for round in 0..200 {
        let candidates = vec![
            candidate(&mut rng, "c-gpt", FeedbackSource::Gpt),
            candidate(&mut rng, "c-gemini", FeedbackSource::Gemini),
            candidate(&mut rng, "c-llama", FeedbackSource::Llama),
        ];
        let mut selections = Vec::new();
        for _ in 0..rng.gen_range(1..8) {
            match rng.gen_range(0..5) {
                0 => selections.push(Selection::TeacherText { teacher_text: sentence(&mut rng) }),
                1 => {
                    let c = &candidates[rng.gen_range(0..3)];
                    selections.push(Selection::Paragraph { candidate_id: c.id.clone(), paragraph: rng.gen_range(0..3) });
                }
                _ => {
                    let c = &candidates[rng.gen_range(0..3)];
                    let all: Vec<_> = c.sentences().collect();
                    let s = all[rng.gen_range(0..all.len())];
                    selections.push(Selection::Sentence { candidate_id: c.id.clone(), sentence_id: s.id.clone() });
                }
            }
        }
        let mut draft = compose(Composition {
            instance_id: &"i".into(),
            version: 1,
            composed_by: &teacher,
            selections: &selections,
            candidates: &candidates,
            allow_unpassed: false,
            now: Utc::now(),
        })
        .unwrap();

        let mut origins: Vec<Option<String>> = vec![None; draft.sentences.len()];
        for e in 0..rng.gen_range(0..4) {
            let idx = rng.gen_range(0..draft.sentences.len());
            let s = draft.sentences[idx].clone();
            let new_text = if rng.gen_bool(0.2) && origins[idx].is_some() {
                origins[idx].clone().unwrap()
            } else {
                format!("{} {}", s.text, WORDS[rng.gen_range(0..WORDS.len())])
            };
            if s.source.is_llm() && origins[idx].is_none() {
                origins[idx] = Some(s.text.clone());
            }
            draft = edit_sentence(&draft, &SentenceId::new(format!("s{}", idx + 1)), &new_text, e + 2, &teacher, Utc::now())
                .unwrap();
        }

        let rows: Vec<_> = draft
            .sentences
            .iter()
            .zip(&origins)
            .map(|(s, o)| (s.source, s.text.clone(), o.clone()))
            .collect();
        let (expected, extent) = brute_force(&rows);
        let got = &draft.breakdown;
        for s in FeedbackSource::ALL {
            assert!((got.proportions[&s] - expected[&s]).abs() < 1e-9, "round {round} {s:?}");
        }
        assert!((got.teacher_modification_extent - extent).abs() < 1e-9, "round {round}");
        let sum: f64 = got.proportions.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        draft.verify().unwrap();
    }
}

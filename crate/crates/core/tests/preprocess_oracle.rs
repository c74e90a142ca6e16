//! Normalization, relevance and anonymization against independent oracles.

use std::collections::BTreeSet;

use aicofe_core::model::RubricItem;
use aicofe_core::preprocess::{
    anonymize, deanonymize, normalize_comment, screen_relevance, RedactionMap, Roster,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Units the noisy generator emits: raw text and what survives normalization.
enum Unit {
    Keep(&'static str, &'static str),
    Drop(&'static str),
    Space(&'static str),
}

const UNITS: &[Unit] = &[
    Unit::Keep("a", "a"),
    Unit::Keep("B", "B"),
    Unit::Keep("ñ", "ñ"),
    Unit::Keep("e\u{301}", "é"),
    Unit::Keep("o\u{308}", "ö"),
    Unit::Keep("¿", "¿"),
    Unit::Keep("!", "!"),
    Unit::Keep("7", "7"),
    Unit::Keep("€", "€"),
    Unit::Keep("Ж", "Ж"),
    Unit::Keep("字", "字"),
    Unit::Keep("😀", "😀"),
    Unit::Drop("\u{0000}"),
    Unit::Drop("\u{0007}"),
    Unit::Drop("\u{007F}"),
    Unit::Drop("\u{0086}"),
    Unit::Space("\u{0085}"),
    Unit::Drop("\u{200B}"),
    Unit::Drop("\u{200D}"),
    Unit::Drop("\u{FEFF}"),
    Unit::Drop("\u{202E}"),
    Unit::Drop("\u{0378}"),
    Unit::Drop("\u{FFFF}"),
    Unit::Drop("\u{FFFD}"),
    Unit::Space(" "),
    Unit::Space("\t"),
    Unit::Space("\n"),
    Unit::Space("\r\n"),
    Unit::Space("\u{00A0}"),
    Unit::Space("\u{3000}"),
];

fn noisy(rng: &mut ChaCha8Rng) -> (String, String) {
    let mut raw = String::new();
    let mut kept = String::new();
    for _ in 0..rng.gen_range(0..60) {
        match &UNITS[rng.gen_range(0..UNITS.len())] {
            Unit::Keep(r, k) => {
                raw.push_str(r);
                kept.push_str(k);
            }
            Unit::Drop(r) => raw.push_str(r),
            Unit::Space(r) => {
                raw.push_str(r);
                kept.push(' ');
            }
        }
    }
    let expected = kept.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ");
    (raw, expected)
}

#[test]
fn fifty_noisy_comments_match_character_class_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 0..50 {
        let (raw, expected) = noisy(&mut rng);
        assert_eq!(normalize_comment(&raw), expected, "comment {n}: {raw:?}");
    }
}

proptest! {
    #[test]
    fn normalization_is_idempotent(s in any::<String>()) {
        let once = normalize_comment(&s);
        prop_assert_eq!(normalize_comment(&once), once);
    }
}

/// Lowercase, strip combining marks, split on anything that is not alphanumeric.
fn oracle_words(s: &str) -> Vec<String> {
    let folded: String = s.nfd().filter(|c| !is_combining_mark(*c)).collect::<String>().to_lowercase();
    folded
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

fn oracle_term_hits(comment: &str, term: &str) -> bool {
    let words = oracle_words(comment);
    let parts = oracle_words(term);
    if parts.is_empty() {
        return false;
    }
    for start in 0..words.len() {
        if start + parts.len() > words.len() {
            break;
        }
        let mut all = true;
        for (k, p) in parts.iter().enumerate() {
            if !words[start + k].starts_with(p.as_str()) {
                all = false;
            }
        }
        if all {
            return true;
        }
    }
    false
}

const TERM_LISTS: [&[&str]; 5] = [
    &["ritmo", "pausa", "velocidad"],
    &["eye contact", "mirada", "audience"],
    &["diapositiva", "slide", "visual aid"],
    &["voz", "volume", "tono de voz"],
    &["estructura", "conclusión", "introduction"],
];

const COMMENTS: [&str; 30] = [
    "El ritmo fue adecuado durante toda la presentación.",
    "Demasiadas pausas largas al inicio.",
    "Good eye contact with the audience.",
    "Mantuvo la MIRADA en el público.",
    "The slides were crowded with text.",
    "Las diapositivas tenían mucho texto.",
    "Visual aids helped a lot.",
    "La voz era clara y fuerte.",
    "Volume dropped near the end.",
    "El tono de voz fue monótono.",
    "La estructura fue clara.",
    "La conclusion fue abrupta.",
    "The introduction set up the topic well.",
    "Nice job overall!",
    "Me gustó mucho.",
    "Velocidad excesiva en la segunda parte.",
    "Looked at the audience rarely; eye   contact was missing.",
    "Eye-contact improved over time.",
    "Slideshow transitions were smooth.",
    "La VOZ temblaba un poco.",
    "",
    "Sin comentarios.",
    "The visual was nice but no aid explained it.",
    "Tono alto, voz baja.",
    "Estructuración lógica del contenido.",
    "Conclusiones claras y breves.",
    "Introductory remarks were too long.",
    "ritmo, pausa y velocidad correctas",
    "Éxito total con la audiencia.",
    "Eye strain from tiny fonts; no contact with the room.",
];

#[test]
fn relevance_agrees_with_pair_scan_on_every_pair() {
    let mut disagreements = Vec::new();
    for (li, list) in TERM_LISTS.iter().enumerate() {
        let item = RubricItem {
            id: format!("item{li}").into(),
            title: "t".into(),
            level_descriptions: Default::default(),
            relevance_terms: list.iter().map(|t| t.to_string()).collect(),
        };
        for (ci, comment) in COMMENTS.iter().enumerate() {
            let expected: BTreeSet<String> =
                list.iter().filter(|t| oracle_term_hits(comment, t)).map(|t| t.to_string()).collect();
            let got = screen_relevance(comment, &item);
            if got.matched_terms != expected || got.relevant != !expected.is_empty() {
                disagreements.push((li, ci));
            }
        }
    }
    assert!(disagreements.is_empty(), "{disagreements:?}");
}

const ROSTER: [&str; 6] = ["Ana García", "José Núñez", "Lucía Pérez", "Mateo Ruiz", "Sofía Álvarez", "Tomás Ibáñez"];

fn residuals_oracle(text: &str) -> Vec<String> {
    let names: BTreeSet<String> = ROSTER
        .iter()
        .flat_map(|n| oracle_words(n))
        .filter(|w| w.chars().count() >= 3)
        .collect();
    let mut found: Vec<String> = oracle_words(text).into_iter().filter(|w| names.contains(w)).collect();
    found.extend(
        text.split_whitespace()
            .filter(|w| w.contains('@') && w.contains('.'))
            .map(str::to_owned),
    );
    found
}

const NAMED_COMMENTS: [&str; 20] = [
    "Ana García spoke clearly.",
    "ana kept eye contact.",
    "JOSÉ was nervous at first.",
    "Jose Nunez handled questions well.",
    "Lucia's slides were neat.",
    "Me gustó cómo habló LUCÍA PÉREZ.",
    "Mateo, Sofía y Tomás colaboraron.",
    "Write to mateo.ruiz@uni.example for the notes.",
    "Sofia Alvarez and Ana Garcia argued well.",
    "Tomás Ibáñez could slow down.",
    "ibañez forgot the conclusion.",
    "Great talk by ruiz!",
    "Pérez mantuvo la mirada.",
    "garcía.",
    "(Núñez) was funny.",
    "No names here at all.",
    "Álvarez y Álvarez.",
    "La voz de Sofía era clara; José la apoyó.",
    "Contacto: ana.garcia@escuela.edu",
    "Mateo Ruiz, Lucía Pérez, José Núñez.",
];

#[test]
fn anonymized_comments_have_no_residuals_and_restore() {
    let roster = Roster::from_names(&ROSTER);
    let mut map = RedactionMap::new("i".into());
    for c in NAMED_COMMENTS {
        let anon = anonymize(c, &roster, &mut map);
        assert!(residuals_oracle(&anon).is_empty(), "{c:?} -> {anon:?}");
        let back = deanonymize(&anon, &map);
        assert!(back.warnings.is_empty());
        assert_eq!(back.text, c);
    }
    map.check().unwrap();
}

proptest! {
    #[test]
    fn anonymize_round_trips(
        parts in proptest::collection::vec(
            prop_oneof![
                proptest::sample::select(ROSTER.to_vec()).prop_map(str::to_owned),
                proptest::sample::select(vec!["ana", "JOSÉ", "perez", "Ibañez"]).prop_map(str::to_owned),
                "[a-z]{1,8}",
                proptest::sample::select(vec![", ", ". ", " ", "! "]).prop_map(str::to_owned),
            ],
            0..20,
        )
    ) {
        let text = parts.join(" ");
        let roster = Roster::from_names(&ROSTER);
        let mut map = RedactionMap::new("i".into());
        let anon = anonymize(&text, &roster, &mut map);
        prop_assert!(residuals_oracle(&anon).is_empty(), "{:?}", anon);
        prop_assert_eq!(&deanonymize(&anon, &map).text, &text);
        let before = map.clone();
        let again = anonymize(&text, &roster, &mut map);
        prop_assert_eq!(again, anon);
        prop_assert_eq!(map, before);
    }
}

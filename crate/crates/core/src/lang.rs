//! Character-trigram language identification for the supported languages.
//!
//! Each language has a profile built from a small embedded reference text.
//! A text is scored by its smoothed log-likelihood under every profile; the
//! best profile wins unless the text is too short or the margin is too thin,
//! in which case the result is unknown.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::model::Language;
use crate::text::fold;

const REFERENCE_ES: &str = "\
La presentación fue clara y bien estructurada. El estudiante mantuvo el contacto visual con el \
público durante la mayor parte de la exposición y habló con un ritmo adecuado. Las diapositivas \
eran legibles, aunque algunas contenían demasiado texto. Se recomienda practicar la introducción \
para captar la atención desde el principio. En cuanto al contenido, los argumentos estaban bien \
fundamentados y se apoyaban en ejemplos concretos. Sin embargo, la conclusión fue breve y no \
resumía las ideas principales. Para la próxima presentación, conviene preparar una síntesis final \
y dedicar más tiempo a las preguntas del público. También sería útil reducir las muletillas y \
variar el tono de voz para mantener el interés. Los compañeros valoraron positivamente la \
seguridad mostrada y la organización del discurso. El plan de acción consiste en ensayar con un \
cronómetro, revisar cada diapositiva para que tenga una sola idea y pedir opiniones a otras \
personas antes de la entrega. Es importante que el lenguaje corporal acompañe al mensaje y que \
los gestos sean naturales. La calidad de las fuentes citadas fue buena y la información estaba \
actualizada. Se observa una mejora respecto a la sesión anterior, especialmente en la gestión \
del tiempo. Como puntos fuertes destacan la claridad, la preparación y el dominio del tema. Como \
aspectos de mejora se señalan la conclusión, el volumen de la voz y la cantidad de texto en las \
diapositivas. Te animamos a seguir trabajando en estos aspectos porque el progreso es evidente.";

const REFERENCE_EN: &str = "\
The presentation was clear and well structured. The student kept eye contact with the audience \
for most of the talk and spoke at a suitable pace. The slides were readable, although some of \
them contained too much text. It is worth practising the introduction in order to capture \
attention from the start. Regarding the content, the arguments were well supported and relied \
on concrete examples. However, the conclusion was short and did not summarise the main ideas. \
For the next presentation, you should prepare a final summary and leave more time for questions \
from the audience. It would also help to reduce filler words and vary the tone of voice to keep \
people interested. Classmates appreciated the confidence shown and the organisation of the \
speech. The action plan is to rehearse with a timer, review each slide so that it holds a single \
idea and ask other people for their opinion before the delivery. It is important that body \
language supports the message and that gestures feel natural. The quality of the cited sources \
was good and the information was up to date. There is a clear improvement with respect to the \
previous session, especially in time management. The main strengths are clarity, preparation \
and command of the topic. The areas for improvement are the conclusion, the volume of the voice \
and the amount of text on the slides. We encourage you to keep working on these points because \
the progress is evident.";

/// Fewer trigrams than this and the result is unknown.
const MIN_TRIGRAMS: usize = 12;
/// Minimum mean log-likelihood gap per trigram between best and runner-up.
const MIN_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detected {
    Language(Language),
    Unknown,
}

struct Profile {
    language: Language,
    counts: HashMap<[char; 3], u32>,
    total: u32,
}

fn profiles() -> &'static [Profile] {
    static P: OnceLock<Vec<Profile>> = OnceLock::new();
    P.get_or_init(|| {
        [(Language::Es, REFERENCE_ES), (Language::En, REFERENCE_EN)]
            .into_iter()
            .map(|(language, text)| {
                let mut counts = HashMap::new();
                let mut total = 0;
                for t in trigrams(text) {
                    *counts.entry(t).or_insert(0) += 1;
                    total += 1;
                }
                Profile {
                    language,
                    counts,
                    total,
                }
            })
            .collect()
    })
}

/// Trigrams over folded letters, each word padded with one space on either side.
fn trigrams(text: &str) -> Vec<[char; 3]> {
    let folded = fold(text);
    let mut out = Vec::new();
    for word in folded.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let chars: Vec<char> = std::iter::once(' ')
            .chain(word.chars())
            .chain(std::iter::once(' '))
            .collect();
        out.extend(chars.windows(3).map(|w| [w[0], w[1], w[2]]));
    }
    out
}

pub fn detect(text: &str) -> Detected {
    let grams = trigrams(text);
    if grams.len() < MIN_TRIGRAMS {
        return Detected::Unknown;
    }
    // Vocabulary size bound for add-one smoothing.
    let vocab = 27f64.powi(3);
    let mut scores: Vec<(Language, f64)> = profiles()
        .iter()
        .map(|p| {
            let denom = f64::from(p.total) + vocab;
            let ll: f64 = grams
                .iter()
                .map(|g| ((f64::from(*p.counts.get(g).unwrap_or(&0)) + 1.0) / denom).ln())
                .sum();
            (p.language, ll / grams.len() as f64)
        })
        .collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1));
    if scores[0].1 - scores[1].1 < MIN_MARGIN {
        Detected::Unknown
    } else {
        Detected::Language(scores[0].0)
    }
}

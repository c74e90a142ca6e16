//! Offline providers for tests, demos and the default configuration.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use aicofe_core::model::Language;
use async_trait::async_trait;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::descriptor::{Endpoint, ProviderDescriptor};
use crate::error::ProviderError;
use crate::provider::{prompt_digest, Provider};

#[derive(Debug, Clone)]
pub enum ScriptStep {
    Text(String),
    Fail(ProviderError),
    /// Never answers; the caller's timeout fires.
    Hang,
}

#[derive(Debug, Clone)]
pub enum MockBehavior {
    /// Always the same text.
    Canned(String),
    /// Deterministic three-paragraph feedback built from the prompt's score lines.
    Template { seed: u64 },
    /// Steps in order; the last step repeats once the script runs out.
    Scripted(Vec<ScriptStep>),
}

pub struct MockProvider {
    descriptor: ProviderDescriptor,
    behavior: MockBehavior,
    latency: Duration,
    calls: AtomicU32,
    cursor: Mutex<usize>,
}

impl MockProvider {
    pub fn new(descriptor: ProviderDescriptor, behavior: MockBehavior) -> Self {
        let latency = match descriptor.endpoint {
            Endpoint::Mock { latency_ms, .. } => Duration::from_millis(latency_ms),
            _ => Duration::ZERO,
        };
        Self {
            descriptor,
            behavior,
            latency,
            calls: AtomicU32::new(0),
            cursor: Mutex::new(0),
        }
    }

    /// Template behavior seeded from a `mock` endpoint descriptor.
    pub fn from_descriptor(descriptor: ProviderDescriptor) -> Self {
        let seed = match descriptor.endpoint {
            Endpoint::Mock { seed, .. } => seed,
            _ => 0,
        };
        Self::new(descriptor, MockBehavior::Template { seed })
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    /// Number of `complete` calls received so far.
    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }

    fn next_step(&self, steps: &[ScriptStep]) -> ScriptStep {
        let mut cursor = self.cursor.lock().expect("mock cursor poisoned");
        let step = steps
            .get(*cursor)
            .or_else(|| steps.last())
            .cloned()
            .unwrap_or_else(|| ScriptStep::Fail(ProviderError::Other("empty script".into())));
        *cursor += 1;
        step
    }
}

#[async_trait]
impl Provider for MockProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    async fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let step = match &self.behavior {
            MockBehavior::Canned(t) => ScriptStep::Text(t.clone()),
            MockBehavior::Template { seed } => ScriptStep::Text(template_feedback(prompt, *seed)),
            MockBehavior::Scripted(steps) => self.next_step(steps),
        };
        if !self.latency.is_zero() {
            tokio::time::sleep(self.latency).await;
        }
        match step {
            ScriptStep::Text(t) => Ok(t),
            ScriptStep::Fail(e) => Err(e),
            ScriptStep::Hang => std::future::pending().await,
        }
    }
}

struct ScoreLine {
    title: String,
    mean: f64,
}

fn parse_scores(prompt: &str) -> (Vec<ScoreLine>, f64) {
    let mut midpoint = 3.0;
    let mut out = Vec::new();
    for line in prompt.lines() {
        if let Some((_, range)) = line.rsplit_once(" (") {
            if let Some((lo, hi)) = range.trim_end_matches("):").split_once('–') {
                if let (Ok(lo), Ok(hi)) = (lo.parse::<f64>(), hi.parse::<f64>()) {
                    midpoint = (lo + hi) / 2.0;
                }
            }
        }
        let Some(rest) = line.strip_prefix("- ") else { continue };
        let Some((title, tail)) = rest.rsplit_once(": ") else { continue };
        let Some((mean, _)) = tail.split_once(" (n=") else { continue };
        if let Ok(mean) = mean.parse::<f64>() {
            out.push(ScoreLine {
                title: title.to_owned(),
                mean,
            });
        }
    }
    (out, midpoint)
}

fn prompt_language(prompt: &str) -> Language {
    if prompt.contains("Redacta el feedback en español") {
        Language::Es
    } else {
        Language::En
    }
}

struct Lexicon {
    strengths_open: &'static [&'static str],
    strength: &'static str,
    strengths_close: &'static str,
    improve_open: &'static [&'static str],
    improve: &'static str,
    improve_close: &'static str,
    plan_open: &'static [&'static str],
    plan: &'static str,
    plan_close: &'static str,
    fallback: &'static str,
}

const EN: Lexicon = Lexicon {
    strengths_open: &[
        "Overall, the presentation showed a solid command of the topic and a clear intention to engage the audience.",
        "The presentation was well prepared and the evaluators recognised several positive aspects of the delivery.",
    ],
    strength: "The aspect of {item} stood out, with an average of {mean}, which shows that this part of the performance was convincing and consistent throughout the talk.",
    strengths_close: "These strengths form a good base on which to keep building during the next sessions.",
    improve_open: &[
        "There are still some areas where the presentation can improve in a noticeable way.",
        "Some aspects of the delivery deserve more attention in the coming weeks.",
    ],
    improve: "The item {item} received an average of {mean}, so it would help to review how this part is prepared and to pay closer attention to it while speaking.",
    improve_close: "Working on these points will make the message easier to follow for the whole audience.",
    plan_open: &[
        "For the next presentation, it is a good idea to follow a short and concrete plan.",
        "As an action plan, try to prepare the next presentation with a few specific steps in mind.",
    ],
    plan: "First, rehearse the talk aloud at least twice with a timer and focus on {item}. Then ask a classmate to watch one rehearsal and note the moments where the delivery loses strength.",
    plan_close: "Finally, review the rubric descriptions before speaking and compare the result with this feedback afterwards.",
    fallback: "the overall delivery",
};

const ES: Lexicon = Lexicon {
    strengths_open: &[
        "En general, la presentación mostró un buen dominio del tema y una clara intención de conectar con el público.",
        "La presentación estuvo bien preparada y los evaluadores reconocieron varios aspectos positivos de la exposición.",
    ],
    strength: "El aspecto de {item} destacó, con una media de {mean}, lo que indica que esta parte de la exposición resultó convincente y constante durante toda la charla.",
    strengths_close: "Estas fortalezas son una buena base sobre la que seguir construyendo en las próximas sesiones.",
    improve_open: &[
        "Todavía hay algunas áreas en las que la presentación puede mejorar de forma notable.",
        "Algunos aspectos de la exposición merecen más atención en las próximas semanas.",
    ],
    improve: "El ítem {item} obtuvo una media de {mean}, por lo que convendría revisar cómo se prepara esta parte y prestarle más atención mientras se habla.",
    improve_close: "Trabajar estos puntos hará que el mensaje sea más fácil de seguir para todo el público.",
    plan_open: &[
        "Para la próxima presentación, conviene seguir un plan breve y concreto.",
        "Como plan de acción, intenta preparar la próxima presentación con unos pasos específicos en mente.",
    ],
    plan: "Primero, ensaya la charla en voz alta al menos dos veces con un cronómetro y céntrate en {item}. Después pide a un compañero que observe un ensayo y anote los momentos en los que la exposición pierde fuerza.",
    plan_close: "Por último, repasa las descripciones de la rúbrica antes de hablar y compara después el resultado con este feedback.",
    fallback: "la exposición en general",
};

fn fill(template: &str, item: &str, mean: f64) -> String {
    template.replace("{item}", item).replace("{mean}", &format!("{mean:.1}"))
}

/// Three valid paragraphs (strengths, improvements, plan) derived from the
/// prompt's score lines. Same prompt and seed, same text.
pub fn template_feedback(prompt: &str, seed: u64) -> String {
    let lex = match prompt_language(prompt) {
        Language::En => &EN,
        Language::Es => &ES,
    };
    let digest = prompt_digest(prompt);
    let mix = u64::from_str_radix(&digest[..16], 16).unwrap_or(0) ^ seed;
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    let (mut scores, midpoint) = parse_scores(prompt);
    scores.sort_by(|a, b| b.mean.total_cmp(&a.mean));

    let strong: Vec<_> = scores.iter().filter(|s| s.mean >= midpoint).take(2).collect();
    let mut weak: Vec<_> = scores.iter().rev().filter(|s| s.mean < midpoint).take(2).collect();
    if weak.is_empty() {
        weak.extend(scores.last());
    }

    let mut p1 = vec![lex.strengths_open.choose(&mut rng).copied().unwrap_or_default().to_owned()];
    if strong.is_empty() {
        p1.push(fill(lex.strength, lex.fallback, midpoint));
    }
    p1.extend(strong.iter().map(|s| fill(lex.strength, &s.title, s.mean)));
    p1.push(lex.strengths_close.to_owned());

    let mut p2 = vec![lex.improve_open.choose(&mut rng).copied().unwrap_or_default().to_owned()];
    if weak.is_empty() {
        p2.push(fill(lex.improve, lex.fallback, midpoint));
    }
    p2.extend(weak.iter().map(|s| fill(lex.improve, &s.title, s.mean)));
    p2.push(lex.improve_close.to_owned());

    let focus = weak.first().map_or(lex.fallback, |s| s.title.as_str());
    let p3 = [
        lex.plan_open.choose(&mut rng).copied().unwrap_or_default().to_owned(),
        lex.plan.replace("{item}", focus),
        lex.plan_close.to_owned(),
    ];

    [p1.join(" "), p2.join(" "), p3.join(" ")].join("\n\n")
}

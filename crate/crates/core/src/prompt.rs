//! Structured prompt assembly from course templates.
//!
//! A [`PromptTemplate`] is an ordered list of segments. Literal segments are
//! copied verbatim; block segments are rendered from the instance data. The
//! whole rendered prompt passes through the anonymizer before it leaves this
//! module, so the bundle never carries roster identities.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::Aggregate;
use crate::error::{Error, Result};
use crate::model::{
    CourseId, EvaluationInstance, EvaluatorKind, InstanceId, ItemId, Language, Material, MaterialId,
    Rubric, TemplateId,
};
use crate::preprocess::{anonymize, find_residuals, RedactionMap, Roster};

pub const DEFAULT_TOKEN_BUDGET: usize = 8_000;
pub const CHARS_PER_TOKEN: usize = 4;
pub const DEFAULT_EXCERPT_CAP: usize = 1_500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Literal,
    ScoresBlock,
    CommentsBlock,
    RubricLevelsBlock,
    MaterialsBlock,
    OutputSchemaBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal_text: Option<String>,
}

impl Segment {
    pub fn literal(text: impl Into<String>) -> Self {
        Self {
            kind: SegmentKind::Literal,
            literal_text: Some(text.into()),
        }
    }

    pub fn block(kind: SegmentKind) -> Self {
        Self {
            kind,
            literal_text: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub course_id: CourseId,
    pub language: Language,
    pub segments: Vec<Segment>,
}

impl PromptTemplate {
    /// Problems that make the template unusable; empty when it is valid.
    pub fn lint(&self) -> Vec<String> {
        let count = |k: SegmentKind| self.segments.iter().filter(|s| s.kind == k).count();
        let mut issues = Vec::new();
        match count(SegmentKind::OutputSchemaBlock) {
            1 => {}
            n => issues.push(format!("expected exactly one output_schema_block, found {n}")),
        }
        if count(SegmentKind::ScoresBlock) == 0 {
            issues.push("missing scores_block".to_owned());
        }
        if count(SegmentKind::CommentsBlock) == 0 {
            issues.push("missing comments_block".to_owned());
        }
        for (i, s) in self.segments.iter().enumerate() {
            match (s.kind, &s.literal_text) {
                (SegmentKind::Literal, None) => issues.push(format!("segment {i}: literal without text")),
                (SegmentKind::Literal, _) => {}
                (_, Some(_)) => issues.push(format!("segment {i}: block segments take no literal_text")),
                _ => {}
            }
        }
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.lint();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!("template {}: {}", self.id, issues.join("; "))))
        }
    }

    /// A ready-to-use template for a course in the given language.
    pub fn standard(id: impl Into<TemplateId>, course_id: CourseId, language: Language) -> Self {
        let intro = match language {
            Language::En => {
                "You are assisting a teacher in writing feedback for a student's oral presentation. \
                 Base the feedback only on the assessment data below."
            }
            Language::Es => {
                "Ayudas a un docente a redactar feedback sobre la presentación oral de un estudiante. \
                 Basa el feedback únicamente en los datos de evaluación siguientes."
            }
        };
        Self {
            id: id.into(),
            course_id,
            language,
            segments: vec![
                Segment::literal(intro),
                Segment::block(SegmentKind::ScoresBlock),
                Segment::block(SegmentKind::CommentsBlock),
                Segment::block(SegmentKind::RubricLevelsBlock),
                Segment::block(SegmentKind::MaterialsBlock),
                Segment::block(SegmentKind::OutputSchemaBlock),
            ],
        }
    }
}

/// One relevant, already anonymized comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptComment {
    pub comment_id: String,
    pub item_id: ItemId,
    pub evaluator_kind: EvaluatorKind,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthLimits {
    pub min_words: usize,
    pub max_words: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBudget {
    pub max_tokens: usize,
    pub excerpt_cap_chars: usize,
}

impl Default for PromptBudget {
    fn default() -> Self {
        Self {
            max_tokens: DEFAULT_TOKEN_BUDGET,
            excerpt_cap_chars: DEFAULT_EXCERPT_CAP,
        }
    }
}

impl PromptBudget {
    pub fn max_chars(&self) -> usize {
        self.max_tokens * CHARS_PER_TOKEN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationReason {
    ExcerptCap,
    TokenBudget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialTruncation {
    pub material_id: MaterialId,
    pub original_chars: usize,
    pub kept_chars: usize,
    pub reason: TruncationReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub instance_id: InstanceId,
    pub rendered_text: String,
    pub template_id: TemplateId,
    pub inputs_digest: String,
    pub redaction_map_id: String,
    #[serde(default)]
    pub truncations: Vec<MaterialTruncation>,
}

impl PromptBundle {
    /// SHA-256 of the rendered text.
    pub fn text_digest(&self) -> String {
        hex::encode(Sha256::digest(self.rendered_text.as_bytes()))
    }
}

pub struct PromptRequest<'a> {
    pub instance: &'a EvaluationInstance,
    pub rubric: &'a Rubric,
    pub aggregate: &'a Aggregate,
    pub comments: &'a [PromptComment],
    pub materials: &'a [Material],
    pub template: &'a PromptTemplate,
    pub limits: LengthLimits,
    pub budget: PromptBudget,
    pub roster: &'a Roster,
}

struct Phrases {
    scores_header: &'static str,
    no_scores: &'static str,
    comments_header: &'static str,
    no_comments: &'static str,
    levels_header: &'static str,
    materials_header: &'static str,
    no_materials: &'static str,
    peer: &'static str,
    teacher: &'static str,
}

fn phrases(lang: Language) -> Phrases {
    match lang {
        Language::En => Phrases {
            scores_header: "Average scores per rubric item",
            no_scores: "no scores",
            comments_header: "Qualitative observations from evaluators",
            no_comments: "No qualitative observations were provided for this presentation.",
            levels_header: "Rubric level descriptions",
            materials_header: "Instructional materials",
            no_materials: "No instructional materials are attached to this course.",
            peer: "a peer",
            teacher: "a teacher",
        },
        Language::Es => Phrases {
            scores_header: "Puntuación media por ítem de la rúbrica",
            no_scores: "sin puntuaciones",
            comments_header: "Observaciones cualitativas de los evaluadores",
            no_comments: "No se aportaron observaciones cualitativas para esta presentación.",
            levels_header: "Descripción de los niveles de la rúbrica",
            materials_header: "Materiales didácticos",
            no_materials: "Este curso no tiene materiales didácticos asociados.",
            peer: "un compañero",
            teacher: "un docente",
        },
    }
}

fn output_schema(lang: Language, limits: LengthLimits) -> String {
    match lang {
        Language::En => format!(
            "Write the feedback in English as exactly three paragraphs separated by one blank line, \
             with no headings or lists:\n\
             1. Strengths: the aspects the student performed well.\n\
             2. Areas for improvement: specific weaknesses to work on.\n\
             3. Action plan: concrete recommendations for the next presentation.\n\
             Use between {} and {} words in total. End every paragraph with a complete sentence. \
             Do not mention evaluators or any personal names; refer to people only by the \
             placeholders already present in the data.",
            limits.min_words, limits.max_words
        ),
        Language::Es => format!(
            "Redacta el feedback en español en exactamente tres párrafos separados por una línea \
             en blanco, sin títulos ni listas:\n\
             1. Fortalezas: los aspectos que el estudiante realizó bien.\n\
             2. Áreas de mejora: debilidades concretas en las que trabajar.\n\
             3. Plan de acción: recomendaciones concretas para la próxima presentación.\n\
             Usa entre {} y {} palabras en total. Termina cada párrafo con una oración completa. \
             No menciones a los evaluadores ni ningún nombre propio; refiérete a las personas solo \
             mediante los marcadores ya presentes en los datos.",
            limits.min_words, limits.max_words
        ),
    }
}

struct Excerpt<'a> {
    material: &'a Material,
    text: String,
}

fn render(req: &PromptRequest<'_>, excerpts: &[Excerpt<'_>]) -> String {
    let lang = req.template.language;
    let p = phrases(lang);
    let mut parts: Vec<String> = Vec::with_capacity(req.template.segments.len());
    for seg in &req.template.segments {
        let rendered = match seg.kind {
            SegmentKind::Literal => seg.literal_text.clone().unwrap_or_default(),
            SegmentKind::ScoresBlock => {
                let mut s = format!(
                    "{} ({}–{}):",
                    p.scores_header, req.rubric.scale_min, req.rubric.scale_max
                );
                for item in &req.rubric.items {
                    let agg = req.aggregate.items.get(&item.id);
                    let count = agg.map_or(0, |a| a.count);
                    let mean = agg
                        .and_then(|a| a.display_mean())
                        .unwrap_or_else(|| p.no_scores.to_owned());
                    s.push_str(&format!("\n- {}: {} (n={})", item.title, mean, count));
                }
                s
            }
            SegmentKind::CommentsBlock => {
                let mut s = format!("{}:", p.comments_header);
                if req.comments.is_empty() {
                    s.push('\n');
                    s.push_str(p.no_comments);
                } else {
                    for item in &req.rubric.items {
                        let mine: Vec<_> = req.comments.iter().filter(|c| c.item_id == item.id).collect();
                        if mine.is_empty() {
                            continue;
                        }
                        s.push_str(&format!("\n{}:", item.title));
                        for c in mine {
                            let who = match c.evaluator_kind {
                                EvaluatorKind::Teacher => p.teacher,
                                _ => p.peer,
                            };
                            s.push_str(&format!("\n- {}: \"{}\"", who, c.text));
                        }
                    }
                }
                s
            }
            SegmentKind::RubricLevelsBlock => {
                let mut s = format!("{}:", p.levels_header);
                for item in &req.rubric.items {
                    s.push_str(&format!("\n{}:", item.title));
                    for (level, desc) in &item.level_descriptions {
                        s.push_str(&format!("\n  {level}: {desc}"));
                    }
                }
                s
            }
            SegmentKind::MaterialsBlock => {
                let mut s = format!("{}:", p.materials_header);
                let shown: Vec<_> = excerpts.iter().filter(|e| !e.text.is_empty()).collect();
                if shown.is_empty() {
                    s.push('\n');
                    s.push_str(p.no_materials);
                }
                for e in shown {
                    s.push_str(&format!("\n### {}\n{}", e.material.title, e.text));
                }
                s
            }
            SegmentKind::OutputSchemaBlock => output_schema(lang, req.limits),
        };
        parts.push(rendered);
    }
    parts.join("\n\n")
}

fn take_chars(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn inputs_digest(req: &PromptRequest<'_>) -> String {
    let scores: Vec<_> = req
        .rubric
        .items
        .iter()
        .map(|i| {
            let agg = req.aggregate.items.get(&i.id);
            serde_json::json!([i.id, agg.and_then(|a| a.mean), agg.map_or(0, |a| a.count)])
        })
        .collect();
    let mut comment_ids: Vec<&str> = req.comments.iter().map(|c| c.comment_id.as_str()).collect();
    comment_ids.sort_unstable();
    let material_refs: Vec<&MaterialId> = req.materials.iter().map(|m| &m.id).collect();
    let canonical = serde_json::json!({
        "scores": scores,
        "comment_ids": comment_ids,
        "rubric": { "id": req.rubric.id, "revision": req.rubric.revision },
        "material_refs": material_refs,
    });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

/// Renders the prompt bundle sent identically to every provider.
pub fn build_prompt(req: &PromptRequest<'_>, map: &mut RedactionMap) -> Result<PromptBundle> {
    req.template.validate()?;
    if req.template.course_id != req.instance.course_id {
        return Err(Error::config(format!(
            "template {} belongs to course {}, instance {} to {}",
            req.template.id, req.template.course_id, req.instance.id, req.instance.course_id
        )));
    }
    if req.aggregate.instance_id != req.instance.id {
        return Err(Error::domain("aggregate computed for a different instance"));
    }
    if req.aggregate.total_count() == 0 {
        return Err(Error::domain("nothing to generate from: no evaluations"));
    }

    let mut truncations = Vec::new();
    let mut excerpts: Vec<Excerpt<'_>> = req
        .materials
        .iter()
        .map(|m| {
            let original = m.body.chars().count();
            if original > req.budget.excerpt_cap_chars {
                truncations.push(MaterialTruncation {
                    material_id: m.id.clone(),
                    original_chars: original,
                    kept_chars: req.budget.excerpt_cap_chars,
                    reason: TruncationReason::ExcerptCap,
                });
            }
            Excerpt {
                material: m,
                text: take_chars(&m.body, req.budget.excerpt_cap_chars),
            }
        })
        .collect();

    let max_chars = req.budget.max_chars();
    let mut budget_cuts: Vec<(usize, usize)> = Vec::new();
    let rendered = loop {
        let text = anonymize(&render(req, &excerpts), req.roster, map);
        let len = text.chars().count();
        if len <= max_chars {
            break text;
        }
        let Some(idx) = excerpts.iter().rposition(|e| !e.text.is_empty()) else {
            return Err(Error::domain(format!(
                "prompt needs {len} characters, budget is {max_chars}"
            )));
        };
        let e = &mut excerpts[idx];
        let before = e.text.chars().count();
        let keep = before.saturating_sub(len - max_chars);
        e.text = take_chars(&e.text, keep);
        match budget_cuts.iter_mut().find(|(i, _)| *i == idx) {
            Some(cut) => cut.1 = keep,
            None => budget_cuts.push((idx, keep)),
        }
    };
    for (idx, kept) in budget_cuts {
        let m = excerpts[idx].material;
        truncations.push(MaterialTruncation {
            material_id: m.id.clone(),
            original_chars: m.body.chars().count(),
            kept_chars: kept,
            reason: TruncationReason::TokenBudget,
        });
    }

    if !find_residuals(&rendered, req.roster).is_empty() {
        return Err(Error::domain("rendered prompt still carries roster identifiers"));
    }

    Ok(PromptBundle {
        instance_id: req.instance.id.clone(),
        rendered_text: rendered,
        template_id: req.template.id.clone(),
        inputs_digest: inputs_digest(req),
        redaction_map_id: map.id(),
        truncations,
    })
}

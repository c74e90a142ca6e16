//! Renders the anonymized prompt that every provider receives.

use aicofe::fixtures;
use aicofe_core::analytics::aggregate_scores;
use aicofe_core::model::{Evaluation, Material};
use aicofe_core::preprocess::{normalize_comment, screen_relevance, RedactionMap, Roster};
use aicofe_core::prompt::{build_prompt, PromptBudget, PromptComment, PromptRequest, PromptTemplate};
use aicofe_core::validation::ValidationPolicy;
use chrono::Utc;

fn main() -> anyhow::Result<()> {
    let rubric = fixtures::rubric();
    let course = fixtures::course();
    let instance = fixtures::instance();
    let mut evaluations = Vec::new();
    let mut comments = Vec::new();
    for (n, (who, sub)) in fixtures::evaluations().into_iter().enumerate() {
        let kind = sub.evaluator_kind.expect("fixture kind");
        for (item_id, text) in &sub.item_comments {
            let clean = normalize_comment(text);
            if screen_relevance(&clean, rubric.item(item_id).expect("item")).relevant {
                comments.push(PromptComment {
                    comment_id: format!("e{n}:{item_id}"),
                    item_id: item_id.clone(),
                    evaluator_kind: kind,
                    text: clean,
                });
            }
        }
        evaluations.push(Evaluation {
            id: format!("e{n}").into(),
            instance_id: instance.id.clone(),
            evaluator_id: who.into(),
            evaluator_kind: kind,
            item_scores: sub.item_scores,
            item_comments: Default::default(),
            submitted_at: Utc::now(),
        });
    }
    let aggregate = aggregate_scores(&instance.id, &rubric, &evaluations)?;
    let template = PromptTemplate::standard("demo", course.id.clone(), course.language);
    let materials = [Material {
        id: "m1".into(),
        course_id: course.id.clone(),
        title: "Guía".into(),
        body: "Abre con una pregunta, desarrolla tres ideas y cierra retomándola.".into(),
    }];
    let roster = Roster::from_users(&fixtures::users());
    let mut map = RedactionMap::new(instance.id.clone());
    let bundle = build_prompt(
        &PromptRequest {
            instance: &instance,
            rubric: &rubric,
            aggregate: &aggregate,
            comments: &comments,
            materials: &materials,
            template: &template,
            limits: ValidationPolicy::new(course.language).limits(),
            budget: PromptBudget::default(),
            roster: &roster,
        },
        &mut map,
    )?;
    println!("{}", bundle.rendered_text);
    println!("---\ndigest {}\nplaceholders {}", bundle.text_digest(), map.entries.len());
    Ok(())
}

//! Scores from peers, a teacher and the subject, aggregated per rubric item.
//!
//! Run with `cargo run -p aicofe --example evaluate_and_aggregate`.

use std::collections::BTreeMap;

use aicofe::fixtures;
use aicofe_core::analytics::{aggregate_scores, compare_self_vs_aggregate, evaluation_timing_summary, DEFAULT_ALIGNMENT_EPSILON};
use aicofe_core::model::{Evaluation, InteractionEvent, InteractionKind};
use chrono::{Duration, Utc};

fn main() -> anyhow::Result<()> {
    let rubric = fixtures::rubric();
    let instance = fixtures::instance();
    let now = Utc::now();

    let evaluations: Vec<Evaluation> = fixtures::evaluations()
        .into_iter()
        .enumerate()
        .map(|(n, (who, sub))| Evaluation {
            id: format!("e{n}").into(),
            instance_id: instance.id.clone(),
            evaluator_id: who.into(),
            evaluator_kind: sub.evaluator_kind.expect("fixtures name the kind"),
            item_scores: sub.item_scores,
            item_comments: sub.item_comments.into_iter().map(|(k, v)| (k, Some(v))).collect(),
            submitted_at: now,
        })
        .collect();
    for e in &evaluations {
        e.validate(&instance, &rubric)?;
    }

    let agg = aggregate_scores(&instance.id, &rubric, &evaluations)?;
    println!("item        mean  n   by kind");
    for item in &rubric.items {
        let a = &agg.items[&item.id];
        let kinds: BTreeMap<_, _> = a.by_kind.iter().map(|(k, m)| (k.as_str(), format!("{m:.2}"))).collect();
        println!("{:<10} {:>5} {:>2}   {kinds:?}", item.id.as_str(), a.display_mean().unwrap_or("-".into()), a.count);
    }

    let own = evaluations.iter().find(|e| e.evaluator_id.as_str() == fixtures::SUBJECT);
    let cmp = compare_self_vs_aggregate(own, &agg, DEFAULT_ALIGNMENT_EPSILON)?;
    println!("\nself assessment against the aggregate:");
    for (item, c) in &cmp {
        println!("  {:<10} self {:?}  delta {:+.2}  {:?}", item.as_str(), c.self_score, c.delta.unwrap_or(0.0), c.alignment);
    }

    // An evaluator changes their mind on one item before submitting.
    let events: Vec<InteractionEvent> = [("voice", 3, 0), ("structure", 2, 4), ("voice", 4, 9)]
        .into_iter()
        .enumerate()
        .map(|(n, (item, value, secs))| InteractionEvent {
            id: format!("ev{n}").into(),
            evaluation_id: "e0".into(),
            item_id: item.into(),
            kind: InteractionKind::ScoreSelected,
            value: Some(value),
            occurred_at: now + Duration::seconds(secs),
        })
        .collect();
    println!("\ntiming:");
    for (item, t) in evaluation_timing_summary(&events)? {
        println!("  {:<10} revisions {}", item.as_str(), t.revision_count);
    }
    Ok(())
}

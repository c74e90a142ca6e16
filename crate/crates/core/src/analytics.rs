//! Score aggregation, self-vs-aggregate comparison and interaction timing.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    EvaluationId, Evaluation, EvaluatorKind, InstanceId, InteractionEvent, InteractionKind, ItemId,
    Rubric,
};

/// Default half-width of the "aligned" band, in score units.
pub const DEFAULT_ALIGNMENT_EPSILON: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemAggregate {
    /// `None` when no non-self evaluation scored this item.
    pub mean: Option<f64>,
    pub count: usize,
    pub by_kind: BTreeMap<EvaluatorKind, f64>,
    pub kind_counts: BTreeMap<EvaluatorKind, usize>,
}

impl ItemAggregate {
    /// Mean rounded to one decimal for display, e.g. `"3.7"`.
    pub fn display_mean(&self) -> Option<String> {
        self.mean.map(|m| format!("{m:.1}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub instance_id: InstanceId,
    /// Keyed by item id; every rubric item is present.
    pub items: BTreeMap<ItemId, ItemAggregate>,
}

impl Aggregate {
    pub fn total_count(&self) -> usize {
        self.items.values().map(|i| i.count).sum()
    }
}

/// Per-item mean over peer and teacher scores. Self evaluations are ignored.
pub fn aggregate_scores(
    instance_id: &InstanceId,
    rubric: &Rubric,
    evaluations: &[Evaluation],
) -> Result<Aggregate> {
    let mut sums: BTreeMap<&ItemId, BTreeMap<EvaluatorKind, (i64, usize)>> =
        rubric.items.iter().map(|i| (&i.id, BTreeMap::new())).collect();

    for ev in evaluations {
        if &ev.instance_id != instance_id {
            return Err(Error::domain(format!(
                "evaluation {} belongs to instance {}, expected {}",
                ev.id, ev.instance_id, instance_id
            )));
        }
        for (item, &score) in &ev.item_scores {
            if !rubric.contains_score(score) {
                return Err(Error::ScoreOutOfRange {
                    item: item.to_string(),
                    score,
                    min: rubric.scale_min,
                    max: rubric.scale_max,
                });
            }
            let Some(per_kind) = sums.get_mut(item) else {
                return Err(Error::domain(format!("item {item} is not part of rubric {}", rubric.id)));
            };
            if ev.evaluator_kind == EvaluatorKind::SelfAssessment {
                continue;
            }
            let slot = per_kind.entry(ev.evaluator_kind).or_insert((0, 0));
            slot.0 += i64::from(score);
            slot.1 += 1;
        }
    }

    let items = sums
        .into_iter()
        .map(|(item, per_kind)| {
            let total: i64 = per_kind.values().map(|(s, _)| s).sum();
            let count: usize = per_kind.values().map(|(_, c)| c).sum();
            let mean = (count > 0).then(|| total as f64 / count as f64);
            let by_kind = per_kind.iter().map(|(&k, &(s, c))| (k, s as f64 / c as f64)).collect();
            let kind_counts = per_kind.iter().map(|(&k, &(_, c))| (k, c)).collect();
            (
                item.clone(),
                ItemAggregate {
                    mean,
                    count,
                    by_kind,
                    kind_counts,
                },
            )
        })
        .collect();

    Ok(Aggregate {
        instance_id: instance_id.clone(),
        items,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Above,
    Aligned,
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfComparison {
    pub self_score: Option<i32>,
    pub aggregate_mean: Option<f64>,
    pub delta: Option<f64>,
    /// Omitted when only one side has a value for the item.
    pub alignment: Option<Alignment>,
}

pub fn compare_self_vs_aggregate(
    self_eval: Option<&Evaluation>,
    aggregate: &Aggregate,
    epsilon: f64,
) -> Result<BTreeMap<ItemId, SelfComparison>> {
    let self_eval = self_eval.ok_or_else(|| Error::not_found("self evaluation"))?;
    if self_eval.evaluator_kind != EvaluatorKind::SelfAssessment {
        return Err(Error::domain(format!("evaluation {} is not a self evaluation", self_eval.id)));
    }
    if self_eval.instance_id != aggregate.instance_id {
        return Err(Error::domain("self evaluation and aggregate cover different instances"));
    }

    let mut out = BTreeMap::new();
    for (item, agg) in &aggregate.items {
        let self_score = self_eval.item_scores.get(item).copied();
        out.insert(item.clone(), compare_one(self_score, agg.mean, epsilon));
    }
    // Items scored by the student but absent from the aggregate are kept.
    for (item, &score) in &self_eval.item_scores {
        out.entry(item.clone()).or_insert_with(|| compare_one(Some(score), None, epsilon));
    }
    Ok(out)
}

fn compare_one(self_score: Option<i32>, mean: Option<f64>, epsilon: f64) -> SelfComparison {
    let delta = match (self_score, mean) {
        (Some(s), Some(m)) => Some(f64::from(s) - m),
        _ => None,
    };
    let alignment = delta.map(|d| {
        if d.abs() <= epsilon {
            Alignment::Aligned
        } else if d > 0.0 {
            Alignment::Above
        } else {
            Alignment::Below
        }
    });
    SelfComparison {
        self_score,
        aggregate_mean: mean,
        delta,
        alignment,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub first_score_at: Option<DateTime<Utc>>,
    pub last_score_at: Option<DateTime<Utc>>,
    pub revision_count: usize,
}

/// Per-item score timing over one evaluation's event stream.
pub fn evaluation_timing_summary(
    events: &[InteractionEvent],
) -> Result<BTreeMap<ItemId, TimingSummary>> {
    let Some(first) = events.first() else {
        return Ok(BTreeMap::new());
    };
    let evaluation: &EvaluationId = &first.evaluation_id;

    let mut acc: BTreeMap<ItemId, (Option<DateTime<Utc>>, Option<DateTime<Utc>>, usize)> =
        BTreeMap::new();
    for ev in events {
        if &ev.evaluation_id != evaluation {
            return Err(Error::domain("timing summary over events from several evaluations"));
        }
        let slot = acc.entry(ev.item_id.clone()).or_insert((None, None, 0));
        if ev.kind == InteractionKind::ScoreSelected {
            slot.0 = Some(slot.0.map_or(ev.occurred_at, |t| t.min(ev.occurred_at)));
            slot.1 = Some(slot.1.map_or(ev.occurred_at, |t| t.max(ev.occurred_at)));
            slot.2 += 1;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(item, (first, last, n))| {
            (
                item,
                TimingSummary {
                    first_score_at: first,
                    last_score_at: last,
                    revision_count: n.saturating_sub(1),
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RubricItem, UserId};
    use std::collections::BTreeSet;

    fn rubric(items: &[&str]) -> Rubric {
        Rubric {
            id: "r".into(),
            title: "R".into(),
            revision: 1,
            items: items
                .iter()
                .map(|id| RubricItem {
                    id: (*id).into(),
                    title: id.to_uppercase(),
                    level_descriptions: (1..=5).map(|l| (l, format!("{l}"))).collect(),
                    relevance_terms: BTreeSet::new(),
                })
                .collect(),
            scale_min: 1,
            scale_max: 5,
        }
    }

    fn eval(id: &str, kind: EvaluatorKind, scores: &[(&str, i32)]) -> Evaluation {
        Evaluation {
            id: id.into(),
            instance_id: "i".into(),
            evaluator_id: UserId::new(format!("u-{id}")),
            evaluator_kind: kind,
            item_scores: scores.iter().map(|(k, v)| ((*k).into(), *v)).collect(),
            item_comments: BTreeMap::new(),
            submitted_at: Utc::now(),
        }
    }

    #[test]
    fn mixes_peer_and_teacher_scores() {
        let evs = [
            eval("1", EvaluatorKind::Peer, &[("a", 4)]),
            eval("2", EvaluatorKind::Peer, &[("a", 5)]),
            eval("3", EvaluatorKind::Teacher, &[("a", 3)]),
        ];
        let agg = aggregate_scores(&"i".into(), &rubric(&["a"]), &evs).unwrap();
        let a = &agg.items[&ItemId::from("a")];
        assert_eq!(a.mean, Some(4.0));
        assert_eq!(a.count, 3);
        assert_eq!(a.by_kind[&EvaluatorKind::Peer], 4.5);
        assert_eq!(a.by_kind[&EvaluatorKind::Teacher], 3.0);
    }

    #[test]
    fn single_evaluation_is_identity() {
        let evs = [eval("1", EvaluatorKind::Peer, &[("a", 2)])];
        let agg = aggregate_scores(&"i".into(), &rubric(&["a"]), &evs).unwrap();
        let a = &agg.items[&ItemId::from("a")];
        assert_eq!((a.mean, a.count), (Some(2.0), 1));
    }

    #[test]
    fn self_scores_stay_out_and_empty_items_are_listed() {
        let evs = [
            eval("1", EvaluatorKind::SelfAssessment, &[("a", 1), ("b", 1)]),
            eval("2", EvaluatorKind::Peer, &[("a", 5)]),
        ];
        let agg = aggregate_scores(&"i".into(), &rubric(&["a", "b"]), &evs).unwrap();
        assert_eq!(agg.items[&ItemId::from("a")].mean, Some(5.0));
        let b = &agg.items[&ItemId::from("b")];
        assert_eq!((b.mean, b.count), (None, 0));
    }

    #[test]
    fn rejects_foreign_instance_and_out_of_range() {
        let mut e = eval("1", EvaluatorKind::Peer, &[("a", 3)]);
        e.instance_id = "other".into();
        assert!(matches!(
            aggregate_scores(&"i".into(), &rubric(&["a"]), &[e]),
            Err(Error::Domain(_))
        ));
        let e = eval("1", EvaluatorKind::Peer, &[("a", 9)]);
        assert!(matches!(
            aggregate_scores(&"i".into(), &rubric(&["a"]), &[e]),
            Err(Error::ScoreOutOfRange { .. })
        ));
    }

    #[test]
    fn comparison_bands() {
        let agg = Aggregate {
            instance_id: "i".into(),
            items: [
                ("a".into(), item_with_mean(4.3)),
                ("b".into(), item_with_mean(3.0)),
            ]
            .into(),
        };
        let me = eval("s", EvaluatorKind::SelfAssessment, &[("a", 4), ("b", 5)]);
        let cmp = compare_self_vs_aggregate(Some(&me), &agg, DEFAULT_ALIGNMENT_EPSILON).unwrap();
        let a = &cmp[&ItemId::from("a")];
        assert!((a.delta.unwrap() + 0.3).abs() < 1e-12);
        assert_eq!(a.alignment, Some(Alignment::Aligned));
        let b = &cmp[&ItemId::from("b")];
        assert_eq!(b.delta, Some(2.0));
        assert_eq!(b.alignment, Some(Alignment::Above));
    }

    #[test]
    fn comparison_keeps_one_sided_items() {
        let agg = Aggregate {
            instance_id: "i".into(),
            items: [("a".into(), item_with_mean(4.0))].into(),
        };
        let me = eval("s", EvaluatorKind::SelfAssessment, &[("z", 2)]);
        let cmp = compare_self_vs_aggregate(Some(&me), &agg, 0.5).unwrap();
        assert_eq!(cmp.len(), 2);
        assert_eq!(cmp[&ItemId::from("a")].alignment, None);
        assert_eq!(cmp[&ItemId::from("z")].self_score, Some(2));
        assert_eq!(cmp[&ItemId::from("z")].alignment, None);
    }

    #[test]
    fn missing_self_evaluation_is_not_found() {
        let agg = Aggregate {
            instance_id: "i".into(),
            items: BTreeMap::new(),
        };
        assert!(matches!(compare_self_vs_aggregate(None, &agg, 0.5), Err(Error::NotFound(_))));
    }

    fn item_with_mean(m: f64) -> ItemAggregate {
        ItemAggregate {
            mean: Some(m),
            count: 1,
            by_kind: BTreeMap::new(),
            kind_counts: BTreeMap::new(),
        }
    }

    fn event(item: &str, kind: InteractionKind, ms: i64) -> InteractionEvent {
        InteractionEvent {
            id: format!("{item}{ms}").into(),
            evaluation_id: "e".into(),
            item_id: item.into(),
            kind,
            value: Some(3),
            occurred_at: DateTime::from_timestamp_millis(ms).unwrap(),
        }
    }

    #[test]
    fn timing_counts_revisions() {
        let one = [event("a", InteractionKind::ScoreSelected, 10)];
        assert_eq!(evaluation_timing_summary(&one).unwrap()[&ItemId::from("a")].revision_count, 0);

        let three = [
            event("a", InteractionKind::ScoreSelected, 10),
            event("a", InteractionKind::RubricLevelViewed, 15),
            event("a", InteractionKind::ScoreSelected, 20),
            event("a", InteractionKind::ScoreSelected, 30),
        ];
        let s = &evaluation_timing_summary(&three).unwrap()[&ItemId::from("a")];
        assert_eq!(s.revision_count, 2);
        assert_eq!(s.first_score_at.unwrap().timestamp_millis(), 10);
        assert_eq!(s.last_score_at.unwrap().timestamp_millis(), 30);
    }

    #[test]
    fn timing_of_nothing_is_empty() {
        assert!(evaluation_timing_summary(&[]).unwrap().is_empty());
    }
}

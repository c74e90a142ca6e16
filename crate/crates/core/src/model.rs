//! Shared domain types.
//!
//! All types serialize to snake_case JSON with RFC 3339 timestamps.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($($(#[$meta:meta])* $name:ident),* $(,)?) => {
        $(
            $(#[$meta])*
            #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
            #[serde(transparent)]
            pub struct $name(pub String);

            impl $name {
                pub fn new(id: impl Into<String>) -> Self {
                    Self(id.into())
                }

                pub fn as_str(&self) -> &str {
                    &self.0
                }
            }

            impl fmt::Display for $name {
                fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                    f.write_str(&self.0)
                }
            }

            impl From<&str> for $name {
                fn from(s: &str) -> Self {
                    Self(s.to_owned())
                }
            }

            impl From<String> for $name {
                fn from(s: String) -> Self {
                    Self(s)
                }
            }
        )*
    };
}

id_type!(
    UserId,
    CourseId,
    GroupId,
    RubricId,
    ItemId,
    InstanceId,
    EvaluationId,
    EventId,
    TemplateId,
    MaterialId,
    FileId,
    CandidateId,
    SentenceId,
    FeedbackId,
);

/// Supported system and feedback languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Es,
    En,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Es, Language::En];

    pub fn code(self) -> &'static str {
        match self {
            Language::Es => "es",
            Language::En => "en",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        match code {
            "es" => Ok(Language::Es),
            "en" => Ok(Language::En),
            other => Err(Error::domain(format!("unsupported language code {other:?}"))),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    Teacher,
    Admin,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Student => "student",
            Role::Teacher => "teacher",
            Role::Admin => "admin",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "student" => Ok(Role::Student),
            "teacher" => Ok(Role::Teacher),
            "admin" => Ok(Role::Admin),
            other => Err(Error::domain(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub display_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    pub role: Role,
    #[serde(default)]
    pub course_ids: BTreeSet<CourseId>,
}

impl User {
    pub fn validate(&self) -> Result<()> {
        if self.display_name.trim().is_empty() {
            return Err(Error::domain(format!("user {} has an empty display name", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Course {
    pub id: CourseId,
    pub name: String,
    pub language: Language,
    #[serde(default)]
    pub group_ids: BTreeSet<GroupId>,
    #[serde(default)]
    pub rubric_ids: BTreeSet<RubricId>,
    #[serde(default)]
    pub prompt_template_id: Option<TemplateId>,
    #[serde(default)]
    pub material_refs: Vec<MaterialId>,
    /// UI locale hint, kept apart from the feedback language.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ui_locale: Option<String>,
}

impl Course {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::domain(format!("course {} has an empty name", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: GroupId,
    pub course_id: CourseId,
    pub name: String,
    #[serde(default)]
    pub member_ids: BTreeSet<UserId>,
}

/// Instructional material attached to a course.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Material {
    pub id: MaterialId,
    pub course_id: CourseId,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricItem {
    pub id: ItemId,
    pub title: String,
    pub level_descriptions: BTreeMap<i32, String>,
    /// Lowercase keywords or stems. Empty means every comment is relevant.
    #[serde(default)]
    pub relevance_terms: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub id: RubricId,
    pub title: String,
    /// Bumped whenever items or descriptions change.
    #[serde(default = "default_revision")]
    pub revision: u32,
    pub items: Vec<RubricItem>,
    #[serde(default = "default_scale_min")]
    pub scale_min: i32,
    #[serde(default = "default_scale_max")]
    pub scale_max: i32,
}

fn default_revision() -> u32 {
    1
}

fn default_scale_min() -> i32 {
    1
}

fn default_scale_max() -> i32 {
    5
}

impl Rubric {
    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::domain(format!("rubric {} has no items", self.id)));
        }
        if self.scale_min >= self.scale_max {
            return Err(Error::domain(format!(
                "rubric {} scale_min {} must be below scale_max {}",
                self.id, self.scale_min, self.scale_max
            )));
        }
        let mut seen = BTreeSet::new();
        for item in &self.items {
            if !seen.insert(&item.id) {
                return Err(Error::domain(format!("duplicate rubric item id {}", item.id)));
            }
            for level in self.scale_min..=self.scale_max {
                if !item.level_descriptions.contains_key(&level) {
                    return Err(Error::domain(format!(
                        "rubric item {} lacks a description for level {level}",
                        item.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn item(&self, id: &ItemId) -> Option<&RubricItem> {
        self.items.iter().find(|i| &i.id == id)
    }

    pub fn contains_score(&self, score: i32) -> bool {
        (self.scale_min..=self.scale_max).contains(&score)
    }
}

/// Lifecycle of an evaluation instance. Transitions only move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    Collecting,
    Generating,
    Curating,
    Sent,
}

impl InstanceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            InstanceStatus::Collecting => "collecting",
            InstanceStatus::Generating => "generating",
            InstanceStatus::Curating => "curating",
            InstanceStatus::Sent => "sent",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "collecting" => Ok(InstanceStatus::Collecting),
            "generating" => Ok(InstanceStatus::Generating),
            "curating" => Ok(InstanceStatus::Curating),
            "sent" => Ok(InstanceStatus::Sent),
            other => Err(Error::domain(format!("unknown instance status {other:?}"))),
        }
    }

    /// Whether `self → to` is a legal transition.
    ///
    /// `sent → curating` is only legal when a new feedback version is being
    /// created (`new_version = true`).
    pub fn can_transition(self, to: InstanceStatus, new_version: bool) -> bool {
        use InstanceStatus::*;
        match (self, to) {
            (Collecting, Generating) | (Generating, Curating) | (Curating, Sent) => true,
            (Sent, Curating) => new_version,
            _ => false,
        }
    }

    pub fn transition(self, to: InstanceStatus, new_version: bool) -> Result<InstanceStatus> {
        if self.can_transition(to, new_version) {
            Ok(to)
        } else {
            Err(Error::state(format!(
                "illegal instance transition {} -> {}",
                self.as_str(),
                to.as_str()
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationInstance {
    pub id: InstanceId,
    pub course_id: CourseId,
    pub rubric_id: RubricId,
    pub subject_student_id: UserId,
    pub session_label: String,
    #[serde(default)]
    pub recording_ref: Option<FileId>,
    pub status: InstanceStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Peer,
    Teacher,
    #[serde(rename = "self")]
    SelfAssessment,
}

impl EvaluatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EvaluatorKind::Peer => "peer",
            EvaluatorKind::Teacher => "teacher",
            EvaluatorKind::SelfAssessment => "self",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "peer" => Ok(EvaluatorKind::Peer),
            "teacher" => Ok(EvaluatorKind::Teacher),
            "self" => Ok(EvaluatorKind::SelfAssessment),
            other => Err(Error::domain(format!("unknown evaluator kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluation {
    pub id: EvaluationId,
    pub instance_id: InstanceId,
    pub evaluator_id: UserId,
    pub evaluator_kind: EvaluatorKind,
    pub item_scores: BTreeMap<ItemId, i32>,
    #[serde(default)]
    pub item_comments: BTreeMap<ItemId, Option<String>>,
    pub submitted_at: DateTime<Utc>,
}

impl Evaluation {
    /// Checks the evaluation against its instance and rubric.
    pub fn validate(&self, instance: &EvaluationInstance, rubric: &Rubric) -> Result<()> {
        if self.instance_id != instance.id {
            return Err(Error::domain(format!(
                "evaluation {} belongs to {}, not {}",
                self.id, self.instance_id, instance.id
            )));
        }
        if self.evaluator_kind == EvaluatorKind::SelfAssessment
            && self.evaluator_id != instance.subject_student_id
        {
            return Err(Error::domain(format!(
                "self evaluation {} must be submitted by the subject student",
                self.id
            )));
        }
        for (item, &score) in &self.item_scores {
            if rubric.item(item).is_none() {
                return Err(Error::not_found(format!("rubric item {item}")));
            }
            if !rubric.contains_score(score) {
                return Err(Error::ScoreOutOfRange {
                    item: item.to_string(),
                    score,
                    min: rubric.scale_min,
                    max: rubric.scale_max,
                });
            }
        }
        for item in self.item_comments.keys() {
            if rubric.item(item).is_none() {
                return Err(Error::not_found(format!("rubric item {item}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    ScoreSelected,
    CommentEdited,
    RubricLevelViewed,
}

impl InteractionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            InteractionKind::ScoreSelected => "score_selected",
            InteractionKind::CommentEdited => "comment_edited",
            InteractionKind::RubricLevelViewed => "rubric_level_viewed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "score_selected" => Ok(InteractionKind::ScoreSelected),
            "comment_edited" => Ok(InteractionKind::CommentEdited),
            "rubric_level_viewed" => Ok(InteractionKind::RubricLevelViewed),
            other => Err(Error::domain(format!("unknown interaction kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub id: EventId,
    pub evaluation_id: EvaluationId,
    pub item_id: ItemId,
    pub kind: InteractionKind,
    #[serde(default)]
    pub value: Option<i32>,
    #[serde(with = "millis_rfc3339")]
    pub occurred_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRating {
    pub instance_id: InstanceId,
    pub feedback_version_id: String,
    pub rater_id: UserId,
    pub agreement: i32,
    pub usefulness: i32,
    #[serde(default)]
    pub comment: Option<String>,
}

impl FeedbackRating {
    pub fn validate(&self, rubric: &Rubric) -> Result<()> {
        for (name, v) in [("agreement", self.agreement), ("usefulness", self.usefulness)] {
            if !rubric.contains_score(v) {
                return Err(Error::ScoreOutOfRange {
                    item: name.into(),
                    score: v,
                    min: rubric.scale_min,
                    max: rubric.scale_max,
                });
            }
        }
        Ok(())
    }
}

/// RFC 3339 with exactly millisecond precision.
pub mod millis_rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&raw)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

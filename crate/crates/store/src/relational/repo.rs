use std::collections::{BTreeMap, BTreeSet};

use aicofe_core::model::{
    Course, CourseId, Evaluation, EvaluationId, EvaluationInstance, EvaluatorKind, FileId, Group, GroupId,
    InstanceId, InstanceStatus, InteractionEvent, InteractionKind, ItemId, Language, Material, MaterialId, Role,
    Rubric, RubricId, RubricItem, User, UserId,
};
use aicofe_core::preprocess::ScreenedComment;
use aicofe_core::prompt::{PromptTemplate, Segment};
use aicofe_core::validation::ValidationPolicy;
use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StoreError};
use crate::files::MediaKind;

/// Typed queries over one connection or transaction.
pub struct Repo<'c> {
    conn: &'c Connection,
}

/// A comment as stored, with its preprocessing results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredComment {
    pub evaluation_id: EvaluationId,
    pub evaluator_id: UserId,
    pub evaluator_kind: EvaluatorKind,
    pub item_id: ItemId,
    pub original_text: String,
    pub normalized_text: String,
    pub relevant: bool,
    pub matched_terms: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed,
}

impl JobStatus {
    fn as_str(self) -> &'static str {
        match self {
            JobStatus::Running => "running",
            JobStatus::Succeeded => "succeeded",
            JobStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "running" => Ok(JobStatus::Running),
            "succeeded" => Ok(JobStatus::Succeeded),
            "failed" => Ok(JobStatus::Failed),
            other => Err(StoreError::Integrity(format!("unknown job status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub id: String,
    pub instance_id: InstanceId,
    pub status: JobStatus,
    pub detail: Option<String>,
    pub created_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
}

/// A recording file linked to an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recording {
    pub id: FileId,
    pub instance_id: InstanceId,
    pub media_kind: MediaKind,
    pub rel_path: String,
    pub checksum: String,
    pub byte_size: u64,
    pub active: bool,
    pub created_at: DateTime<Utc>,
}

fn ms(t: DateTime<Utc>) -> i64 {
    t.timestamp_millis()
}

fn from_ms(v: i64) -> Result<DateTime<Utc>> {
    DateTime::from_timestamp_millis(v).ok_or_else(|| StoreError::Integrity(format!("bad timestamp {v}")))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string(v)?)
}

fn parse_json<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    Ok(serde_json::from_str(s)?)
}

impl<'c> Repo<'c> {
    pub(crate) fn new(conn: &'c Connection) -> Self {
        Self { conn }
    }

    pub fn connection(&self) -> &Connection {
        self.conn
    }

    // Users and tokens

    pub fn insert_user(&self, user: &User) -> Result<()> {
        user.validate()?;
        self.conn.execute(
            "INSERT INTO users (id, display_name, email, role) VALUES (?1, ?2, ?3, ?4)",
            params![user.id.as_str(), user.display_name, user.email, user.role.as_str()],
        )?;
        for c in &user.course_ids {
            self.add_course_staff(c, &user.id)?;
        }
        Ok(())
    }

    fn add_course_staff(&self, course: &CourseId, user: &UserId) -> Result<()> {
        self.conn.execute(
            "INSERT OR IGNORE INTO course_staff (course_id, user_id) VALUES (?1, ?2)",
            params![course.as_str(), user.as_str()],
        )?;
        Ok(())
    }

    /// Links a user to a course outside any group, e.g. a teacher.
    pub fn add_user_to_course(&self, course: &CourseId, user: &UserId) -> Result<()> {
        self.add_course_staff(course, user)
    }

    pub fn get_user(&self, id: &UserId) -> Result<User> {
        let (display_name, email, role): (String, Option<String>, String) = self
            .conn
            .query_row("SELECT display_name, email, role FROM users WHERE id = ?1", [id.as_str()], |r| {
                Ok((r.get(0)?, r.get(1)?, r.get(2)?))
            })
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("user {id}")))?;
        Ok(User {
            id: id.clone(),
            display_name,
            email,
            role: Role::parse(&role)?,
            course_ids: self.user_courses(id)?,
        })
    }

    pub fn list_users(&self) -> Result<Vec<User>> {
        let ids = self.ids("SELECT id FROM users ORDER BY id", params![])?;
        ids.into_iter().map(|id| self.get_user(&UserId::new(id))).collect()
    }

    fn user_courses(&self, id: &UserId) -> Result<BTreeSet<CourseId>> {
        let ids = self.ids(
            "SELECT course_id FROM course_staff WHERE user_id = ?1
             UNION SELECT g.course_id FROM memberships m JOIN groups g ON g.id = m.group_id WHERE m.user_id = ?1",
            params![id.as_str()],
        )?;
        Ok(ids.into_iter().map(CourseId::new).collect())
    }

    pub fn insert_token(&self, token: &str, user: &UserId, expires_at: Option<DateTime<Utc>>) -> Result<()> {
        self.conn.execute(
            "INSERT INTO api_tokens (token, user_id, expires_at) VALUES (?1, ?2, ?3)",
            params![token, user.as_str(), expires_at.map(ms)],
        )?;
        Ok(())
    }

    /// The user owning `token`, unless it is unknown or expired at `now`.
    pub fn user_for_token(&self, token: &str, now: DateTime<Utc>) -> Result<Option<User>> {
        let row: Option<(String, Option<i64>)> = self
            .conn
            .query_row("SELECT user_id, expires_at FROM api_tokens WHERE token = ?1", [token], |r| {
                Ok((r.get(0)?, r.get(1)?))
            })
            .optional()?;
        match row {
            Some((user, expires)) if expires.map_or(true, |e| e > ms(now)) => Ok(Some(self.get_user(&UserId::new(user))?)),
            _ => Ok(None),
        }
    }

    // Courses, groups, memberships

    pub fn insert_course(&self, course: &Course) -> Result<()> {
        course.validate()?;
        self.conn.execute(
            "INSERT INTO courses (id, name, language, ui_locale, prompt_template_id) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                course.id.as_str(),
                course.name,
                course.language.code(),
                course.ui_locale,
                course.prompt_template_id.as_ref().map(|t| t.as_str())
            ],
        )?;
        for r in &course.rubric_ids {
            self.assign_rubric(&course.id, r)?;
        }
        Ok(())
    }

    pub fn get_course(&self, id: &CourseId) -> Result<Course> {
        let (name, language, ui_locale, template): (String, String, Option<String>, Option<String>) = self
            .conn
            .query_row(
                "SELECT name, language, ui_locale, prompt_template_id FROM courses WHERE id = ?1",
                [id.as_str()],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("course {id}")))?;
        let groups = self.ids("SELECT id FROM groups WHERE course_id = ?1 ORDER BY id", params![id.as_str()])?;
        let rubrics = self.ids(
            "SELECT rubric_id FROM course_rubrics WHERE course_id = ?1 ORDER BY rubric_id",
            params![id.as_str()],
        )?;
        let materials = self.ids(
            "SELECT id FROM materials WHERE course_id = ?1 ORDER BY position, id",
            params![id.as_str()],
        )?;
        Ok(Course {
            id: id.clone(),
            name,
            language: Language::from_code(&language)?,
            group_ids: groups.into_iter().map(GroupId::new).collect(),
            rubric_ids: rubrics.into_iter().map(RubricId::new).collect(),
            prompt_template_id: template.map(Into::into),
            material_refs: materials.into_iter().map(MaterialId::new).collect(),
            ui_locale,
        })
    }

    pub fn list_courses(&self) -> Result<Vec<Course>> {
        let ids = self.ids("SELECT id FROM courses ORDER BY id", params![])?;
        ids.into_iter().map(|id| self.get_course(&CourseId::new(id))).collect()
    }

    pub fn set_course_language(&self, id: &CourseId, language: Language, ui_locale: Option<&str>) -> Result<()> {
        let n = self.conn.execute(
            "UPDATE courses SET language = ?2, ui_locale = COALESCE(?3, ui_locale) WHERE id = ?1",
            params![id.as_str(), language.code(), ui_locale],
        )?;
        if n == 0 {
            return Err(StoreError::NotFound(format!("course {id}")));
        }
        Ok(())
    }

    pub fn set_course_template(&self, id: &CourseId, template: &aicofe_core::model::TemplateId) -> Result<()> {
        let n = self.conn.execute(
            "UPDATE courses SET prompt_template_id = ?2 WHERE id = ?1",
            params![id.as_str(), template.as_str()],
        )?;
        if n == 0 {
            return Err(StoreError::NotFound(format!("course {id}")));
        }
        Ok(())
    }

    pub fn insert_group(&self, group: &Group) -> Result<()> {
        self.conn.execute(
            "INSERT INTO groups (id, course_id, name) VALUES (?1, ?2, ?3)",
            params![group.id.as_str(), group.course_id.as_str(), group.name],
        )?;
        for m in &group.member_ids {
            self.add_member(&group.id, m, false)?;
        }
        Ok(())
    }

    pub fn get_group(&self, id: &GroupId) -> Result<Group> {
        let (course_id, name): (String, String) = self
            .conn
            .query_row("SELECT course_id, name FROM groups WHERE id = ?1", [id.as_str()], |r| {
                Ok((r.get(0)?, r.get(1)?))
            })
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("group {id}")))?;
        let members = self.ids("SELECT user_id FROM memberships WHERE group_id = ?1 ORDER BY user_id", params![id.as_str()])?;
        Ok(Group {
            id: id.clone(),
            course_id: course_id.into(),
            name,
            member_ids: members.into_iter().map(UserId::new).collect(),
        })
    }

    pub fn add_member(&self, group: &GroupId, user: &UserId, recording_consent: bool) -> Result<()> {
        self.conn.execute(
            "INSERT INTO memberships (group_id, user_id, recording_consent) VALUES (?1, ?2, ?3)
             ON CONFLICT (group_id, user_id) DO UPDATE SET recording_consent = excluded.recording_consent",
            params![group.as_str(), user.as_str(), recording_consent],
        )?;
        Ok(())
    }

    /// Whether `user` opted in to recordings in any group of `course`.
    pub fn recording_consent(&self, course: &CourseId, user: &UserId) -> Result<bool> {
        Ok(self.conn.query_row(
            "SELECT EXISTS(SELECT 1 FROM memberships m JOIN groups g ON g.id = m.group_id
                           WHERE g.course_id = ?1 AND m.user_id = ?2 AND m.recording_consent = 1)",
            params![course.as_str(), user.as_str()],
            |r| r.get(0),
        )?)
    }

    /// Students in groups of the course plus directly linked staff.
    pub fn course_members(&self, course: &CourseId) -> Result<Vec<User>> {
        let ids = self.ids(
            "SELECT m.user_id FROM memberships m JOIN groups g ON g.id = m.group_id WHERE g.course_id = ?1
             UNION SELECT user_id FROM course_staff WHERE course_id = ?1 ORDER BY 1",
            params![course.as_str()],
        )?;
        ids.into_iter().map(|id| self.get_user(&UserId::new(id))).collect()
    }

    pub fn is_course_member(&self, course: &CourseId, user: &UserId) -> Result<bool> {
        Ok(self.user_courses(user)?.contains(course))
    }

    // Rubrics

    pub fn insert_rubric(&self, rubric: &Rubric) -> Result<()> {
        rubric.validate()?;
        self.conn.execute(
            "INSERT INTO rubrics (id, title, revision, scale_min, scale_max) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![rubric.id.as_str(), rubric.title, rubric.revision, rubric.scale_min, rubric.scale_max],
        )?;
        for (pos, item) in rubric.items.iter().enumerate() {
            self.conn.execute(
                "INSERT INTO rubric_items (rubric_id, id, position, title, level_descriptions, relevance_terms)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![
                    rubric.id.as_str(),
                    item.id.as_str(),
                    pos as i64,
                    item.title,
                    json(&item.level_descriptions)?,
                    json(&item.relevance_terms)?
                ],
            )?;
        }
        Ok(())
    }

    pub fn get_rubric(&self, id: &RubricId) -> Result<Rubric> {
        let (title, revision, scale_min, scale_max): (String, u32, i32, i32) = self
            .conn
            .query_row(
                "SELECT title, revision, scale_min, scale_max FROM rubrics WHERE id = ?1",
                [id.as_str()],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)),
            )
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("rubric {id}")))?;
        let mut stmt = self.conn.prepare(
            "SELECT id, title, level_descriptions, relevance_terms FROM rubric_items
             WHERE rubric_id = ?1 ORDER BY position",
        )?;
        let rows = stmt.query_map([id.as_str()], |r| {
            Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?, r.get::<_, String>(2)?, r.get::<_, String>(3)?))
        })?;
        let mut items = Vec::new();
        for row in rows {
            let (item_id, item_title, levels, terms) = row?;
            items.push(RubricItem {
                id: item_id.into(),
                title: item_title,
                level_descriptions: parse_json::<BTreeMap<i32, String>>(&levels)?,
                relevance_terms: parse_json(&terms)?,
            });
        }
        Ok(Rubric {
            id: id.clone(),
            title,
            revision,
            items,
            scale_min,
            scale_max,
        })
    }

    pub fn list_rubrics(&self) -> Result<Vec<Rubric>> {
        let ids = self.ids("SELECT id FROM rubrics ORDER BY id", params![])?;
        ids.into_iter().map(|id| self.get_rubric(&RubricId::new(id))).collect()
    }

    pub fn set_relevance_terms(&self, rubric: &RubricId, item: &ItemId, terms: &BTreeSet<String>) -> Result<()> {
        let n = self.conn.execute(
            "UPDATE rubric_items SET relevance_terms = ?3 WHERE rubric_id = ?1 AND id = ?2",
            params![rubric.as_str(), item.as_str(), json(terms)?],
        )?;
        if n == 0 {
            return Err(StoreError::NotFound(format!("rubric item {rubric}/{item}")));
        }
        self.conn.execute("UPDATE rubrics SET revision = revision + 1 WHERE id = ?1", [rubric.as_str()])?;
        Ok(())
    }

    pub fn assign_rubric(&self, course: &CourseId, rubric: &RubricId) -> Result<()> {
        self.conn.execute(
            "INSERT OR IGNORE INTO course_rubrics (course_id, rubric_id) VALUES (?1, ?2)",
            params![course.as_str(), rubric.as_str()],
        )?;
        Ok(())
    }

    // Materials, templates, policies

    pub fn insert_material(&self, material: &Material) -> Result<()> {
        let pos: i64 = self.conn.query_row(
            "SELECT COALESCE(MAX(position) + 1, 0) FROM materials WHERE course_id = ?1",
            [material.course_id.as_str()],
            |r| r.get(0),
        )?;
        self.conn.execute(
            "INSERT INTO materials (id, course_id, position, title, body) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![material.id.as_str(), material.course_id.as_str(), pos, material.title, material.body],
        )?;
        Ok(())
    }

    pub fn course_materials(&self, course: &CourseId) -> Result<Vec<Material>> {
        let mut stmt = self
            .conn
            .prepare("SELECT id, title, body FROM materials WHERE course_id = ?1 ORDER BY position, id")?;
        let rows = stmt.query_map([course.as_str()], |r| {
            Ok(Material {
                id: r.get::<_, String>(0)?.into(),
                course_id: course.clone(),
                title: r.get(1)?,
                body: r.get(2)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn upsert_template(&self, template: &PromptTemplate) -> Result<()> {
        template.validate()?;
        self.conn.execute(
            "INSERT INTO prompt_templates (id, course_id, language, segments) VALUES (?1, ?2, ?3, ?4)
             ON CONFLICT (id) DO UPDATE SET course_id = excluded.course_id, language = excluded.language,
                                            segments = excluded.segments",
            params![template.id.as_str(), template.course_id.as_str(), template.language.code(), json(&template.segments)?],
        )?;
        Ok(())
    }

    pub fn get_template(&self, id: &aicofe_core::model::TemplateId) -> Result<PromptTemplate> {
        let (course_id, language, segments): (String, String, String) = self
            .conn
            .query_row(
                "SELECT course_id, language, segments FROM prompt_templates WHERE id = ?1",
                [id.as_str()],
                |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?)),
            )
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("template {id}")))?;
        Ok(PromptTemplate {
            id: id.clone(),
            course_id: course_id.into(),
            language: Language::from_code(&language)?,
            segments: parse_json::<Vec<Segment>>(&segments)?,
        })
    }

    pub fn list_templates(&self) -> Result<Vec<PromptTemplate>> {
        let ids = self.ids("SELECT id FROM prompt_templates ORDER BY id", params![])?;
        ids.into_iter().map(|id| self.get_template(&id.into())).collect()
    }

    pub fn upsert_policy(&self, course: &CourseId, policy: &ValidationPolicy) -> Result<()> {
        policy.check()?;
        self.conn.execute(
            "INSERT INTO validation_policies (course_id, policy) VALUES (?1, ?2)
             ON CONFLICT (course_id) DO UPDATE SET policy = excluded.policy",
            params![course.as_str(), json(policy)?],
        )?;
        Ok(())
    }

    pub fn get_policy(&self, course: &CourseId) -> Result<Option<ValidationPolicy>> {
        let raw: Option<String> = self
            .conn
            .query_row("SELECT policy FROM validation_policies WHERE course_id = ?1", [course.as_str()], |r| r.get(0))
            .optional()?;
        raw.map(|r| parse_json(&r)).transpose()
    }

    // Instances

    pub fn insert_instance(&self, instance: &EvaluationInstance) -> Result<()> {
        self.conn.execute(
            "INSERT INTO evaluation_instances (id, course_id, rubric_id, subject_student_id, session_label, status)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
            params![
                instance.id.as_str(),
                instance.course_id.as_str(),
                instance.rubric_id.as_str(),
                instance.subject_student_id.as_str(),
                instance.session_label,
                instance.status.as_str()
            ],
        )?;
        Ok(())
    }

    fn instance_from_row(&self, r: &Row<'_>) -> rusqlite::Result<(String, String, String, String, String, String)> {
        Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?))
    }

    fn build_instance(&self, row: (String, String, String, String, String, String)) -> Result<EvaluationInstance> {
        let (id, course, rubric, subject, label, status) = row;
        let id = InstanceId::new(id);
        Ok(EvaluationInstance {
            recording_ref: self.active_recording(&id)?.map(|r| r.id),
            id,
            course_id: course.into(),
            rubric_id: rubric.into(),
            subject_student_id: subject.into(),
            session_label: label,
            status: InstanceStatus::parse(&status)?,
        })
    }

    pub fn get_instance(&self, id: &InstanceId) -> Result<EvaluationInstance> {
        let row = self
            .conn
            .query_row(
                "SELECT id, course_id, rubric_id, subject_student_id, session_label, status
                 FROM evaluation_instances WHERE id = ?1",
                [id.as_str()],
                |r| self.instance_from_row(r),
            )
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("instance {id}")))?;
        self.build_instance(row)
    }

    pub fn instance_exists(&self, id: &str) -> Result<bool> {
        Ok(self
            .conn
            .query_row("SELECT EXISTS(SELECT 1 FROM evaluation_instances WHERE id = ?1)", [id], |r| r.get(0))?)
    }

    /// Instances, optionally restricted to one subject student.
    pub fn list_instances(&self, subject: Option<&UserId>) -> Result<Vec<EvaluationInstance>> {
        let mut stmt = self.conn.prepare(
            "SELECT id, course_id, rubric_id, subject_student_id, session_label, status
             FROM evaluation_instances WHERE ?1 IS NULL OR subject_student_id = ?1 ORDER BY id",
        )?;
        let rows: Vec<_> = stmt
            .query_map([subject.map(|s| s.as_str())], |r| self.instance_from_row(r))?
            .collect::<rusqlite::Result<_>>()?;
        rows.into_iter().map(|r| self.build_instance(r)).collect()
    }

    /// Compare-and-set on instance status. Returns whether the swap happened.
    pub fn cas_status(&self, id: &InstanceId, from: InstanceStatus, to: InstanceStatus, new_version: bool) -> Result<bool> {
        from.transition(to, new_version)?;
        let n = self.conn.execute(
            "UPDATE evaluation_instances SET status = ?3 WHERE id = ?1 AND status = ?2",
            params![id.as_str(), from.as_str(), to.as_str()],
        )?;
        Ok(n == 1)
    }

    // Evaluations

    /// Stores scores, screened comments and interaction events together.
    pub fn insert_evaluation(
        &self,
        evaluation: &Evaluation,
        comments: &[ScreenedComment],
        events: &[InteractionEvent],
    ) -> Result<()> {
        self.conn.execute(
            "INSERT INTO evaluations (id, instance_id, evaluator_id, evaluator_kind, submitted_at)
             VALUES (?1, ?2, ?3, ?4, ?5)",
            params![
                evaluation.id.as_str(),
                evaluation.instance_id.as_str(),
                evaluation.evaluator_id.as_str(),
                evaluation.evaluator_kind.as_str(),
                ms(evaluation.submitted_at)
            ],
        )?;
        for (item, score) in &evaluation.item_scores {
            self.conn.execute(
                "INSERT INTO item_scores (evaluation_id, item_id, score) VALUES (?1, ?2, ?3)",
                params![evaluation.id.as_str(), item.as_str(), score],
            )?;
        }
        for c in comments {
            if c.source_evaluation_id != evaluation.id {
                return Err(StoreError::Integrity(format!("comment for {} attached to {}", c.source_evaluation_id, evaluation.id)));
            }
            self.conn.execute(
                "INSERT INTO item_comments (evaluation_id, item_id, original_text, normalized_text, relevant, matched_terms)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                params![
                    evaluation.id.as_str(),
                    c.item_id.as_str(),
                    c.original_text,
                    c.normalized_text,
                    c.relevant,
                    json(&c.matched_terms)?
                ],
            )?;
        }
        for (seq, e) in events.iter().enumerate() {
            if e.evaluation_id != evaluation.id {
                return Err(StoreError::Integrity(format!("event {} attached to {}", e.id, evaluation.id)));
            }
            self.conn.execute(
                "INSERT INTO interaction_events (id, evaluation_id, seq, item_id, kind, value, occurred_at_ms)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
                params![e.id.as_str(), e.evaluation_id.as_str(), seq as i64, e.item_id.as_str(), e.kind.as_str(), e.value, ms(e.occurred_at)],
            )?;
        }
        Ok(())
    }

    pub fn list_evaluations(&self, instance: &InstanceId) -> Result<Vec<Evaluation>> {
        let mut stmt = self.conn.prepare(
            "SELECT id, evaluator_id, evaluator_kind, submitted_at FROM evaluations
             WHERE instance_id = ?1 ORDER BY submitted_at, id",
        )?;
        let heads: Vec<(String, String, String, i64)> = stmt
            .query_map([instance.as_str()], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?)))?
            .collect::<rusqlite::Result<_>>()?;
        let mut out = Vec::with_capacity(heads.len());
        for (id, evaluator, kind, at) in heads {
            let mut scores = BTreeMap::new();
            let mut s = self.conn.prepare_cached("SELECT item_id, score FROM item_scores WHERE evaluation_id = ?1")?;
            for row in s.query_map([&id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, i32>(1)?)))? {
                let (item, score) = row?;
                scores.insert(ItemId::new(item), score);
            }
            let mut comments = BTreeMap::new();
            let mut c = self
                .conn
                .prepare_cached("SELECT item_id, original_text FROM item_comments WHERE evaluation_id = ?1")?;
            for row in c.query_map([&id], |r| Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?)))? {
                let (item, text) = row?;
                comments.insert(ItemId::new(item), Some(text));
            }
            out.push(Evaluation {
                id: id.into(),
                instance_id: instance.clone(),
                evaluator_id: evaluator.into(),
                evaluator_kind: EvaluatorKind::parse(&kind)?,
                item_scores: scores,
                item_comments: comments,
                submitted_at: from_ms(at)?,
            });
        }
        Ok(out)
    }

    pub fn list_comments(&self, instance: &InstanceId) -> Result<Vec<StoredComment>> {
        let mut stmt = self.conn.prepare(
            "SELECT c.evaluation_id, e.evaluator_id, e.evaluator_kind, c.item_id, c.original_text,
                    c.normalized_text, c.relevant, c.matched_terms
             FROM item_comments c JOIN evaluations e ON e.id = c.evaluation_id
             WHERE e.instance_id = ?1 ORDER BY e.submitted_at, c.evaluation_id, c.item_id",
        )?;
        let rows: Vec<(String, String, String, String, String, String, bool, String)> = stmt
            .query_map([instance.as_str()], |r| {
                Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?, r.get(5)?, r.get(6)?, r.get(7)?))
            })?
            .collect::<rusqlite::Result<_>>()?;
        rows.into_iter()
            .map(|(eid, who, kind, item, orig, norm, relevant, terms)| {
                Ok(StoredComment {
                    evaluation_id: eid.into(),
                    evaluator_id: who.into(),
                    evaluator_kind: EvaluatorKind::parse(&kind)?,
                    item_id: item.into(),
                    original_text: orig,
                    normalized_text: norm,
                    relevant,
                    matched_terms: parse_json(&terms)?,
                })
            })
            .collect()
    }

    pub fn list_events(&self, evaluation: &EvaluationId) -> Result<Vec<InteractionEvent>> {
        let mut stmt = self.conn.prepare(
            "SELECT id, item_id, kind, value, occurred_at_ms FROM interaction_events
             WHERE evaluation_id = ?1 ORDER BY seq",
        )?;
        let rows: Vec<(String, String, String, Option<i32>, i64)> = stmt
            .query_map([evaluation.as_str()], |r| Ok((r.get(0)?, r.get(1)?, r.get(2)?, r.get(3)?, r.get(4)?)))?
            .collect::<rusqlite::Result<_>>()?;
        rows.into_iter()
            .map(|(id, item, kind, value, at)| {
                Ok(InteractionEvent {
                    id: id.into(),
                    evaluation_id: evaluation.clone(),
                    item_id: item.into(),
                    kind: InteractionKind::parse(&kind)?,
                    value,
                    occurred_at: from_ms(at)?,
                })
            })
            .collect()
    }

    // Generation jobs

    /// Starts a job; the partial unique index rejects a second running job.
    pub fn start_job(&self, id: &str, instance: &InstanceId, now: DateTime<Utc>) -> Result<GenerationJob> {
        self.conn
            .execute(
                "INSERT INTO generation_jobs (id, instance_id, status, created_at) VALUES (?1, ?2, 'running', ?3)",
                params![id, instance.as_str(), ms(now)],
            )
            .map_err(|e| match StoreError::from(e) {
                StoreError::Constraint(_) => StoreError::Conflict(format!("a generation job is already running for {instance}")),
                other => other,
            })?;
        self.get_job(id)
    }

    pub fn finish_job(&self, id: &str, status: JobStatus, detail: Option<&str>, now: DateTime<Utc>) -> Result<()> {
        let n = self.conn.execute(
            "UPDATE generation_jobs SET status = ?2, detail = ?3, finished_at = ?4 WHERE id = ?1 AND status = 'running'",
            params![id, status.as_str(), detail, ms(now)],
        )?;
        if n == 0 {
            return Err(StoreError::Conflict(format!("job {id} is not running")));
        }
        Ok(())
    }

    pub fn get_job(&self, id: &str) -> Result<GenerationJob> {
        self.conn
            .query_row(
                "SELECT id, instance_id, status, detail, created_at, finished_at FROM generation_jobs WHERE id = ?1",
                [id],
                job_row,
            )
            .optional()?
            .ok_or_else(|| StoreError::NotFound(format!("job {id}")))?
    }

    pub fn jobs_for(&self, instance: &InstanceId) -> Result<Vec<GenerationJob>> {
        let mut stmt = self.conn.prepare(
            "SELECT id, instance_id, status, detail, created_at, finished_at FROM generation_jobs
             WHERE instance_id = ?1 ORDER BY created_at, rowid",
        )?;
        let rows: Vec<Result<GenerationJob>> = stmt.query_map([instance.as_str()], job_row)?.collect::<rusqlite::Result<_>>()?;
        rows.into_iter().collect()
    }

    // Recordings

    pub fn insert_recording(&self, rec: &Recording) -> Result<()> {
        self.conn.execute(
            "UPDATE recordings SET active = 0 WHERE instance_id = ?1 AND active = 1",
            [rec.instance_id.as_str()],
        )?;
        self.conn.execute(
            "INSERT INTO recordings (id, instance_id, media_kind, rel_path, checksum, byte_size, active, created_at)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
            params![
                rec.id.as_str(),
                rec.instance_id.as_str(),
                rec.media_kind.as_str(),
                rec.rel_path,
                rec.checksum,
                rec.byte_size as i64,
                rec.active,
                ms(rec.created_at)
            ],
        )?;
        Ok(())
    }

    pub fn active_recording(&self, instance: &InstanceId) -> Result<Option<Recording>> {
        self.conn
            .query_row(
                "SELECT id, instance_id, media_kind, rel_path, checksum, byte_size, active, created_at
                 FROM recordings WHERE instance_id = ?1 AND active = 1",
                [instance.as_str()],
                recording_row,
            )
            .optional()?
            .transpose()
    }

    pub fn list_recordings(&self) -> Result<Vec<Recording>> {
        let mut stmt = self.conn.prepare(
            "SELECT id, instance_id, media_kind, rel_path, checksum, byte_size, active, created_at
             FROM recordings ORDER BY created_at, id",
        )?;
        let rows: Vec<Result<Recording>> = stmt.query_map([], recording_row)?.collect::<rusqlite::Result<_>>()?;
        rows.into_iter().collect()
    }

    // Idempotency

    pub fn idempotent_response(&self, key: &str, route: &str) -> Result<Option<(u16, String)>> {
        Ok(self
            .conn
            .query_row(
                "SELECT status_code, response FROM idempotency_keys WHERE key = ?1 AND route = ?2",
                params![key, route],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )
            .optional()?)
    }

    pub fn save_idempotent_response(&self, key: &str, route: &str, status: u16, body: &str, now: DateTime<Utc>) -> Result<()> {
        self.conn.execute(
            "INSERT INTO idempotency_keys (key, route, status_code, response, created_at) VALUES (?1, ?2, ?3, ?4, ?5)",
            params![key, route, status, body, ms(now)],
        )?;
        Ok(())
    }

    fn ids(&self, sql: &str, params: impl rusqlite::Params) -> Result<Vec<String>> {
        let mut stmt = self.conn.prepare_cached(sql)?;
        let rows = stmt.query_map(params, |r| r.get::<_, String>(0))?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }
}

fn job_row(r: &Row<'_>) -> rusqlite::Result<Result<GenerationJob>> {
    let id: String = r.get(0)?;
    let instance: String = r.get(1)?;
    let status: String = r.get(2)?;
    let detail: Option<String> = r.get(3)?;
    let created: i64 = r.get(4)?;
    let finished: Option<i64> = r.get(5)?;
    Ok((|| {
        Ok(GenerationJob {
            id,
            instance_id: instance.into(),
            status: JobStatus::parse(&status)?,
            detail,
            created_at: from_ms(created)?,
            finished_at: finished.map(from_ms).transpose()?,
        })
    })())
}

fn recording_row(r: &Row<'_>) -> rusqlite::Result<Result<Recording>> {
    let created: i64 = r.get(7)?;
    let size: i64 = r.get(5)?;
    let rec = (
        r.get::<_, String>(0)?,
        r.get::<_, String>(1)?,
        r.get::<_, String>(2)?,
        r.get::<_, String>(3)?,
        r.get::<_, String>(4)?,
        r.get::<_, bool>(6)?,
    );
    Ok((|| {
        Ok(Recording {
            id: rec.0.into(),
            instance_id: rec.1.into(),
            media_kind: MediaKind::parse(&rec.2)?,
            rel_path: rec.3,
            checksum: rec.4,
            byte_size: u64::try_from(size).map_err(|_| StoreError::Integrity("negative byte size".into()))?,
            active: rec.5,
            created_at: from_ms(created)?,
        })
    })())
}

impl Recording {
    pub fn file(&self) -> crate::files::StoredFile {
        crate::files::StoredFile {
            rel_path: self.rel_path.clone(),
            checksum: self.checksum.clone(),
            byte_size: self.byte_size,
        }
    }
}

//! Administrative operations: users, courses, groups, rubrics and course configuration.

use std::collections::BTreeSet;

use aicofe_core::model::{
    Course, CourseId, Group, GroupId, ItemId, Language, Material, Role, Rubric, RubricId, User, UserId,
};
use aicofe_core::prompt::PromptTemplate;
use aicofe_core::validation::ValidationPolicy;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};
use crate::service::Service;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRequest {
    pub user_id: UserId,
    #[serde(default)]
    pub recording_consent: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageRequest {
    pub language: Language,
    #[serde(default)]
    pub ui_locale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceRequest {
    pub terms: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenRequest {
    pub user_id: UserId,
    pub token: String,
    #[serde(default)]
    pub expires_at: Option<DateTime<Utc>>,
}

fn require_admin(actor: &User) -> Result<()> {
    if actor.role == Role::Admin {
        Ok(())
    } else {
        Err(AppError::forbidden(format!("{} is not an administrator", actor.id)))
    }
}

impl Service {
    pub fn create_user(&self, actor: &User, user: User) -> Result<User> {
        require_admin(actor)?;
        user.validate()?;
        self.store.db.write(|r| r.insert_user(&user))?;
        self.user(&user.id)
    }

    pub fn list_users(&self, actor: &User) -> Result<Vec<User>> {
        require_admin(actor)?;
        Ok(self.store.db.read(|r| r.list_users())?)
    }

    pub fn issue_token(&self, actor: &User, req: &TokenRequest) -> Result<()> {
        require_admin(actor)?;
        if req.token.len() < 16 {
            return Err(AppError::invalid("tokens must be at least 16 characters"));
        }
        self.store.db.write(|r| {
            r.get_user(&req.user_id)?;
            r.insert_token(&req.token, &req.user_id, req.expires_at)
        })?;
        Ok(())
    }

    pub fn create_course(&self, actor: &User, course: Course) -> Result<Course> {
        require_admin(actor)?;
        course.validate()?;
        self.store.db.write(|r| r.insert_course(&course))?;
        self.course(&course.id)
    }

    /// Courses the actor administers or teaches.
    pub fn list_courses(&self, actor: &User) -> Result<Vec<Course>> {
        let all = self.store.db.read(|r| r.list_courses())?;
        Ok(match actor.role {
            Role::Admin => all,
            _ => all.into_iter().filter(|c| actor.course_ids.contains(&c.id)).collect(),
        })
    }

    pub fn add_teacher(&self, actor: &User, course: &CourseId, teacher: &UserId) -> Result<()> {
        require_admin(actor)?;
        self.store.db.write(|r| {
            r.get_course(course)?;
            if r.get_user(teacher)?.role != Role::Teacher {
                return Err(aicofe_core::Error::domain(format!("{teacher} is not a teacher")).into());
            }
            r.add_user_to_course(course, teacher)
        })?;
        Ok(())
    }

    pub fn set_course_language(&self, actor: &User, course: &CourseId, req: &LanguageRequest) -> Result<Course> {
        require_admin(actor)?;
        self.store
            .db
            .write(|r| r.set_course_language(course, req.language, req.ui_locale.as_deref()))?;
        self.course(course)
    }

    pub fn create_group(&self, actor: &User, group: Group) -> Result<Group> {
        require_admin(actor)?;
        if group.name.trim().is_empty() {
            return Err(AppError::invalid("group name must not be empty"));
        }
        self.store.db.write(|r| r.insert_group(&group))?;
        Ok(self.store.db.read(|r| r.get_group(&group.id))?)
    }

    pub fn add_group_member(&self, actor: &User, group: &GroupId, req: &MemberRequest) -> Result<Group> {
        require_admin(actor)?;
        self.store.db.write(|r| {
            if r.get_user(&req.user_id)?.role != Role::Student {
                return Err(aicofe_core::Error::domain(format!("{} is not a student", req.user_id)).into());
            }
            r.add_member(group, &req.user_id, req.recording_consent)
        })?;
        Ok(self.store.db.read(|r| r.get_group(group))?)
    }

    pub fn create_rubric(&self, actor: &User, rubric: Rubric) -> Result<Rubric> {
        require_admin(actor)?;
        rubric.validate()?;
        self.store.db.write(|r| r.insert_rubric(&rubric))?;
        Ok(self.store.db.read(|r| r.get_rubric(&rubric.id))?)
    }

    pub fn rubric(&self, id: &RubricId) -> Result<Rubric> {
        Ok(self.store.db.read(|r| r.get_rubric(id))?)
    }

    pub fn list_rubrics(&self, actor: &User) -> Result<Vec<Rubric>> {
        require_admin(actor)?;
        Ok(self.store.db.read(|r| r.list_rubrics())?)
    }

    pub fn assign_rubric(&self, actor: &User, course: &CourseId, rubric: &RubricId) -> Result<Course> {
        require_admin(actor)?;
        self.store.db.write(|r| r.assign_rubric(course, rubric))?;
        self.course(course)
    }

    pub fn set_relevance_terms(&self, actor: &User, rubric: &RubricId, item: &ItemId, req: &RelevanceRequest) -> Result<Rubric> {
        require_admin(actor)?;
        let terms: BTreeSet<String> = req
            .terms
            .iter()
            .map(|t| t.trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        self.store.db.write(|r| r.set_relevance_terms(rubric, item, &terms))?;
        self.rubric(rubric)
    }

    pub fn add_material(&self, actor: &User, material: Material) -> Result<Material> {
        require_admin(actor)?;
        if material.body.trim().is_empty() {
            return Err(AppError::invalid("material body must not be empty"));
        }
        self.store.db.write(|r| r.insert_material(&material))?;
        Ok(material)
    }

    /// Stores a template and makes it the course default.
    pub fn put_template(&self, actor: &User, course: &CourseId, mut template: PromptTemplate) -> Result<PromptTemplate> {
        require_admin(actor)?;
        template.course_id = course.clone();
        let problems = template.lint();
        if !problems.is_empty() {
            return Err(AppError::invalid(problems.join("; ")));
        }
        self.store.db.write(|r| {
            r.upsert_template(&template)?;
            r.set_course_template(course, &template.id)
        })?;
        Ok(template)
    }

    pub fn put_policy(&self, actor: &User, course: &CourseId, policy: ValidationPolicy) -> Result<ValidationPolicy> {
        require_admin(actor)?;
        policy.check()?;
        self.store.db.write(|r| {
            r.get_course(course)?;
            r.upsert_policy(course, &policy)
        })?;
        Ok(policy)
    }

    pub fn templates(&self) -> Result<Vec<PromptTemplate>> {
        Ok(self.store.db.read(|r| r.list_templates())?)
    }
}

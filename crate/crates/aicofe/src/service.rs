//! The service facade shared by the HTTP API, the CLI and the examples.

use std::sync::Arc;

use aicofe_core::analytics::DEFAULT_ALIGNMENT_EPSILON;
use aicofe_core::model::{Course, CourseId, EvaluationInstance, InstanceId, Role, User, UserId};
use aicofe_core::preprocess::Roster;
use aicofe_core::prompt::PromptTemplate;
use aicofe_core::validation::ValidationPolicy;
use aicofe_gateway::Gateway;
use aicofe_store::Store;

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub auto_trigger: bool,
    pub auto_trigger_after: usize,
    pub alignment_epsilon: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            auto_trigger: false,
            auto_trigger_after: 3,
            alignment_epsilon: DEFAULT_ALIGNMENT_EPSILON,
        }
    }
}

pub struct Service {
    pub(crate) store: Arc<Store>,
    pub(crate) gateway: Arc<Gateway>,
    pub(crate) settings: Settings,
}

impl Service {
    pub fn new(store: Arc<Store>, gateway: Arc<Gateway>, settings: Settings) -> Self {
        Self { store, gateway, settings }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn user(&self, id: &UserId) -> Result<User> {
        Ok(self.store.db.read(|r| r.get_user(id))?)
    }

    pub fn instance(&self, id: &InstanceId) -> Result<EvaluationInstance> {
        Ok(self.store.db.read(|r| r.get_instance(id))?)
    }

    pub fn course(&self, id: &CourseId) -> Result<Course> {
        Ok(self.store.db.read(|r| r.get_course(id))?)
    }

    /// Teachers must be linked to the course; admins always pass.
    pub(crate) fn require_staff(&self, actor: &User, course: &CourseId) -> Result<()> {
        match actor.role {
            Role::Admin => Ok(()),
            Role::Teacher if actor.course_ids.contains(course) => Ok(()),
            _ => Err(AppError::forbidden(format!("{} does not teach {course}", actor.id))),
        }
    }

    pub(crate) fn require_subject(&self, actor: &User, instance: &EvaluationInstance) -> Result<()> {
        if actor.id == instance.subject_student_id {
            Ok(())
        } else {
            Err(AppError::forbidden(format!("{} is not the subject of {}", actor.id, instance.id)))
        }
    }

    pub fn policy_for(&self, course: &Course) -> Result<ValidationPolicy> {
        Ok(self
            .store
            .db
            .read(|r| r.get_policy(&course.id))?
            .unwrap_or_else(|| ValidationPolicy::new(course.language)))
    }

    pub fn template_for(&self, course: &Course) -> Result<PromptTemplate> {
        match &course.prompt_template_id {
            Some(id) => Ok(self.store.db.read(|r| r.get_template(id))?),
            None => Ok(PromptTemplate::standard(
                format!("{}-standard", course.id),
                course.id.clone(),
                course.language,
            )),
        }
    }

    /// Everyone whose name may appear in comments about the instance.
    pub fn roster(&self, instance: &EvaluationInstance) -> Result<Roster> {
        let members = self.store.db.read(|r| r.course_members(&instance.course_id))?;
        Ok(Roster::from_users(&members))
    }
}

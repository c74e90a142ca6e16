//! Hybrid persistence for AICoFe.
//!
//! Structured academic data lives in SQLite, feedback artifacts in a
//! schema-validated JSON document store, and recordings on the local
//! filesystem with checksums. [`Store`] bundles the three.

pub mod audit;
pub mod documents;
mod error;
pub mod files;
pub mod relational;

use std::path::Path;

use aicofe_core::model::{FileId, InstanceId};
use chrono::{DateTime, Utc};

pub use audit::{integrity_audit, AuditReport, Finding};
pub use documents::{Collection, DocFilter, Document, Documents, HistoryEvent};
pub use error::{Result, StoreError};
pub use files::{FileService, MediaKind, StoredFile};
pub use relational::{Database, GenerationJob, JobStatus, Recording, Repo, StoredComment};

pub struct Store {
    pub db: Database,
    pub docs: Documents,
    pub files: FileService,
}

impl Store {
    /// `{root}/aicofe.db`, `{root}/documents/` and `{root}/files/`, migrated.
    pub fn open_dir(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        std::fs::create_dir_all(root)?;
        let store = Self {
            db: Database::open(root.join("aicofe.db"))?,
            docs: Documents::open_dir(root.join("documents"))?,
            files: FileService::open(root.join("files"))?,
        };
        store.db.migrate()?;
        Ok(store)
    }

    /// In-memory relational and document stores; files still need a directory.
    pub fn ephemeral(files_root: impl AsRef<Path>) -> Result<Self> {
        let store = Self {
            db: Database::open_in_memory()?,
            docs: Documents::in_memory(),
            files: FileService::open(files_root)?,
        };
        store.db.migrate()?;
        Ok(store)
    }

    /// Stores a recording and links it as the instance's active one.
    ///
    /// Fails with a domain error unless the subject student opted in.
    pub fn link_recording(
        &self,
        instance: &InstanceId,
        kind: MediaKind,
        bytes: &[u8],
        extension: &str,
        now: DateTime<Utc>,
    ) -> Result<Recording> {
        let inst = self.db.read(|r| r.get_instance(instance))?;
        let consent = self.db.read(|r| r.recording_consent(&inst.course_id, &inst.subject_student_id))?;
        if !consent {
            return Err(aicofe_core::Error::domain(format!(
                "{} has not consented to recordings",
                inst.subject_student_id
            ))
            .into());
        }
        let stored = self.files.put(bytes, extension)?;
        let rec = Recording {
            id: FileId::new(format!("rec-{}", uuid::Uuid::new_v4().simple())),
            instance_id: instance.clone(),
            media_kind: kind,
            rel_path: stored.rel_path,
            checksum: stored.checksum,
            byte_size: stored.byte_size,
            active: true,
            created_at: now,
        };
        self.db.write(|r| r.insert_recording(&rec))?;
        Ok(rec)
    }

    /// Bytes of the active recording, checksum-verified.
    pub fn recording_bytes(&self, instance: &InstanceId) -> Result<Vec<u8>> {
        let rec = self
            .db
            .read(|r| r.active_recording(instance))?
            .ok_or_else(|| StoreError::NotFound(format!("recording for {instance}")))?;
        self.files.get(&rec.file())
    }

    pub fn audit(&self) -> Result<AuditReport> {
        integrity_audit(&self.db, &self.docs, Some(&self.files))
    }
}

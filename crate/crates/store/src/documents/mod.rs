//! Schema-validated JSON document store for feedback artifacts.
//!
//! Every stored document is a JSON object carrying `instance_id`,
//! `schema_version` and `created_at`. Unknown schema versions are rejected
//! on read.

mod backend;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use aicofe_core::curation::{feedback_id, ComposedFeedback, FeedbackCandidate, FeedbackState};
use aicofe_core::model::{FeedbackRating, InstanceId, UserId};
use aicofe_core::preprocess::RedactionMap;
use aicofe_core::prompt::PromptBundle;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use backend::{DocumentBackend, FsBackend, MemoryBackend};

use crate::error::{Result, StoreError};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Collection {
    FeedbackCandidates,
    ComposedFeedback,
    PromptBundles,
    RedactionMaps,
    FeedbackRatings,
    GenerationResults,
    HistoryEvents,
}

impl Collection {
    pub const ALL: [Collection; 7] = [
        Collection::FeedbackCandidates,
        Collection::ComposedFeedback,
        Collection::PromptBundles,
        Collection::RedactionMaps,
        Collection::FeedbackRatings,
        Collection::GenerationResults,
        Collection::HistoryEvents,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Collection::FeedbackCandidates => "feedback_candidates",
            Collection::ComposedFeedback => "composed_feedback",
            Collection::PromptBundles => "prompt_bundles",
            Collection::RedactionMaps => "redaction_maps",
            Collection::FeedbackRatings => "feedback_ratings",
            Collection::GenerationResults => "generation_results",
            Collection::HistoryEvents => "history_events",
        }
    }

    /// Only redaction maps may be overwritten in place.
    pub fn is_write_once(self) -> bool {
        self != Collection::RedactionMaps
    }

    fn schema(self) -> &'static str {
        match self {
            Collection::FeedbackCandidates => include_str!("../../schemas/feedback_candidates.json"),
            Collection::ComposedFeedback => include_str!("../../schemas/composed_feedback.json"),
            Collection::PromptBundles => include_str!("../../schemas/prompt_bundles.json"),
            Collection::RedactionMaps => include_str!("../../schemas/redaction_maps.json"),
            Collection::FeedbackRatings => include_str!("../../schemas/feedback_ratings.json"),
            Collection::GenerationResults => include_str!("../../schemas/generation_results.json"),
            Collection::HistoryEvents => include_str!("../../schemas/history_events.json"),
        }
    }
}

/// Field filters; `None` matches anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DocFilter {
    pub instance_id: Option<String>,
    pub provider_id: Option<String>,
    pub state: Option<String>,
    pub version: Option<u32>,
}

impl DocFilter {
    pub fn instance(id: &InstanceId) -> Self {
        Self {
            instance_id: Some(id.to_string()),
            ..Self::default()
        }
    }

    pub fn provider(mut self, id: impl Into<String>) -> Self {
        self.provider_id = Some(id.into());
        self
    }

    pub fn state(mut self, state: impl Into<String>) -> Self {
        self.state = Some(state.into());
        self
    }

    pub fn version(mut self, v: u32) -> Self {
        self.version = Some(v);
        self
    }

    fn matches(&self, doc: &Value) -> bool {
        let field = |name: &str, want: &Option<String>| {
            want.as_deref().map_or(true, |w| doc.get(name).and_then(Value::as_str) == Some(w))
        };
        field("instance_id", &self.instance_id)
            && field("provider_id", &self.provider_id)
            && field("state", &self.state)
            && self
                .version
                .map_or(true, |v| doc.get("version").and_then(Value::as_u64) == Some(u64::from(v)))
    }
}

/// A stored document with its exact bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub collection: Collection,
    pub id: String,
    pub raw: String,
    pub body: Value,
}

/// Audit trail entry for curation and delivery actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub id: String,
    pub instance_id: InstanceId,
    pub kind: String,
    pub actor_id: UserId,
    #[serde(default)]
    pub feedback_version: Option<u32>,
    #[serde(default)]
    pub detail: Value,
    pub created_at: DateTime<Utc>,
}

pub struct Documents {
    backend: Arc<dyn DocumentBackend>,
    validators: HashMap<Collection, jsonschema::Validator>,
}

impl Documents {
    pub fn new(backend: Arc<dyn DocumentBackend>) -> Result<Self> {
        let mut validators = HashMap::new();
        for c in Collection::ALL {
            let schema: Value = serde_json::from_str(c.schema())?;
            let v = jsonschema::validator_for(&schema)
                .map_err(|e| StoreError::Schema(format!("{}: {e}", c.as_str())))?;
            validators.insert(c, v);
        }
        Ok(Self { backend, validators })
    }

    pub fn in_memory() -> Self {
        Self::new(Arc::new(MemoryBackend::new())).expect("bundled schemas compile")
    }

    pub fn open_dir(root: impl AsRef<Path>) -> Result<Self> {
        Self::new(Arc::new(FsBackend::open(root)?))
    }

    fn envelope<T: Serialize>(doc: &T, now: DateTime<Utc>) -> Result<Value> {
        let mut value = serde_json::to_value(doc)?;
        let obj: &mut Map<String, Value> = value
            .as_object_mut()
            .ok_or_else(|| StoreError::Schema("documents must be JSON objects".into()))?;
        obj.insert("schema_version".into(), SCHEMA_VERSION.into());
        obj.entry("created_at")
            .or_insert_with(|| now.to_rfc3339_opts(SecondsFormat::Micros, true).into());
        Ok(value)
    }

    /// Checks schema version and shape of a stored or incoming document.
    pub fn check(&self, collection: Collection, doc: &Value) -> Result<()> {
        match doc.get("schema_version").and_then(Value::as_u64) {
            Some(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(StoreError::Schema(format!(
                    "{}: unknown schema_version {v}",
                    collection.as_str()
                )))
            }
            None => return Err(StoreError::Schema(format!("{}: missing schema_version", collection.as_str()))),
        }
        self.validators[&collection]
            .validate(doc)
            .map_err(|e| StoreError::Schema(format!("{}: {e} at {}", collection.as_str(), e.instance_path)))
    }

    fn encode<T: Serialize>(&self, collection: Collection, doc: &T, now: DateTime<Utc>) -> Result<String> {
        let value = Self::envelope(doc, now)?;
        self.check(collection, &value)?;
        Ok(serde_json::to_string(&value)?)
    }

    fn decode(&self, collection: Collection, id: String, raw: String) -> Result<Document> {
        let body: Value = serde_json::from_str(&raw)
            .map_err(|e| StoreError::Schema(format!("{}/{id}: {e}", collection.as_str())))?;
        self.check(collection, &body)?;
        Ok(Document { collection, id, raw, body })
    }

    /// Conditional insert; returns the stored bytes.
    pub fn insert<T: Serialize>(&self, collection: Collection, id: &str, doc: &T, now: DateTime<Utc>) -> Result<String> {
        let raw = self.encode(collection, doc, now)?;
        self.backend.insert(collection.as_str(), id, &raw)?;
        Ok(raw)
    }

    pub fn put<T: Serialize>(&self, collection: Collection, id: &str, doc: &T, now: DateTime<Utc>) -> Result<String> {
        if collection.is_write_once() {
            return Err(StoreError::Conflict(format!("{} is write-once", collection.as_str())));
        }
        let raw = self.encode(collection, doc, now)?;
        self.backend.put(collection.as_str(), id, &raw)?;
        Ok(raw)
    }

    pub fn get_document(&self, collection: Collection, id: &str) -> Result<Option<Document>> {
        self.backend
            .get(collection.as_str(), id)?
            .map(|raw| self.decode(collection, id.to_owned(), raw))
            .transpose()
    }

    pub fn get<T: DeserializeOwned>(&self, collection: Collection, id: &str) -> Result<Option<T>> {
        self.get_document(collection, id)?
            .map(|d| Ok(serde_json::from_value(d.body)?))
            .transpose()
    }

    /// Raw bytes without any checks, for audits.
    pub fn scan_raw(&self, collection: Collection) -> Result<Vec<(String, String)>> {
        self.backend.list(collection.as_str())
    }

    pub fn load_documents(&self, collection: Collection, filter: &DocFilter) -> Result<Vec<Document>> {
        let mut out = Vec::new();
        for (id, raw) in self.backend.list(collection.as_str())? {
            let doc = self.decode(collection, id, raw)?;
            if filter.matches(&doc.body) {
                out.push(doc);
            }
        }
        Ok(out)
    }

    pub fn load<T: DeserializeOwned>(&self, collection: Collection, filter: &DocFilter) -> Result<Vec<T>> {
        self.load_documents(collection, filter)?
            .into_iter()
            .map(|d| Ok(serde_json::from_value(d.body)?))
            .collect()
    }

    // Typed helpers

    pub fn insert_candidate(&self, c: &FeedbackCandidate) -> Result<()> {
        self.insert(Collection::FeedbackCandidates, c.id.as_str(), c, c.created_at).map(drop)
    }

    pub fn candidates(&self, instance: &InstanceId) -> Result<Vec<FeedbackCandidate>> {
        let mut out: Vec<FeedbackCandidate> = self.load(Collection::FeedbackCandidates, &DocFilter::instance(instance))?;
        out.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        Ok(out)
    }

    /// Write-once per (instance, version).
    pub fn insert_composed(&self, f: &ComposedFeedback) -> Result<()> {
        if f.id != feedback_id(&f.instance_id, f.version) {
            return Err(StoreError::Schema(format!("feedback id {} does not match its version", f.id)));
        }
        f.verify()?;
        self.insert(Collection::ComposedFeedback, f.id.as_str(), f, f.created_at)
            .map(drop)
            .map_err(|e| match e {
                StoreError::Conflict(_) => {
                    StoreError::Conflict(format!("version {} of {} already exists", f.version, f.instance_id))
                }
                other => other,
            })
    }

    pub fn composed(&self, instance: &InstanceId, version: u32) -> Result<Option<ComposedFeedback>> {
        self.get(Collection::ComposedFeedback, feedback_id(instance, version).as_str())
    }

    /// All versions of the instance, ascending.
    pub fn composed_versions(&self, instance: &InstanceId) -> Result<Vec<ComposedFeedback>> {
        let mut out: Vec<ComposedFeedback> = self.load(Collection::ComposedFeedback, &DocFilter::instance(instance))?;
        out.sort_by_key(|f| f.version);
        Ok(out)
    }

    /// The only permitted mutation of a composed version: draft to sent.
    pub fn mark_sent(&self, instance: &InstanceId, version: u32, now: DateTime<Utc>) -> Result<ComposedFeedback> {
        let id = feedback_id(instance, version);
        let doc = self
            .get_document(Collection::ComposedFeedback, id.as_str())?
            .ok_or_else(|| StoreError::NotFound(format!("feedback {id}")))?;
        let draft: ComposedFeedback = serde_json::from_value(doc.body)?;
        if draft.state != FeedbackState::Draft {
            return Err(StoreError::Conflict(format!("feedback {id} was already sent")));
        }
        let sent = draft.mark_sent(now)?;
        let raw = self.encode(Collection::ComposedFeedback, &sent, now)?;
        self.backend
            .compare_and_swap(Collection::ComposedFeedback.as_str(), id.as_str(), &doc.raw, &raw)?;
        Ok(sent)
    }

    pub fn insert_rating(&self, r: &FeedbackRating, now: DateTime<Utc>) -> Result<String> {
        let id = format!("{}-{}", r.feedback_version_id, r.rater_id);
        self.insert(Collection::FeedbackRatings, &id, r, now)
            .map_err(|e| match e {
                StoreError::Conflict(_) => {
                    StoreError::Conflict(format!("{} already rated {}", r.rater_id, r.feedback_version_id))
                }
                other => other,
            })?;
        Ok(id)
    }

    pub fn ratings(&self, instance: &InstanceId) -> Result<Vec<FeedbackRating>> {
        self.load(Collection::FeedbackRatings, &DocFilter::instance(instance))
    }

    pub fn put_redaction_map(&self, map: &RedactionMap, now: DateTime<Utc>) -> Result<()> {
        self.put(Collection::RedactionMaps, &map.id(), map, now).map(drop)
    }

    pub fn redaction_map(&self, instance: &InstanceId) -> Result<Option<RedactionMap>> {
        self.get(Collection::RedactionMaps, &RedactionMap::new(instance.clone()).id())
    }

    /// Content-addressed; storing the same bundle twice is a no-op.
    pub fn insert_bundle(&self, bundle: &PromptBundle, now: DateTime<Utc>) -> Result<String> {
        let id = format!("{}-{}", bundle.instance_id, &bundle.text_digest()[..16]);
        match self.insert(Collection::PromptBundles, &id, bundle, now) {
            Ok(_) | Err(StoreError::Conflict(_)) => Ok(id),
            Err(e) => Err(e),
        }
    }

    pub fn insert_generation_result<T: Serialize>(&self, id: &str, result: &T, now: DateTime<Utc>) -> Result<()> {
        self.insert(Collection::GenerationResults, id, result, now).map(drop)
    }

    pub fn insert_history(&self, event: &HistoryEvent) -> Result<()> {
        self.insert(Collection::HistoryEvents, &event.id, event, event.created_at).map(drop)
    }

    pub fn history(&self, instance: &InstanceId) -> Result<Vec<HistoryEvent>> {
        let mut out: Vec<HistoryEvent> = self.load(Collection::HistoryEvents, &DocFilter::instance(instance))?;
        out.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        Ok(out)
    }
}

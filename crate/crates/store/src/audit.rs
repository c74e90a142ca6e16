//! Cross-store integrity audit.

use std::collections::BTreeMap;

use aicofe_core::curation::{compute_breakdown, ComposedFeedback};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::documents::{Collection, Documents, SCHEMA_VERSION};
use crate::error::{Result, StoreError};
use crate::files::FileService;
use crate::relational::Database;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub collection: String,
    pub id: String,
    pub detail: String,
}

/// Machine-readable audit outcome; `clean` is true when every list is empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub clean: bool,
    pub documents_scanned: usize,
    pub per_collection: BTreeMap<String, usize>,
    pub orphans: Vec<Finding>,
    pub unknown_schema_versions: Vec<Finding>,
    pub invalid_documents: Vec<Finding>,
    pub stale_breakdowns: Vec<Finding>,
    pub recordings_checked: usize,
    pub file_problems: Vec<Finding>,
}

pub fn integrity_audit(db: &Database, docs: &Documents, files: Option<&FileService>) -> Result<AuditReport> {
    let mut report = AuditReport {
        clean: true,
        documents_scanned: 0,
        per_collection: BTreeMap::new(),
        orphans: Vec::new(),
        unknown_schema_versions: Vec::new(),
        invalid_documents: Vec::new(),
        stale_breakdowns: Vec::new(),
        recordings_checked: 0,
        file_problems: Vec::new(),
    };
    let instances: std::collections::BTreeSet<String> =
        db.read(|r| Ok(r.list_instances(None)?.into_iter().map(|i| i.id.0).collect()))?;

    for c in Collection::ALL {
        let raw = docs.scan_raw(c)?;
        report.documents_scanned += raw.len();
        report.per_collection.insert(c.as_str().to_owned(), raw.len());
        for (id, body) in raw {
            let finding = |detail: String| Finding {
                collection: c.as_str().to_owned(),
                id: id.clone(),
                detail,
            };
            let value: Value = match serde_json::from_str(&body) {
                Ok(v) => v,
                Err(e) => {
                    report.invalid_documents.push(finding(e.to_string()));
                    continue;
                }
            };
            match value.get("instance_id").and_then(Value::as_str) {
                Some(i) if instances.contains(i) => {}
                Some(i) => report.orphans.push(finding(format!("instance {i} does not exist"))),
                None => report.orphans.push(finding("no instance_id".into())),
            }
            match value.get("schema_version").and_then(Value::as_u64) {
                Some(SCHEMA_VERSION) => {}
                other => {
                    report.unknown_schema_versions.push(finding(format!("schema_version {other:?}")));
                    continue;
                }
            }
            if let Err(e) = docs.check(c, &value) {
                report.invalid_documents.push(finding(e.to_string()));
                continue;
            }
            if c == Collection::ComposedFeedback {
                match serde_json::from_value::<ComposedFeedback>(value) {
                    Ok(f) if !compute_breakdown(&f.sentences).approx_eq(&f.breakdown, 1e-9) => {
                        report.stale_breakdowns.push(finding("stored breakdown differs from recount".into()))
                    }
                    Ok(_) => {}
                    Err(e) => report.invalid_documents.push(finding(e.to_string())),
                }
            }
        }
    }

    if let Some(files) = files {
        for rec in db.read(|r| r.list_recordings())? {
            report.recordings_checked += 1;
            match files.verify(&rec.file()) {
                Ok(()) => {}
                Err(StoreError::NotFound(_)) => report.file_problems.push(Finding {
                    collection: "recordings".into(),
                    id: rec.id.to_string(),
                    detail: format!("missing file {}", rec.rel_path),
                }),
                Err(e) => report.file_problems.push(Finding {
                    collection: "recordings".into(),
                    id: rec.id.to_string(),
                    detail: e.to_string(),
                }),
            }
        }
    }

    report.clean = report.orphans.is_empty()
        && report.unknown_schema_versions.is_empty()
        && report.invalid_documents.is_empty()
        && report.stale_breakdowns.is_empty()
        && report.file_problems.is_empty();
    Ok(report)
}

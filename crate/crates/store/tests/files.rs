//! Recording storage, checksum verification and consent-gated linking.

mod common;

use aicofe_store::{MediaKind, Store, StoreError};
use chrono::Utc;
use rand::{RngCore, SeedableRng};

fn store() -> (Store, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open_dir(dir.path()).unwrap();
    store
        .db
        .write(|r| {
            r.insert_rubric(&common::rubric())?;
            r.insert_course(&aicofe_core::model::Course {
                id: "c1".into(),
                name: "Communication".into(),
                language: aicofe_core::model::Language::En,
                group_ids: Default::default(),
                rubric_ids: Default::default(),
                prompt_template_id: None,
                material_refs: vec![],
                ui_locale: None,
            })?;
            for s in ["s1", "s2"] {
                r.insert_user(&common::user(s, aicofe_core::model::Role::Student))?;
            }
            r.insert_group(&aicofe_core::model::Group {
                id: "g1".into(),
                course_id: "c1".into(),
                name: "G".into(),
                member_ids: Default::default(),
            })?;
            r.add_member(&"g1".into(), &"s1".into(), true)?;
            r.add_member(&"g1".into(), &"s2".into(), false)?;
            r.insert_instance(&common::instance("i1", "s1"))?;
            r.insert_instance(&common::instance("i2", "s2"))
        })
        .unwrap();
    (store, dir)
}

fn blob() -> Vec<u8> {
    let mut bytes = vec![0u8; 1 << 20];
    rand::rngs::StdRng::seed_from_u64(5).fill_bytes(&mut bytes);
    bytes
}

#[test]
fn one_mebibyte_round_trip() {
    let (store, _dir) = store();
    let bytes = blob();
    let rec = store.link_recording(&"i1".into(), MediaKind::Video, &bytes, "mp4", Utc::now()).unwrap();
    assert_eq!(rec.byte_size, 1 << 20);
    let back = store.recording_bytes(&"i1".into()).unwrap();
    assert_eq!(aicofe_store::files::checksum(&back), aicofe_store::files::checksum(&bytes));
}

#[test]
fn corruption_is_detected() {
    let (store, dir) = store();
    let rec = store.link_recording(&"i1".into(), MediaKind::Video, &blob(), "mp4", Utc::now()).unwrap();
    let path = dir.path().join("files").join(&rec.rel_path);
    let mut data = std::fs::read(&path).unwrap();
    data[1000] ^= 0xff;
    std::fs::write(&path, data).unwrap();
    assert!(matches!(store.recording_bytes(&"i1".into()), Err(StoreError::Integrity(_))));
    let report = store.audit().unwrap();
    assert_eq!(report.file_problems.len(), 1);
    assert!(!report.clean);
}

#[test]
fn linking_requires_consent() {
    let (store, _dir) = store();
    let r = store.link_recording(&"i2".into(), MediaKind::Audio, b"abc", "m4a", Utc::now());
    assert!(matches!(r, Err(StoreError::Domain(_))));
    assert!(store.db.read(|r| r.active_recording(&"i2".into())).unwrap().is_none());
}

#[test]
fn linked_file_appears_in_instance_view() {
    let (store, _dir) = store();
    let first = store.link_recording(&"i1".into(), MediaKind::Video, b"first", "mp4", Utc::now()).unwrap();
    let second = store.link_recording(&"i1".into(), MediaKind::Video, b"second", "mp4", Utc::now()).unwrap();
    let inst = store.db.read(|r| r.get_instance(&"i1".into())).unwrap();
    assert_eq!(inst.recording_ref, Some(second.id.clone()));
    assert_ne!(first.id, second.id);
    assert_eq!(store.recording_bytes(&"i1".into()).unwrap(), b"second");
    assert_eq!(store.db.read(|r| r.list_recordings()).unwrap().iter().filter(|r| r.active).count(), 1);
}

#![allow(dead_code)]

use std::collections::BTreeMap;

use aicofe_core::model::{
    Course, EvaluationInstance, Group, InstanceStatus, Language, Role, Rubric, RubricItem, User,
};
use aicofe_store::Database;

pub fn user(id: &str, role: Role) -> User {
    User {
        id: id.into(),
        display_name: format!("User {id}"),
        email: None,
        role,
        course_ids: Default::default(),
    }
}

pub fn rubric() -> Rubric {
    Rubric {
        id: "r1".into(),
        title: "Oral presentation".into(),
        revision: 1,
        items: ["voice", "structure", "slides"]
            .iter()
            .map(|i| RubricItem {
                id: (*i).into(),
                title: i.to_uppercase(),
                level_descriptions: (1..=5).map(|l| (l, format!("{i} level {l}"))).collect(),
                relevance_terms: [i.to_string()].into_iter().collect(),
            })
            .collect(),
        scale_min: 1,
        scale_max: 5,
    }
}

pub fn instance(id: &str, subject: &str) -> EvaluationInstance {
    EvaluationInstance {
        id: id.into(),
        course_id: "c1".into(),
        rubric_id: "r1".into(),
        subject_student_id: subject.into(),
        session_label: "Week 3".into(),
        recording_ref: None,
        status: InstanceStatus::Collecting,
    }
}

/// One course, one rubric, a teacher, four students in one group, instance `i1` for `s1`.
pub fn seeded() -> Database {
    let db = Database::open_in_memory().unwrap();
    db.migrate().unwrap();
    db.write(|r| {
        r.insert_rubric(&rubric())?;
        r.insert_course(&Course {
            id: "c1".into(),
            name: "Communication".into(),
            language: Language::Es,
            group_ids: Default::default(),
            rubric_ids: ["r1".into()].into_iter().collect(),
            prompt_template_id: None,
            material_refs: vec![],
            ui_locale: Some("es-CL".into()),
        })?;
        r.insert_user(&user("t1", Role::Teacher))?;
        r.add_user_to_course(&"c1".into(), &"t1".into())?;
        for s in ["s1", "s2", "s3", "s4"] {
            r.insert_user(&user(s, Role::Student))?;
        }
        r.insert_group(&Group {
            id: "g1".into(),
            course_id: "c1".into(),
            name: "Group 1".into(),
            member_ids: ["s1", "s2", "s3", "s4"].iter().map(|s| (*s).into()).collect(),
        })?;
        r.insert_instance(&instance("i1", "s1"))
    })
    .unwrap();
    db
}

pub fn scores(pairs: &[(&str, i32)]) -> BTreeMap<aicofe_core::model::ItemId, i32> {
    pairs.iter().map(|(i, s)| ((*i).into(), *s)).collect()
}

//! Demo data for local runs, examples and tests.

use std::collections::{BTreeMap, BTreeSet};

use aicofe_core::model::{
    Course, EvaluationInstance, EvaluatorKind, Group, InstanceStatus, ItemId, Language, Material, Role, Rubric,
    RubricItem, User, UserId,
};
use aicofe_core::prompt::PromptTemplate;
use aicofe_core::validation::ValidationPolicy;

use crate::error::Result;
use crate::service::Service;
use crate::workflow::{EvaluationSubmission, SubmissionReceipt};

pub const COURSE: &str = "c1";
pub const RUBRIC: &str = "r1";
pub const GROUP: &str = "g1";
pub const INSTANCE: &str = "i1";
pub const ADMIN: &str = "admin";
pub const TEACHER: &str = "t1";
pub const SUBJECT: &str = "s1";
pub const STUDENTS: [&str; 4] = ["s1", "s2", "s3", "s4"];

/// Demo bearer tokens, one per fixture user.
pub const TOKENS: [(&str, &str); 6] = [
    ("admin", "demo-admin-token-0001"),
    ("t1", "demo-teacher-token-0001"),
    ("s1", "demo-student-s1-token"),
    ("s2", "demo-student-s2-token"),
    ("s3", "demo-student-s3-token"),
    ("s4", "demo-student-s4-token"),
];

pub fn token_for(user: &str) -> &'static str {
    TOKENS.iter().find(|(u, _)| *u == user).map(|(_, t)| *t).expect("fixture user")
}

fn user(id: &str, name: &str, role: Role) -> User {
    User {
        id: id.into(),
        display_name: name.into(),
        email: Some(format!("{id}@uni.example")),
        role,
        course_ids: BTreeSet::new(),
    }
}

pub fn users() -> Vec<User> {
    vec![
        user(ADMIN, "Administración", Role::Admin),
        user(TEACHER, "Ana García", Role::Teacher),
        user("s1", "Lucía Pérez", Role::Student),
        user("s2", "José Núñez", Role::Student),
        user("s3", "Sofía Álvarez", Role::Student),
        user("s4", "Tomás Ibáñez", Role::Student),
    ]
}

fn item(id: &str, title: &str, terms: &[&str]) -> RubricItem {
    RubricItem {
        id: id.into(),
        title: title.into(),
        level_descriptions: (1..=5).map(|l| (l, format!("{title}: nivel {l}"))).collect(),
        relevance_terms: terms.iter().map(|t| t.to_string()).collect(),
    }
}

pub fn rubric() -> Rubric {
    Rubric {
        id: RUBRIC.into(),
        title: "Presentación oral".into(),
        revision: 1,
        items: vec![
            item("voice", "Voz y dicción", &["voz", "volumen", "dicción", "tono", "voice"]),
            item("structure", "Estructura", &["estructura", "introducción", "conclusión", "orden", "ideas"]),
            item("slides", "Diapositivas", &["diapositiva", "slide", "visual", "texto", "imagen"]),
        ],
        scale_min: 1,
        scale_max: 5,
    }
}

pub fn course() -> Course {
    Course {
        id: COURSE.into(),
        name: "Comunicación oral".into(),
        language: Language::Es,
        group_ids: BTreeSet::new(),
        rubric_ids: BTreeSet::new(),
        prompt_template_id: None,
        material_refs: Vec::new(),
        ui_locale: Some("es-ES".into()),
    }
}

pub fn instance() -> EvaluationInstance {
    EvaluationInstance {
        id: INSTANCE.into(),
        course_id: COURSE.into(),
        rubric_id: RUBRIC.into(),
        subject_student_id: SUBJECT.into(),
        session_label: "Sesión 1".into(),
        recording_ref: None,
        status: InstanceStatus::Collecting,
    }
}

/// Users, tokens, course, rubric, group, template, policy, material and one instance.
pub fn seed_base(svc: &Service) -> Result<()> {
    let course = course();
    svc.store().db.write(|r| {
        r.insert_rubric(&rubric())?;
        r.insert_course(&course)?;
        r.assign_rubric(&course.id, &RUBRIC.into())?;
        for u in users() {
            r.insert_user(&u)?;
        }
        for (u, t) in TOKENS {
            r.insert_token(t, &u.into(), None)?;
        }
        r.add_user_to_course(&course.id, &TEACHER.into())?;
        r.insert_group(&Group {
            id: GROUP.into(),
            course_id: course.id.clone(),
            name: "Grupo A".into(),
            member_ids: BTreeSet::new(),
        })?;
        for s in STUDENTS {
            r.add_member(&GROUP.into(), &s.into(), s == SUBJECT)?;
        }
        let template = PromptTemplate::standard("c1-template", course.id.clone(), course.language);
        r.upsert_template(&template)?;
        r.set_course_template(&course.id, &template.id)?;
        r.upsert_policy(&course.id, &ValidationPolicy::new(course.language).with_restricted(["suspenso", "inútil"]))?;
        r.insert_material(&Material {
            id: "m1".into(),
            course_id: course.id.clone(),
            title: "Guía de presentaciones".into(),
            body: "Una buena presentación abre con una introducción breve, desarrolla tres ideas y cierra con una \
                   conclusión que retoma la pregunta inicial. Las diapositivas apoyan el discurso sin repetirlo."
                .into(),
        })?;
        r.insert_instance(&instance())
    })?;
    Ok(())
}

/// The four demo evaluations: two peers, the teacher and the subject's self assessment.
pub fn evaluations() -> Vec<(&'static str, EvaluationSubmission)> {
    let scores = |v: i32, s: i32, d: i32| -> BTreeMap<ItemId, i32> {
        [("voice", v), ("structure", s), ("slides", d)].into_iter().map(|(k, v)| (k.into(), v)).collect()
    };
    let comments = |pairs: &[(&str, &str)]| -> BTreeMap<ItemId, String> {
        pairs.iter().map(|(k, v)| ((*k).into(), (*v).into())).collect()
    };
    let sub = |kind, s, c| EvaluationSubmission {
        instance_id: INSTANCE.into(),
        evaluator_kind: Some(kind),
        item_scores: s,
        item_comments: c,
        events: Vec::new(),
    };
    vec![
        (
            "s2",
            sub(
                EvaluatorKind::Peer,
                scores(4, 3, 5),
                comments(&[
                    ("voice", "Lucía habló con una voz clara y buen volumen."),
                    ("slides", "Las diapositivas tenían imágenes muy bien elegidas."),
                ]),
            ),
        ),
        (
            "s3",
            sub(
                EvaluatorKind::Peer,
                scores(3, 2, 4),
                comments(&[
                    ("structure", "Faltó una conclusión; las ideas no seguían un orden claro."),
                    ("voice", "Me gustó mucho, Pérez lo hizo bien."),
                ]),
            ),
        ),
        (
            TEACHER,
            sub(
                EvaluatorKind::Teacher,
                scores(4, 3, 4),
                comments(&[("structure", "La introducción fue buena, pero la estructura se pierde en la parte central.")]),
            ),
        ),
        (
            SUBJECT,
            sub(
                EvaluatorKind::SelfAssessment,
                scores(5, 4, 4),
                comments(&[("slides", "Creo que el texto de las diapositivas era demasiado largo.")]),
            ),
        ),
    ]
}

pub fn seed_evaluations(svc: &Service) -> Result<Vec<SubmissionReceipt>> {
    evaluations()
        .into_iter()
        .map(|(who, sub)| {
            let actor = svc.user(&UserId::new(who))?;
            svc.submit_evaluation(&actor, sub)
        })
        .collect()
}

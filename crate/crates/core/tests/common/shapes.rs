//! Random small knowledge bases and templates for the expansion count law.

use guideqa::classify::IntentCategory;
use guideqa::gen::{self, AnswerRule, TemplateRecord};
use guideqa::kb::{Affinity, EntityKind, KnowledgeBase};
use proptest::prelude::*;
use serde_json::json;

#[derive(Debug, Clone)]
pub struct KbShape {
    pub parameters: usize,
    terms: usize,
    components: usize,
    relationships: usize,
    howto: usize,
    goal: bool,
    getting_started: bool,
    sys_req: bool,
}

pub fn kb_shape() -> impl Strategy<Value = KbShape> {
    (
        0..=5usize,
        0..=5usize,
        0..=5usize,
        0..=5usize,
        0..=5usize,
        any::<[bool; 3]>(),
    )
        .prop_map(|(p, t, c, r, h, [g, s, q])| KbShape {
            parameters: p,
            terms: t,
            components: c,
            relationships: r,
            howto: h,
            goal: g,
            getting_started: s,
            sys_req: q,
        })
}

pub fn build_kb(shape: &KbShape) -> KnowledgeBase {
    let mut entities = Vec::new();
    for i in 0..shape.parameters {
        entities.push(
            json!({"id": format!("p{i}"), "kind": "parameter", "name": format!("param {i}"),
            "definition": "d", "unit": "m", "default_value": "0"}),
        );
    }
    for (kind, prefix, n) in [
        ("term", "t", shape.terms),
        ("component", "c", shape.components),
        ("relationship", "r", shape.relationships),
    ] {
        for i in 0..n {
            entities.push(json!({"id": format!("{prefix}{i}"), "kind": kind,
                "name": format!("{kind} {i}"), "definition": "d"}));
        }
    }
    let mut sections = Vec::new();
    for i in 0..shape.howto {
        sections.push(
            json!({"id": format!("h{i}"), "title": format!("do thing {i}"),
            "affinity": "howto", "body": "b"}),
        );
    }
    for (flag, affinity) in [
        (shape.goal, "goal"),
        (shape.getting_started, "getting_started"),
        (shape.sys_req, "system_requirements"),
    ] {
        if flag {
            sections.push(
                json!({"id": affinity, "title": affinity, "affinity": affinity, "body": "b"}),
            );
        }
    }
    let text = json!({"entities": entities, "sections": sections}).to_string();
    KnowledgeBase::from_json_str(&text).expect("generated kb is valid")
}

#[derive(Debug, Clone)]
pub struct TemplateShape {
    rule: AnswerRule,
    answer_kind: &'static str,
    extra_slot: Option<&'static str>,
    groups: Vec<usize>,
}

const ENTITY_KINDS: [&str; 4] = ["Parameter", "Term", "Component", "Relationship"];
const ANY_KINDS: [&str; 5] = ["Parameter", "Term", "Component", "Relationship", "Section"];

pub fn template_shape() -> impl Strategy<Value = TemplateShape> {
    let rule = prop_oneof![
        Just(AnswerRule::Definition),
        Just(AnswerRule::DefaultValue),
        Just(AnswerRule::Units),
        Just(AnswerRule::SectionBody),
        Just(AnswerRule::GoalText),
        Just(AnswerRule::SysReqText),
        Just(AnswerRule::GettingStartedText),
    ];
    (
        rule,
        0..4usize,
        proptest::option::of(0..5usize),
        proptest::collection::vec(1..4usize, 0..3),
    )
        .prop_map(|(rule, k, extra, groups)| {
            let answer_kind = match rule {
                AnswerRule::Definition => ENTITY_KINDS[k],
                AnswerRule::DefaultValue | AnswerRule::Units => "Parameter",
                AnswerRule::SectionBody => "Section",
                _ => "",
            };
            TemplateShape {
                rule,
                answer_kind,
                extra_slot: extra.map(|i| ANY_KINDS[i]),
                groups,
            }
        })
}

pub fn intent_for(rule: AnswerRule) -> IntentCategory {
    IntentCategory::ALL
        .into_iter()
        .find(|&i| AnswerRule::for_intent(i) == rule)
        .unwrap()
}

pub fn count(kb: &KnowledgeBase, kind: &str) -> usize {
    match kind {
        "Parameter" => kb.entities_of(EntityKind::Parameter).len(),
        "Term" => kb.entities_of(EntityKind::Term).len(),
        "Component" => kb.entities_of(EntityKind::Component).len(),
        "Relationship" => kb.entities_of(EntityKind::Relationship).len(),
        _ => kb.sections_of(Affinity::HowTo).len(),
    }
}

/// Expands a template built from `t` over the KB built from `shape`;
/// returns (actual expansion size, analytic product).
pub fn expansion_counts(shape: &KbShape, t: &TemplateShape) -> (usize, usize) {
    let kb = build_kb(shape);
    let mut pattern = String::from("What");
    for (g, arms) in t.groups.iter().enumerate() {
        let alts: Vec<String> = (0..*arms).map(|a| format!("w{g}x{a}")).collect();
        pattern.push_str(&format!(" ({})", alts.join("|")));
    }
    let mut product: usize = t.groups.iter().product();
    let answer_slot = if t.answer_kind.is_empty() {
        let fixed = match t.rule {
            AnswerRule::GoalText => shape.goal,
            AnswerRule::SysReqText => shape.sys_req,
            _ => shape.getting_started,
        };
        if !fixed {
            product = 0;
        }
        None
    } else {
        pattern.push_str(&format!(" {{a:{}}}", t.answer_kind));
        product *= count(&kb, t.answer_kind);
        Some("a".to_string())
    };
    if let Some(kind) = t.extra_slot {
        pattern.push_str(&format!(" with {{b:{kind}}}"));
        product *= count(&kb, kind);
    }
    pattern.push('?');
    let template = gen::QuestionTemplate::new(TemplateRecord {
        id: "t".into(),
        intent: intent_for(t.rule),
        pattern,
        answer_rule: t.rule,
        answer_slot,
    })
    .expect("generated template is valid");
    let out = gen::expand(&template, &kb);
    for e in &out {
        assert!(kb.resolves(&e.expected_answer_id));
        assert!(!e.question.contains('{'), "residual slot in {}", e.question);
    }
    (out.len(), product)
}

//! Second stage of answering: bind question keywords to knowledge-base
//! records, build the intent's rule-based query and compose the answer.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{content_words, IntentCategory};
use crate::kb::{normalized_tokens, Affinity, EntityKind, GuideSection, KnowledgeBase, Role};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("{intent} question needs a {needs} but none was found")]
    MissingEntity {
        intent: IntentCategory,
        needs: &'static str,
    },
    #[error("record \"{0}\" not found in the knowledge base")]
    RecordNotFound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub intent: IntentCategory,
    pub bindings: BTreeMap<Role, String>,
    pub raw_question: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerPayload {
    pub text: String,
    pub source_ids: Vec<String>,
    pub intent: IntentCategory,
}

/// A matched run of question tokens, `[start, start + len)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub len: usize,
    pub entity_id: String,
    pub kind: EntityKind,
}

impl Span {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

/// Longest non-overlapping surface matches in the normalized question,
/// returned in question order.
pub fn extract_spans(kb: &KnowledgeBase, question: &str) -> Vec<Span> {
    let tokens = normalized_tokens(question);
    let mut candidates = Vec::new();
    for start in 0..tokens.len() {
        let max_len = kb.longest_surface().min(tokens.len() - start);
        for len in 1..=max_len {
            let surface = tokens[start..start + len].join(" ");
            if let Some(ids) = kb.surface_index().get(&surface) {
                // index lists are priority-ordered; the head wins the span
                let id = &ids[0];
                let kind = kb.entity(id).expect("indexed entity").kind;
                candidates.push(Span {
                    start,
                    len,
                    entity_id: id.clone(),
                    kind,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.len
            .cmp(&a.len)
            .then(a.kind.priority().cmp(&b.kind.priority()))
            .then_with(|| a.entity_id.cmp(&b.entity_id))
            .then(a.start.cmp(&b.start))
    });
    let mut chosen: Vec<Span> = Vec::new();
    for c in candidates {
        if chosen.iter().all(|s| !s.overlaps(&c)) {
            chosen.push(c);
        }
    }
    chosen.sort_by_key(|s| s.start);
    chosen
}

/// One binding per entity role; the leftmost match of each kind wins.
pub fn extract_entities(kb: &KnowledgeBase, question: &str) -> BTreeMap<Role, String> {
    let mut out = BTreeMap::new();
    for span in extract_spans(kb, question) {
        out.entry(span.kind.role()).or_insert(span.entity_id);
    }
    out
}

/// The how-to section whose title shares the most content words with the
/// question; ties go to the lowest id.
pub fn match_section<'a>(kb: &'a KnowledgeBase, question: &str) -> Option<&'a GuideSection> {
    let words: BTreeSet<String> = content_words(question).into_iter().collect();
    let mut best: Option<(usize, &GuideSection)> = None;
    for section in kb.sections_of(Affinity::HowTo) {
        let title: BTreeSet<String> = content_words(&section.title).into_iter().collect();
        let overlap = title.intersection(&words).count();
        if overlap > 0 && best.is_none_or(|(b, _)| overlap > b) {
            best = Some((overlap, section));
        }
    }
    best.map(|(_, s)| s)
}

const DEFINITION_ROLES: [Role; 4] = [
    Role::Parameter,
    Role::Component,
    Role::Term,
    Role::Relationship,
];

pub fn build_query(
    kb: &KnowledgeBase,
    intent: IntentCategory,
    bindings: &BTreeMap<Role, String>,
    question: &str,
) -> Result<Query, QueryError> {
    if question.trim().is_empty() {
        return Err(QueryError::EmptyQuestion);
    }
    let pick = |roles: &[Role], needs: &'static str| {
        roles
            .iter()
            .find_map(|r| bindings.get(r).map(|id| (*r, id.clone())))
            .ok_or(QueryError::MissingEntity { intent, needs })
    };
    let mut query_bindings = BTreeMap::new();
    match intent {
        IntentCategory::Definition => {
            let (role, id) = pick(&DEFINITION_ROLES, "defined entity")?;
            query_bindings.insert(role, id);
        }
        IntentCategory::DefaultValue | IntentCategory::Units => {
            let (role, id) = pick(&[Role::Parameter], "parameter")?;
            query_bindings.insert(role, id);
        }
        IntentCategory::HowTo => {
            if let Some(section) = match_section(kb, question) {
                query_bindings.insert(Role::Section, section.id.clone());
            }
        }
        IntentCategory::Goal
        | IntentCategory::GettingStarted
        | IntentCategory::SystemRequirements => {}
    }
    Ok(Query {
        intent,
        bindings: query_bindings,
        raw_question: question.to_string(),
    })
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Text of the fallback pointer answer and the sections whose links it
/// lists.
pub fn pointer_answer(kb: &KnowledgeBase) -> (String, Vec<String>) {
    let mut links = Vec::new();
    let mut sources = Vec::new();
    for s in kb.sections() {
        if let Some(link) = &s.link {
            if !links.contains(link) {
                links.push(link.clone());
                sources.push(s.id.clone());
            }
        }
    }
    if links.is_empty() {
        return ("Please consult the User Guide.".to_string(), sources);
    }
    let mut text = String::from("That is covered in the User Guide:");
    for link in &links {
        text.push_str("\n- ");
        text.push_str(link);
    }
    (text, sources)
}

pub fn execute(kb: &KnowledgeBase, query: &Query) -> Result<AnswerPayload, QueryError> {
    let entity = |role: Role| {
        let id = query
            .bindings
            .get(&role)
            .ok_or_else(|| QueryError::RecordNotFound(format!("<{role} binding>")))?;
        kb.entity(id)
            .ok_or_else(|| QueryError::RecordNotFound(id.clone()))
    };
    let fixed = |affinity: Affinity| {
        kb.sections_of(affinity)
            .first()
            .map(|s| (s.body.clone(), vec![s.id.clone()]))
            .ok_or_else(|| QueryError::RecordNotFound(format!("<{affinity:?} section>")))
    };

    let (text, source_ids) = match query.intent {
        IntentCategory::Definition => {
            let role = DEFINITION_ROLES
                .into_iter()
                .find(|r| query.bindings.contains_key(r))
                .ok_or_else(|| QueryError::RecordNotFound("<definition binding>".into()))?;
            let e = entity(role)?;
            let mut text = format!("{}: {}", capitalize(&e.name), e.definition);
            if let Some(unit) = &e.unit {
                text.push_str(&format!(" ({unit})"));
            }
            (text, vec![e.id.clone()])
        }
        IntentCategory::DefaultValue => {
            let e = entity(Role::Parameter)?;
            let (value, unit) = e
                .default_value
                .as_ref()
                .zip(e.unit.as_ref())
                .ok_or_else(|| QueryError::RecordNotFound(e.id.clone()))?;
            (
                format!("{}: {} {}", e.name, value, unit),
                vec![e.id.clone()],
            )
        }
        IntentCategory::Units => {
            let e = entity(Role::Parameter)?;
            let unit = e
                .unit
                .as_ref()
                .ok_or_else(|| QueryError::RecordNotFound(e.id.clone()))?;
            (format!("{}: {}", e.name, unit), vec![e.id.clone()])
        }
        IntentCategory::Goal => fixed(Affinity::Goal)?,
        IntentCategory::GettingStarted => fixed(Affinity::GettingStarted)?,
        IntentCategory::SystemRequirements => fixed(Affinity::SystemRequirements)?,
        IntentCategory::HowTo => match query.bindings.get(&Role::Section) {
            Some(id) => {
                let s = kb
                    .section(id)
                    .ok_or_else(|| QueryError::RecordNotFound(id.clone()))?;
                let mut text = s.body.clone();
                if let Some(link) = &s.link {
                    text.push_str("\nSee: ");
                    text.push_str(link);
                }
                (text, vec![s.id.clone()])
            }
            None => pointer_answer(kb),
        },
    };
    Ok(AnswerPayload {
        text,
        source_ids,
        intent: query.intent,
    })
}

//! The design-knowledge base distilled from a User Guide.
//!
//! A knowledge file is a single JSON document holding ontology entities
//! (terms, parameters, components, relationships) and guide sections. Loading
//! validates every invariant and builds a surface index so that any name or
//! synonym resolves to its entity ids.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error for \"{id}\": {reason}")]
    Validation { id: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Term,
    Parameter,
    Component,
    Relationship,
}

impl EntityKind {
    /// Rank used to break ties between entities sharing a surface.
    /// Lower ranks win.
    pub fn priority(self) -> u8 {
        match self {
            EntityKind::Parameter => 0,
            EntityKind::Component => 1,
            EntityKind::Term => 2,
            EntityKind::Relationship => 3,
        }
    }

    pub fn role(self) -> Role {
        match self {
            EntityKind::Term => Role::Term,
            EntityKind::Parameter => Role::Parameter,
            EntityKind::Component => Role::Component,
            EntityKind::Relationship => Role::Relationship,
        }
    }

    pub const ALL: [EntityKind; 4] = [
        EntityKind::Term,
        EntityKind::Parameter,
        EntityKind::Component,
        EntityKind::Relationship,
    ];
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntityKind::Term => "Term",
            EntityKind::Parameter => "Parameter",
            EntityKind::Component => "Component",
            EntityKind::Relationship => "Relationship",
        };
        f.write_str(s)
    }
}

/// What a binding refers to: one of the entity kinds, or a guide section.
/// Doubles as the slot KIND in question templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Parameter,
    Component,
    Term,
    Relationship,
    Section,
}

impl Role {
    pub fn entity_kind(self) -> Option<EntityKind> {
        match self {
            Role::Term => Some(EntityKind::Term),
            Role::Parameter => Some(EntityKind::Parameter),
            Role::Component => Some(EntityKind::Component),
            Role::Relationship => Some(EntityKind::Relationship),
            Role::Section => None,
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s.to_ascii_lowercase().as_str() {
            "term" => Some(Role::Term),
            "parameter" => Some(Role::Parameter),
            "component" => Some(Role::Component),
            "relationship" => Some(Role::Relationship),
            "section" => Some(Role::Section),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.entity_kind() {
            Some(kind) => kind.fmt(f),
            None => f.write_str("Section"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OntologyEntity {
    pub id: String,
    pub kind: EntityKind,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub definition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_value: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub applies_to: Vec<String>,
}

impl OntologyEntity {
    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str()).chain(self.synonyms.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affinity {
    #[serde(rename = "howto")]
    HowTo,
    GettingStarted,
    Goal,
    SystemRequirements,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuideSection {
    pub id: String,
    pub title: String,
    pub affinity: Affinity,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

/// On-disk layout of a knowledge file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<u64>,
    #[serde(default)]
    pub entities: Vec<OntologyEntity>,
    #[serde(default)]
    pub sections: Vec<GuideSection>,
}

/// Lowercases, strips punctuation at token edges and collapses whitespace.
pub fn normalize(text: &str) -> String {
    normalized_tokens(text).join(" ")
}

/// The tokens of [`normalize`], without joining them.
pub fn normalized_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|tok| {
            tok.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// A validated, indexed knowledge base. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    version: u64,
    entities: Vec<OntologyEntity>,
    sections: Vec<GuideSection>,
    entity_pos: BTreeMap<String, usize>,
    section_pos: BTreeMap<String, usize>,
    surface_index: BTreeMap<String, Vec<String>>,
    longest_surface: usize,
}

impl KnowledgeBase {
    pub fn from_file(file: KnowledgeFile) -> Result<Self, KbError> {
        let KnowledgeFile {
            version,
            entities,
            sections,
        } = file;

        let mut ids = HashSet::new();
        let mut entity_pos = BTreeMap::new();
        for (pos, e) in entities.iter().enumerate() {
            let fail = |reason: &str| KbError::Validation {
                id: e.id.clone(),
                reason: reason.to_string(),
            };
            if e.id.trim().is_empty() {
                return Err(fail("empty id"));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(fail("duplicate id"));
            }
            if e.surfaces().any(|s| normalize(s).is_empty()) {
                return Err(fail("name or synonym is empty after normalization"));
            }
            if e.definition.trim().is_empty() {
                return Err(fail("empty definition"));
            }
            match e.kind {
                EntityKind::Parameter => {
                    if e.unit.as_deref().is_none_or(|u| u.trim().is_empty()) {
                        return Err(fail("parameter is missing a unit"));
                    }
                    if e.default_value
                        .as_deref()
                        .is_none_or(|d| d.trim().is_empty())
                    {
                        return Err(fail("parameter is missing a default value"));
                    }
                }
                _ => {
                    if e.unit.is_some() || e.default_value.is_some() || !e.applies_to.is_empty() {
                        return Err(fail(
                            "unit, default_value and applies_to are only allowed on parameters",
                        ));
                    }
                }
            }
            entity_pos.insert(e.id.clone(), pos);
        }

        for e in &entities {
            for target in &e.applies_to {
                let ok = entity_pos
                    .get(target)
                    .is_some_and(|&p| entities[p].kind == EntityKind::Component);
                if !ok {
                    return Err(KbError::Validation {
                        id: e.id.clone(),
                        reason: format!("applies_to references unknown component \"{target}\""),
                    });
                }
            }
        }

        let mut section_pos = BTreeMap::new();
        for (pos, s) in sections.iter().enumerate() {
            let fail = |reason: &str| KbError::Validation {
                id: s.id.clone(),
                reason: reason.to_string(),
            };
            if s.id.trim().is_empty() {
                return Err(fail("empty id"));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(fail("duplicate id"));
            }
            if s.body.trim().is_empty() {
                return Err(fail("empty body"));
            }
            section_pos.insert(s.id.clone(), pos);
        }

        let mut surface_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut seen: HashSet<(EntityKind, String)> = HashSet::new();
        let mut longest_surface = 0;
        for e in &entities {
            let mut own = BTreeSet::new();
            for surface in e.surfaces() {
                let norm = normalize(surface);
                if !own.insert(norm.clone()) {
                    continue;
                }
                if !seen.insert((e.kind, norm.clone())) {
                    return Err(KbError::Validation {
                        id: e.id.clone(),
                        reason: format!("surface \"{norm}\" collides with another {}", e.kind),
                    });
                }
                longest_surface = longest_surface.max(norm.split(' ').count());
                surface_index.entry(norm).or_default().push(e.id.clone());
            }
        }
        for ids in surface_index.values_mut() {
            ids.sort_by(|a, b| {
                let ka = entities[entity_pos[a]].kind.priority();
                let kb = entities[entity_pos[b]].kind.priority();
                ka.cmp(&kb).then_with(|| a.cmp(b))
            });
        }

        Ok(KnowledgeBase {
            version: version.unwrap_or(1),
            entities,
            sections,
            entity_pos,
            section_pos,
            surface_index,
            longest_surface,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self, KbError> {
        let file: KnowledgeFile = serde_json::from_str(text).map_err(|e| KbError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_file(file)
    }

    pub fn to_file(&self) -> KnowledgeFile {
        KnowledgeFile {
            version: Some(self.version),
            entities: self.entities.clone(),
            sections: self.sections.clone(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("knowledge base serializes")
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn entities(&self) -> &[OntologyEntity] {
        &self.entities
    }

    pub fn sections(&self) -> &[GuideSection] {
        &self.sections
    }

    pub fn entity(&self, id: &str) -> Option<&OntologyEntity> {
        self.entity_pos.get(id).map(|&p| &self.entities[p])
    }

    pub fn section(&self, id: &str) -> Option<&GuideSection> {
        self.section_pos.get(id).map(|&p| &self.sections[p])
    }

    /// True if `id` names an entity or a section.
    pub fn resolves(&self, id: &str) -> bool {
        self.entity_pos.contains_key(id) || self.section_pos.contains_key(id)
    }

    /// Entities of one kind, ordered by id.
    pub fn entities_of(&self, kind: EntityKind) -> Vec<&OntologyEntity> {
        self.entity_pos
            .values()
            .map(|&p| &self.entities[p])
            .filter(|e| e.kind == kind)
            .collect()
    }

    /// Sections with the given affinity, ordered by id.
    pub fn sections_of(&self, affinity: Affinity) -> Vec<&GuideSection> {
        self.section_pos
            .values()
            .map(|&p| &self.sections[p])
            .filter(|s| s.affinity == affinity)
            .collect()
    }

    pub fn surface_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.surface_index
    }

    /// Number of tokens in the longest indexed surface.
    pub fn longest_surface(&self) -> usize {
        self.longest_surface
    }

    /// Exact match of a phrase against every name and synonym, case- and
    /// whitespace-insensitive. Ordered by kind priority, then id.
    pub fn lookup_surface(&self, phrase: &str) -> Vec<(String, EntityKind)> {
        self.surface_index
            .get(&normalize(phrase))
            .map(|ids| {
                ids.iter()
                    .map(|id| (id.clone(), self.entity(id).expect("indexed id").kind))
                    .collect()
            })
            .unwrap_or_default()
    }
}

pub fn load_guide(path: impl AsRef<Path>) -> Result<KnowledgeBase, KbError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.display().to_string(),
        source,
    })?;
    KnowledgeBase::from_json_str(&text)
}

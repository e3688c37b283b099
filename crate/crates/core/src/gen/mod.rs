//! Training-corpus generation: question templates are projected onto the
//! knowledge base, producing labeled questions together with the record
//! that must answer each one.

mod lint;
mod template;

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lint::{lint_question, LintIssue, INTERROGATIVES};
pub use template::{
    parse_pattern, parse_templates, parse_templates_str, AnswerRule, Part, QuestionTemplate,
    TemplateRecord,
};

use crate::classify::IntentCategory;
use crate::kb::{Affinity, KnowledgeBase, Role};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("io error on {path}: {source}")]
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
    #[error("template \"{template}\" at offset {offset}: {message}")]
    TemplateSyntax {
        template: String,
        offset: usize,
        message: String,
    },
    #[error("no training examples were produced")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingExample {
    pub question: String,
    pub intent: IntentCategory,
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
    pub expected_answer_id: String,
    #[serde(default)]
    pub template_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub examples: Vec<TrainingExample>,
    pub per_intent_counts: BTreeMap<IntentCategory, usize>,
    pub lint_report: Vec<(String, LintIssue)>,
}

impl TrainingSet {
    /// Builds a set from examples in order, dropping repeated questions
    /// (first occurrence wins) and linting what remains.
    pub fn from_examples(examples: impl IntoIterator<Item = TrainingExample>) -> Self {
        let mut seen = HashSet::new();
        let examples: Vec<TrainingExample> = examples
            .into_iter()
            .filter(|e| seen.insert(e.question.clone()))
            .collect();
        let mut per_intent_counts = BTreeMap::new();
        let mut lint_report = Vec::new();
        for e in &examples {
            *per_intent_counts.entry(e.intent).or_insert(0) += 1;
            for issue in lint_question(&e.question) {
                lint_report.push((e.question.clone(), issue));
            }
        }
        TrainingSet {
            examples,
            per_intent_counts,
            lint_report,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Questions with no lint issue.
    pub fn clean_count(&self) -> usize {
        let flagged: HashSet<&str> = self.lint_report.iter().map(|(q, _)| q.as_str()).collect();
        self.examples.len() - flagged.len()
    }
}

/// A value a slot can take: the id that gets bound and the text that is
/// substituted.
struct Filler {
    id: String,
    text: String,
}

fn fillers(kb: &KnowledgeBase, kind: Role) -> Vec<Filler> {
    match kind.entity_kind() {
        Some(kind) => kb
            .entities_of(kind)
            .into_iter()
            .map(|e| Filler {
                id: e.id.clone(),
                text: e.name.clone(),
            })
            .collect(),
        None => kb
            .sections_of(Affinity::HowTo)
            .into_iter()
            .map(|s| Filler {
                id: s.id.clone(),
                text: s.title.clone(),
            })
            .collect(),
    }
}

/// Record id answering a zero-slot rule: the lowest-id section with the
/// matching affinity.
fn fixed_answer(kb: &KnowledgeBase, rule: AnswerRule) -> Option<String> {
    let affinity = match rule {
        AnswerRule::GoalText => Affinity::Goal,
        AnswerRule::SysReqText => Affinity::SystemRequirements,
        AnswerRule::GettingStartedText => Affinity::GettingStarted,
        _ => return None,
    };
    kb.sections_of(affinity).first().map(|s| s.id.clone())
}

/// Every question a template yields over `kb`: the product of alternation
/// arms (in written order) and slot fillers (entities by id, or how-to
/// sections by id for `Section` slots).
pub fn expand(template: &QuestionTemplate, kb: &KnowledgeBase) -> Vec<TrainingExample> {
    let fixed = if template.answer_slot.is_none() {
        match fixed_answer(kb, template.answer_rule) {
            Some(id) => Some(id),
            None => return Vec::new(),
        }
    } else {
        None
    };

    // one dimension per group or slot, in pattern order
    let mut dims: Vec<Vec<Filler>> = Vec::new();
    for part in &template.parts {
        match part {
            Part::Text(_) => {}
            Part::Group(arms) => dims.push(
                arms.iter()
                    .map(|a| Filler {
                        id: String::new(),
                        text: a.clone(),
                    })
                    .collect(),
            ),
            Part::Slot { kind, .. } => dims.push(fillers(kb, *kind)),
        }
    }
    if dims.iter().any(Vec::is_empty) {
        return Vec::new();
    }
    // groups vary slowest, then slots
    let is_group: Vec<bool> = template
        .parts
        .iter()
        .filter(|p| !matches!(p, Part::Text(_)))
        .map(|p| matches!(p, Part::Group(_)))
        .collect();
    let mut order: Vec<usize> = (0..dims.len()).filter(|&d| is_group[d]).collect();
    order.extend((0..dims.len()).filter(|&d| !is_group[d]));

    let total: usize = dims.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut choice = vec![0usize; dims.len()];
    for _ in 0..total {
        let mut question = String::new();
        let mut bindings = BTreeMap::new();
        let mut d = 0;
        for part in &template.parts {
            match part {
                Part::Text(t) => question.push_str(t),
                Part::Group(_) => {
                    question.push_str(&dims[d][choice[d]].text);
                    d += 1;
                }
                Part::Slot { name, .. } => {
                    let f = &dims[d][choice[d]];
                    question.push_str(&f.text);
                    bindings.insert(name.clone(), f.id.clone());
                    d += 1;
                }
            }
        }
        let expected_answer_id = match (&fixed, &template.answer_slot) {
            (Some(id), _) => id.clone(),
            (None, Some(slot)) => bindings[slot].clone(),
            (None, None) => unreachable!("checked above"),
        };
        out.push(TrainingExample {
            question,
            intent: template.intent,
            bindings,
            expected_answer_id,
            template_id: template.id.clone(),
        });

        // advance the mixed-radix counter, last dimension in `order` fastest
        for &dim in order.iter().rev() {
            choice[dim] += 1;
            if choice[dim] < dims[dim].len() {
                break;
            }
            choice[dim] = 0;
        }
    }
    out
}

pub fn generate_dataset(
    templates: &[QuestionTemplate],
    kb: &KnowledgeBase,
) -> Result<TrainingSet, GenError> {
    let set = TrainingSet::from_examples(templates.iter().flat_map(|t| expand(t, kb)));
    if set.is_empty() {
        return Err(GenError::EmptyCorpus);
    }
    Ok(set)
}

/// Lints a template the way an author would want it checked: every
/// question it expands to over `kb`. A pattern the generator cannot parse
/// is linted as written, so placeholders it would leave behind are
/// reported as [`LintIssue::ResidualPlaceholder`].
pub fn lint_template(record: &TemplateRecord, kb: &KnowledgeBase) -> Vec<LintIssue> {
    let questions: Vec<String> = match QuestionTemplate::new(record.clone()) {
        Ok(t) => expand(&t, kb).into_iter().map(|e| e.question).collect(),
        Err(e) => {
            log::debug!("template {} does not parse: {e}", record.id);
            vec![record.pattern.clone()]
        }
    };
    let mut issues: Vec<LintIssue> = questions.iter().flat_map(|q| lint_question(q)).collect();
    issues.sort();
    issues.dedup();
    issues
}

pub fn write_corpus(path: impl AsRef<Path>, examples: &[TrainingExample]) -> Result<(), GenError> {
    let path = path.as_ref();
    let io = |source| GenError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for e in examples {
        let line = serde_json::to_string(e).expect("example serializes");
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<TrainingExample>, GenError> {
    let path = path.as_ref();
    let io = |source| GenError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::io::BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (n, line) in file.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| GenError::Parse {
            line: n + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(e);
    }
    Ok(out)
}

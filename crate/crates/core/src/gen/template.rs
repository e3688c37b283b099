use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GenError;
use crate::classify::IntentCategory;
use crate::kb::Role;

const MAX_SLOTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerRule {
    Definition,
    DefaultValue,
    Units,
    SectionBody,
    GoalText,
    SysReqText,
    GettingStartedText,
}

impl AnswerRule {
    /// The one rule each intent is answered by.
    pub fn for_intent(intent: IntentCategory) -> AnswerRule {
        match intent {
            IntentCategory::Definition => AnswerRule::Definition,
            IntentCategory::DefaultValue => AnswerRule::DefaultValue,
            IntentCategory::Units => AnswerRule::Units,
            IntentCategory::HowTo => AnswerRule::SectionBody,
            IntentCategory::Goal => AnswerRule::GoalText,
            IntentCategory::SystemRequirements => AnswerRule::SysReqText,
            IntentCategory::GettingStarted => AnswerRule::GettingStartedText,
        }
    }

    fn accepts_slot(self, kind: Role) -> bool {
        match self {
            AnswerRule::Definition => kind != Role::Section,
            AnswerRule::DefaultValue | AnswerRule::Units => kind == Role::Parameter,
            AnswerRule::SectionBody => kind == Role::Section,
            _ => false,
        }
    }

    fn needs_slot(self) -> bool {
        matches!(
            self,
            AnswerRule::Definition
                | AnswerRule::DefaultValue
                | AnswerRule::Units
                | AnswerRule::SectionBody
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Part {
    Text(String),
    Slot { name: String, kind: Role },
    Group(Vec<String>),
}

/// One record of a template file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateRecord {
    pub id: String,
    pub intent: IntentCategory,
    pub pattern: String,
    pub answer_rule: AnswerRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_slot: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionTemplate {
    pub id: String,
    pub intent: IntentCategory,
    pub pattern: String,
    pub answer_rule: AnswerRule,
    pub answer_slot: Option<String>,
    pub parts: Vec<Part>,
}

impl QuestionTemplate {
    pub fn new(record: TemplateRecord) -> Result<Self, GenError> {
        let TemplateRecord {
            id,
            intent,
            pattern,
            answer_rule,
            answer_slot,
        } = record;
        let err = |offset: usize, message: String| GenError::TemplateSyntax {
            template: id.clone(),
            offset,
            message,
        };
        let parts = parse_pattern(&pattern).map_err(|(o, m)| err(o, m))?;
        let end = pattern.chars().count();

        if AnswerRule::for_intent(intent) != answer_rule {
            return Err(err(
                0,
                format!("intent {intent} cannot be answered by rule {answer_rule:?}"),
            ));
        }
        match (&answer_slot, answer_rule.needs_slot()) {
            (None, true) => {
                return Err(err(
                    end,
                    format!("rule {answer_rule:?} needs an answer_slot"),
                ))
            }
            (Some(_), false) => {
                return Err(err(
                    end,
                    format!("rule {answer_rule:?} takes no answer_slot"),
                ))
            }
            (Some(name), true) => {
                let kind = parts.iter().find_map(|p| match p {
                    Part::Slot { name: n, kind } if n == name => Some(*kind),
                    _ => None,
                });
                match kind {
                    None => {
                        return Err(err(
                            end,
                            format!("answer_slot \"{name}\" is not in the pattern"),
                        ))
                    }
                    Some(kind) if !answer_rule.accepts_slot(kind) => {
                        return Err(err(
                            end,
                            format!("rule {answer_rule:?} cannot answer from a {kind} slot"),
                        ))
                    }
                    Some(_) => {}
                }
            }
            (None, false) => {}
        }

        Ok(QuestionTemplate {
            id,
            intent,
            pattern,
            answer_rule,
            answer_slot,
            parts,
        })
    }

    pub fn slots(&self) -> impl Iterator<Item = (&str, Role)> {
        self.parts.iter().filter_map(|p| match p {
            Part::Slot { name, kind } => Some((name.as_str(), *kind)),
            _ => None,
        })
    }

    pub fn groups(&self) -> impl Iterator<Item = &[String]> {
        self.parts.iter().filter_map(|p| match p {
            Part::Group(arms) => Some(arms.as_slice()),
            _ => None,
        })
    }
}

/// Splits a pattern into literal text, `{name:KIND}` slots and `(a|b)`
/// alternation groups. Errors carry a character offset.
pub fn parse_pattern(pattern: &str) -> Result<Vec<Part>, (usize, String)> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut parts = Vec::new();
    let mut text = String::new();
    let mut slot_names: Vec<String> = Vec::new();
    let mut i = 0;

    let flush = |text: &mut String, parts: &mut Vec<Part>| {
        if !text.is_empty() {
            parts.push(Part::Text(std::mem::take(text)));
        }
    };

    while i < chars.len() {
        match chars[i] {
            '{' => {
                let start = i;
                let close = (i + 1..chars.len())
                    .find(|&j| matches!(chars[j], '}' | '{' | '(' | ')' | '|'))
                    .filter(|&j| chars[j] == '}')
                    .ok_or((start, "unbalanced '{'".to_string()))?;
                let inner: String = chars[start + 1..close].iter().collect();
                let (name, kind) = inner
                    .split_once(':')
                    .ok_or((start, format!("slot \"{inner}\" must be written name:KIND")))?;
                let name = name.trim();
                if name.is_empty() {
                    return Err((start, "slot name is empty".into()));
                }
                let kind = Role::parse(kind.trim())
                    .ok_or((start, format!("unknown slot KIND \"{}\"", kind.trim())))?;
                if slot_names.iter().any(|n| n == name) {
                    return Err((start, format!("duplicate slot name \"{name}\"")));
                }
                slot_names.push(name.to_string());
                if slot_names.len() > MAX_SLOTS {
                    return Err((start, format!("more than {MAX_SLOTS} slots")));
                }
                flush(&mut text, &mut parts);
                parts.push(Part::Slot {
                    name: name.to_string(),
                    kind,
                });
                i = close + 1;
            }
            '(' => {
                let start = i;
                let mut arms = vec![String::new()];
                let mut arm_start = i + 1;
                let mut j = i + 1;
                loop {
                    match chars.get(j) {
                        None => return Err((start, "unbalanced '('".into())),
                        Some('|') | Some(')') => {
                            if arms.last().expect("non-empty").trim().is_empty() {
                                return Err((arm_start, "empty alternation arm".into()));
                            }
                            if chars[j] == ')' {
                                break;
                            }
                            arms.push(String::new());
                            arm_start = j + 1;
                        }
                        Some(c @ ('(' | '{' | '}')) => {
                            return Err((j, format!("'{c}' is not allowed inside an alternation")))
                        }
                        Some(&c) => arms.last_mut().expect("non-empty").push(c),
                    }
                    j += 1;
                }
                flush(&mut text, &mut parts);
                parts.push(Part::Group(arms));
                i = j + 1;
            }
            c @ ('}' | ')' | '|') => return Err((i, format!("unbalanced '{c}'"))),
            c => {
                text.push(c);
                i += 1;
            }
        }
    }
    flush(&mut text, &mut parts);
    Ok(parts)
}

pub fn parse_templates_str(text: &str) -> Result<Vec<QuestionTemplate>, GenError> {
    let records: Vec<TemplateRecord> = serde_json::from_str(text).map_err(|e| GenError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(records.len());
    for record in records {
        if !seen.insert(record.id.clone()) {
            return Err(GenError::TemplateSyntax {
                template: record.id,
                offset: 0,
                message: "duplicate template id".into(),
            });
        }
        out.push(QuestionTemplate::new(record)?);
    }
    Ok(out)
}

pub fn parse_templates(path: impl AsRef<Path>) -> Result<Vec<QuestionTemplate>, GenError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GenError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_templates_str(&text)
}

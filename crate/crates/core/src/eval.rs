//! Replay harnesses: the generated training corpus and hand-labeled user
//! questions are pushed through the full answering pipeline and scored.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{IntentCategory, IntentModel};
use crate::dialogue::{respond, ResponseKind};
use crate::gen::{lint_question, TrainingExample};
use crate::kb::KnowledgeBase;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("question \"{0}\" is labeled twice with different answers")]
    ConflictingLabels(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total: u64,
    pub correct: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub answered_correct: u64,
    pub answered_wrong: u64,
    pub idk: u64,
}

impl Splits {
    pub fn total(&self) -> u64 {
        self.answered_correct + self.answered_wrong + self.idk
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: u64,
    pub semantically_correct: u64,
    pub syntactically_correct: u64,
    pub per_intent: BTreeMap<IntentCategory, Tally>,
    pub splits: Splits,
    /// `confusion[expected][predicted]`, indexed in intent declaration order.
    pub confusion: [[u64; 7]; 7],
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.semantically_correct as f64 / self.total as f64
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let pct = |n: u64| {
            if self.total == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.total as f64
            }
        };
        let rows = [
            ("total", self.total),
            ("semantically correct", self.semantically_correct),
            ("syntactically correct", self.syntactically_correct),
            ("answered correct", self.splits.answered_correct),
            ("answered wrong", self.splits.answered_wrong),
            ("idk", self.splits.idk),
        ];
        for (label, n) in rows {
            let _ = writeln!(out, "{label:<24}{n:>8}{:>9.2}%", pct(n));
        }
        if !self.per_intent.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<24}{:>8}{:>9}", "intent", "total", "correct");
            for (intent, t) in &self.per_intent {
                let _ = writeln!(out, "{:<24}{:>8}{:>9}", intent.as_str(), t.total, t.correct);
            }
            let _ = writeln!(out);
            let _ = write!(out, "{:<24}", "expected \\ predicted");
            for i in IntentCategory::ALL {
                let _ = write!(out, "{:>6}", abbrev(i));
            }
            let _ = writeln!(out);
            for e in IntentCategory::ALL {
                let _ = write!(out, "{:<24}", e.as_str());
                for p in IntentCategory::ALL {
                    let _ = write!(out, "{:>6}", self.confusion[e.index()][p.index()]);
                }
                let _ = writeln!(out);
            }
        }
        out
    }
}

fn abbrev(intent: IntentCategory) -> &'static str {
    match intent {
        IntentCategory::Definition => "def",
        IntentCategory::Goal => "goal",
        IntentCategory::GettingStarted => "start",
        IntentCategory::SystemRequirements => "req",
        IntentCategory::HowTo => "howto",
        IntentCategory::DefaultValue => "dflt",
        IntentCategory::Units => "units",
    }
}

/// Replays every training question. A question counts as correct when it
/// is answered under its own intent and the answer draws on the expected
/// record.
pub fn replay_training(
    model: &IntentModel,
    kb: &KnowledgeBase,
    corpus: &[TrainingExample],
    threshold: f64,
) -> EvalReport {
    let mut report = EvalReport::default();
    for example in corpus {
        report.total += 1;
        if lint_question(&example.question).is_empty() {
            report.syntactically_correct += 1;
        }
        let tally = report.per_intent.entry(example.intent).or_default();
        tally.total += 1;

        let predicted = model.predict(&example.question).top().0;
        report.confusion[example.intent.index()][predicted.index()] += 1;

        let exchange = match respond(model, kb, &example.question, threshold) {
            Ok(x) => x,
            Err(_) => {
                report.splits.idk += 1;
                continue;
            }
        };
        match exchange.payload {
            Some(payload) => {
                let correct = payload.intent == example.intent
                    && payload.source_ids.contains(&example.expected_answer_id);
                if correct {
                    report.splits.answered_correct += 1;
                    report.semantically_correct += 1;
                    tally.correct += 1;
                } else {
                    report.splits.answered_wrong += 1;
                }
            }
            None => report.splits.idk += 1,
        }
    }
    report
}

/// One hand-labeled user question; no answer id means IDK is expected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledQuestion {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_answer_id: Option<String>,
}

pub fn parse_labeled(text: &str) -> Result<Vec<LabeledQuestion>, EvalError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LabeledQuestion = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_labeled(path: impl AsRef<Path>) -> Result<Vec<LabeledQuestion>, EvalError> {
    let path = path.as_ref();
    let io = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut text = String::new();
    for line in std::io::BufReader::new(file).lines() {
        text.push_str(&line.map_err(io)?);
        text.push('\n');
    }
    parse_labeled(&text)
}

/// Drops repeated questions. Repeats must agree on the expected answer.
pub fn dedup_labeled(records: &[LabeledQuestion]) -> Result<Vec<LabeledQuestion>, EvalError> {
    let mut seen: HashMap<&str, &Option<String>> = HashMap::new();
    let mut out = Vec::new();
    for r in records {
        match seen.get(r.question.trim()) {
            Some(prev) if **prev != r.expected_answer_id => {
                return Err(EvalError::ConflictingLabels(r.question.clone()))
            }
            Some(_) => {}
            None => {
                seen.insert(r.question.trim(), &r.expected_answer_id);
                out.push(r.clone());
            }
        }
    }
    Ok(out)
}

/// Scores unique labeled questions. An expected-IDK question answered with
/// IDK counts as semantically correct; answering it counts as wrong.
pub fn replay_labeled_records(
    model: &IntentModel,
    kb: &KnowledgeBase,
    records: &[LabeledQuestion],
    threshold: f64,
) -> Result<EvalReport, EvalError> {
    let unique = dedup_labeled(records)?;
    let mut report = EvalReport::default();
    for r in &unique {
        report.total += 1;
        if lint_question(&r.question).is_empty() {
            report.syntactically_correct += 1;
        }
        let exchange = respond(model, kb, &r.question, threshold).ok();
        let answered = exchange
            .as_ref()
            .filter(|x| x.response.kind == ResponseKind::Answered)
            .and_then(|x| x.payload.as_ref());
        match (answered, &r.expected_answer_id) {
            (Some(payload), Some(id)) if payload.source_ids.contains(id) => {
                report.splits.answered_correct += 1;
                report.semantically_correct += 1;
            }
            (Some(_), _) => report.splits.answered_wrong += 1,
            (None, expected) => {
                report.splits.idk += 1;
                if expected.is_none() {
                    report.semantically_correct += 1;
                }
            }
        }
    }
    Ok(report)
}

pub fn replay_labeled(
    model: &IntentModel,
    kb: &KnowledgeBase,
    path: impl AsRef<Path>,
    threshold: f64,
) -> Result<EvalReport, EvalError> {
    let records = read_labeled(path)?;
    replay_labeled_records(model, kb, &records, threshold)
}

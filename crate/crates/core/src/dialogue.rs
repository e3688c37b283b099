//! Confidence-gated answering, IDK redirection, feedback capture and the
//! retraining loop.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{self, IntentCategory, IntentModel, TrainError};
use crate::gen::{self, GenError, QuestionTemplate, TrainingExample, TrainingSet};
use crate::kb::KnowledgeBase;
use crate::semantics::{self, AnswerPayload, QueryError};

pub const DEFAULT_THRESHOLD: f64 = 0.97;
pub const MAX_SUGGESTIONS: usize = 3;
pub const IDK_TEXT: &str =
    "I'm sorry, I don't know the answer to that yet. You could try asking about one of these topics:";
pub const FEEDBACK_PROMPT: &str = "Was this answer helpful?";

#[derive(Debug, Error)]
pub enum DialogueError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error(
        "labeled example \"{question}\" is invalid: expected_answer_id \"{id}\" does not resolve"
    )]
    InvalidExtra { question: String, id: String },
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("unknown feedback id \"{0}\"")]
    UnknownFeedbackId(String),
    #[error("feedback id \"{0}\" already has a vote")]
    AlreadyVoted(String),
    #[error("feedback log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Answered,
    #[serde(rename = "idk")]
    Idk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub answer_text: String,
    pub kind: ResponseKind,
    pub intent: Option<IntentCategory>,
    pub confidence: f64,
    pub suggestions: Vec<String>,
    pub feedback_id: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Helpful {
    Yes,
    No,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub feedback_id: String,
    pub question: String,
    pub answer_text: String,
    pub kind: ResponseKind,
    pub helpful: Helpful,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissReason {
    BelowThreshold,
    MissingEntity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissedQuestion {
    pub question: String,
    pub top_intent: IntentCategory,
    pub confidence: f64,
    pub reason: MissReason,
    pub timestamp: DateTime<Utc>,
}

/// Everything one call to [`respond`] produces.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub response: Response,
    /// Present when the question was answered.
    pub payload: Option<AnswerPayload>,
    pub feedback: FeedbackRecord,
    pub missed: Option<MissedQuestion>,
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn phrase_table(intent: IntentCategory) -> &'static [&'static str] {
    match intent {
        IntentCategory::HowTo => &[
            "",
            "Here is what the User Guide says:\n",
            "From the User Guide:\n",
        ],
        IntentCategory::GettingStarted => &["", "Welcome! "],
        IntentCategory::SystemRequirements => &["", "Good question. "],
        // shown verbatim
        IntentCategory::Definition
        | IntentCategory::Goal
        | IntentCategory::DefaultValue
        | IntentCategory::Units => &[""],
    }
}

/// Prefixes the payload with a phrase picked by a stable hash of the
/// question. The payload text itself is never altered.
pub fn naturalize(payload: &AnswerPayload, question: &str) -> String {
    let table = phrase_table(payload.intent);
    let prefix = table[(fnv1a(question) % table.len() as u64) as usize];
    format!("{prefix}{}", payload.text)
}

pub fn respond(
    model: &IntentModel,
    kb: &KnowledgeBase,
    question: &str,
    threshold: f64,
) -> Result<Exchange, DialogueError> {
    let started = Instant::now();
    let question = question.trim();
    if question.is_empty() {
        return Err(DialogueError::EmptyQuestion);
    }
    let classification = model.predict(question);
    let (top_intent, confidence) = classification.top();

    let outcome = if confidence < threshold {
        Err(MissReason::BelowThreshold)
    } else {
        let bindings = semantics::extract_entities(kb, question);
        semantics::build_query(kb, top_intent, &bindings, question)
            .and_then(|q| semantics::execute(kb, &q))
            .map_err(|e| match e {
                QueryError::EmptyQuestion => unreachable!("question checked above"),
                QueryError::MissingEntity { .. } | QueryError::RecordNotFound(_) => {
                    MissReason::MissingEntity
                }
            })
    };

    let feedback_id = uuid::Uuid::new_v4().simple().to_string();
    let now = Utc::now();
    let (response, payload, missed) = match outcome {
        Ok(payload) => {
            let response = Response {
                answer_text: naturalize(&payload, question),
                kind: ResponseKind::Answered,
                intent: Some(top_intent),
                confidence,
                suggestions: Vec::new(),
                feedback_id: feedback_id.clone(),
                latency_ms: 0,
            };
            (response, Some(payload), None)
        }
        Err(reason) => {
            let topics = model.topics();
            let suggestions: Vec<String> = classification
                .ranked
                .iter()
                .filter_map(|(intent, _)| topics.get(intent).cloned())
                .take(MAX_SUGGESTIONS)
                .collect();
            let response = Response {
                answer_text: IDK_TEXT.to_string(),
                kind: ResponseKind::Idk,
                intent: None,
                confidence,
                suggestions,
                feedback_id: feedback_id.clone(),
                latency_ms: 0,
            };
            let missed = MissedQuestion {
                question: question.to_string(),
                top_intent,
                confidence,
                reason,
                timestamp: now,
            };
            (response, None, Some(missed))
        }
    };
    let mut response = response;
    response.latency_ms = started.elapsed().as_millis() as u64;
    let feedback = FeedbackRecord {
        feedback_id,
        question: question.to_string(),
        answer_text: response.answer_text.clone(),
        kind: response.kind,
        helpful: Helpful::None,
        timestamp: now,
    };
    Ok(Exchange {
        response,
        payload,
        feedback,
        missed,
    })
}

/// Append-only JSON Lines file with serialized writes.
#[derive(Debug)]
pub struct JsonlLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl JsonlLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(JsonlLog {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append<T: Serialize>(&self, record: &T) -> std::io::Result<()> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let mut file = self.file.lock().expect("log lock");
        file.write_all(line.as_bytes())?;
        file.flush()
    }
}

/// Reads every record of a JSON Lines file; a missing file reads as empty.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> std::io::Result<Vec<T>> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.display(), n + 1),
            )
        })?;
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Default)]
struct FeedbackState {
    records: HashMap<String, FeedbackRecord>,
    yes: u64,
    no: u64,
}

/// Feedback records keyed by id. Every change is appended to the log as a
/// full record; on reopen the last line for an id wins.
#[derive(Debug, Default)]
pub struct FeedbackStore {
    state: Mutex<FeedbackState>,
    log: Option<JsonlLog>,
}

impl FeedbackStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let mut state = FeedbackState::default();
        for record in read_jsonl::<FeedbackRecord>(path.as_ref())? {
            state.records.insert(record.feedback_id.clone(), record);
        }
        for r in state.records.values() {
            match r.helpful {
                Helpful::Yes => state.yes += 1,
                Helpful::No => state.no += 1,
                Helpful::None => {}
            }
        }
        Ok(FeedbackStore {
            state: Mutex::new(state),
            log: Some(JsonlLog::open(path)?),
        })
    }

    pub fn issue(&self, record: FeedbackRecord) -> std::io::Result<()> {
        let mut state = self.state.lock().expect("feedback lock");
        if let Some(log) = &self.log {
            log.append(&record)?;
        }
        state.records.insert(record.feedback_id.clone(), record);
        Ok(())
    }

    pub fn record_feedback(
        &self,
        feedback_id: &str,
        helpful: bool,
    ) -> Result<FeedbackRecord, FeedbackError> {
        let mut state = self.state.lock().expect("feedback lock");
        let record = state
            .records
            .get(feedback_id)
            .ok_or_else(|| FeedbackError::UnknownFeedbackId(feedback_id.to_string()))?;
        if record.helpful != Helpful::None {
            return Err(FeedbackError::AlreadyVoted(feedback_id.to_string()));
        }
        let mut updated = record.clone();
        updated.helpful = if helpful { Helpful::Yes } else { Helpful::No };
        updated.timestamp = Utc::now();
        if let Some(log) = &self.log {
            log.append(&updated)?;
        }
        if helpful {
            state.yes += 1;
        } else {
            state.no += 1;
        }
        state
            .records
            .insert(feedback_id.to_string(), updated.clone());
        Ok(updated)
    }

    pub fn get(&self, feedback_id: &str) -> Option<FeedbackRecord> {
        self.state
            .lock()
            .expect("feedback lock")
            .records
            .get(feedback_id)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("feedback lock").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (yes, no) vote counts.
    pub fn votes(&self) -> (u64, u64) {
        let state = self.state.lock().expect("feedback lock");
        (state.yes, state.no)
    }
}

pub fn validate_extras(
    kb: &KnowledgeBase,
    extras: &[TrainingExample],
) -> Result<(), DialogueError> {
    for e in extras {
        if e.question.trim().is_empty() || !kb.resolves(&e.expected_answer_id) {
            return Err(DialogueError::InvalidExtra {
                question: e.question.clone(),
                id: e.expected_answer_id.clone(),
            });
        }
    }
    Ok(())
}

/// Regenerates the corpus, appends the hand-labeled extras (generated
/// questions win on duplicates) and trains a fresh model.
pub fn retrain(
    kb: &KnowledgeBase,
    templates: &[QuestionTemplate],
    extra_labeled: &[TrainingExample],
    alpha: f64,
) -> Result<(IntentModel, TrainingSet), DialogueError> {
    validate_extras(kb, extra_labeled)?;
    let generated = gen::generate_dataset(templates, kb)?;
    let corpus = TrainingSet::from_examples(
        generated
            .examples
            .into_iter()
            .chain(extra_labeled.iter().cloned()),
    );
    let model = classify::train(&corpus.examples, alpha)?;
    Ok((model, corpus))
}

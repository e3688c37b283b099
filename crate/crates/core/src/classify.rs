//! Intent classification: a multinomial naive-Bayes model over unigram and
//! bigram features.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gen::TrainingExample;

/// The closed set of question categories. Declaration order is the
/// tie-break order for rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentCategory {
    Definition,
    Goal,
    GettingStarted,
    SystemRequirements,
    #[serde(rename = "howto")]
    HowTo,
    DefaultValue,
    Units,
}

impl IntentCategory {
    pub const ALL: [IntentCategory; 7] = [
        IntentCategory::Definition,
        IntentCategory::Goal,
        IntentCategory::GettingStarted,
        IntentCategory::SystemRequirements,
        IntentCategory::HowTo,
        IntentCategory::DefaultValue,
        IntentCategory::Units,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntentCategory::Definition => "definition",
            IntentCategory::Goal => "goal",
            IntentCategory::GettingStarted => "getting_started",
            IntentCategory::SystemRequirements => "system_requirements",
            IntentCategory::HowTo => "howto",
            IntentCategory::DefaultValue => "default_value",
            IntentCategory::Units => "units",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.as_str() == s)
    }
}

impl fmt::Display for IntentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Articles, copulas and pronouns dropped before feature extraction.
pub const STOPWORDS: [&str; 30] = [
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being", "am", "i", "me", "my",
    "you", "your", "it", "its", "we", "our", "they", "them", "their", "he", "she", "him", "her",
    "this", "that", "these",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Lowercased alphanumeric words with stopwords removed.
pub fn content_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !is_stopword(t))
        .map(str::to_string)
        .collect()
}

/// Unigrams followed by adjacent bigrams joined with `_`.
pub fn tokenize(text: &str) -> Vec<String> {
    let words = content_words(text);
    let bigrams: Vec<String> = words
        .windows(2)
        .map(|w| format!("{}_{}", w[0], w[1]))
        .collect();
    let mut out = words;
    out.extend(bigrams);
    out
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus covers fewer than two intents")]
    SingleClassCorpus,
    #[error("smoothing alpha must be positive and finite, got {0}")]
    BadAlpha(f64),
}

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub ranked: Vec<(IntentCategory, f64)>,
}

impl Classification {
    pub fn top(&self) -> (IntentCategory, f64) {
        self.ranked[0]
    }

    pub fn top_confidence(&self) -> f64 {
        self.ranked[0].1
    }

    pub fn confidence_of(&self, intent: IntentCategory) -> f64 {
        self.ranked
            .iter()
            .find(|(i, _)| *i == intent)
            .map(|(_, c)| *c)
            .unwrap_or(0.0)
    }
}

pub const DEFAULT_ALPHA: f64 = 1.0;
const MODEL_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct IntentModel {
    vocabulary: BTreeMap<String, usize>,
    /// Natural-log class priors; `-inf` for intents absent from the corpus.
    log_priors: [f64; 7],
    /// `log_likelihoods[intent][token]`.
    log_likelihoods: Vec<Vec<f64>>,
    alpha: f64,
    fingerprint: String,
    example_count: usize,
    /// One representative in-domain question per intent.
    topics: BTreeMap<IntentCategory, String>,
}

/// Order-independent content hash of a corpus.
pub fn corpus_fingerprint(examples: &[TrainingExample]) -> String {
    let mut lines: Vec<String> = examples
        .iter()
        .map(|e| serde_json::to_string(e).expect("example serializes"))
        .collect();
    lines.sort();
    let mut hasher = Sha256::new();
    for line in &lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

pub fn train(examples: &[TrainingExample], alpha: f64) -> Result<IntentModel, TrainError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(TrainError::BadAlpha(alpha));
    }
    if examples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let intents: BTreeSet<IntentCategory> = examples.iter().map(|e| e.intent).collect();
    if intents.len() < 2 {
        return Err(TrainError::SingleClassCorpus);
    }

    let tokenized: Vec<(IntentCategory, Vec<String>)> = examples
        .iter()
        .map(|e| (e.intent, tokenize(&e.question)))
        .collect();
    let vocab_set: BTreeSet<&str> = tokenized
        .iter()
        .flat_map(|(_, toks)| toks.iter().map(String::as_str))
        .collect();
    let vocabulary: BTreeMap<String, usize> = vocab_set
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i))
        .collect();
    let v = vocabulary.len();

    let mut class_docs = [0usize; 7];
    let mut counts = vec![vec![0u64; v]; 7];
    let mut totals = [0u64; 7];
    for (intent, toks) in &tokenized {
        let c = intent.index();
        class_docs[c] += 1;
        for t in toks {
            counts[c][vocabulary[t]] += 1;
            totals[c] += 1;
        }
    }

    let n = examples.len() as f64;
    let mut log_priors = [f64::NEG_INFINITY; 7];
    for c in 0..7 {
        if class_docs[c] > 0 {
            log_priors[c] = (class_docs[c] as f64 / n).ln();
        }
    }
    let log_likelihoods = (0..7)
        .map(|c| {
            let denom = (totals[c] as f64 + alpha * v as f64).ln();
            counts[c]
                .iter()
                .map(|&k| (k as f64 + alpha).ln() - denom)
                .collect()
        })
        .collect();

    // shortest question per intent, ties broken lexicographically, so the
    // choice does not depend on corpus order
    let mut topics: BTreeMap<IntentCategory, String> = BTreeMap::new();
    for e in examples {
        let better = topics
            .get(&e.intent)
            .is_none_or(|cur| (e.question.len(), e.question.as_str()) < (cur.len(), cur.as_str()));
        if better {
            topics.insert(e.intent, e.question.clone());
        }
    }

    Ok(IntentModel {
        vocabulary,
        log_priors,
        log_likelihoods,
        alpha,
        fingerprint: corpus_fingerprint(examples),
        example_count: examples.len(),
        topics,
    })
}

impl IntentModel {
    pub fn predict(&self, question: &str) -> Classification {
        self.predict_tokens(&tokenize(question))
    }

    /// Scores an already tokenized question; tokens outside the vocabulary
    /// are skipped.
    pub fn predict_tokens(&self, tokens: &[String]) -> Classification {
        let mut scores = self.log_priors;
        for tok in tokens {
            if let Some(&idx) = self.vocabulary.get(tok) {
                for (c, score) in scores.iter_mut().enumerate() {
                    *score += self.log_likelihoods[c][idx];
                }
            }
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let mut ranked: Vec<(IntentCategory, f64)> = IntentCategory::ALL
            .iter()
            .map(|&i| (i, exps[i.index()] / z))
            .collect();
        // stable: equal confidences keep declaration order
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite confidences"));
        Classification { ranked }
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn log_prior(&self, intent: IntentCategory) -> f64 {
        self.log_priors[intent.index()]
    }

    pub fn log_likelihood(&self, intent: IntentCategory, token: &str) -> Option<f64> {
        self.vocabulary
            .get(token)
            .map(|&i| self.log_likelihoods[intent.index()][i])
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn example_count(&self) -> usize {
        self.example_count
    }

    pub fn topics(&self) -> &BTreeMap<IntentCategory, String> {
        &self.topics
    }

    /// Intents the model was trained on.
    pub fn trained_intents(&self) -> Vec<IntentCategory> {
        IntentCategory::ALL
            .into_iter()
            .filter(|i| self.log_priors[i.index()].is_finite())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT,
            alpha: self.alpha,
            fingerprint: self.fingerprint.clone(),
            example_count: self.example_count,
            vocabulary: self.vocabulary.keys().cloned().collect(),
            priors: IntentCategory::ALL
                .iter()
                .map(|i| {
                    let p = self.log_priors[i.index()];
                    (*i, p.is_finite().then_some(p))
                })
                .collect(),
            likelihoods: IntentCategory::ALL
                .iter()
                .map(|i| (*i, self.log_likelihoods[i.index()].clone()))
                .collect(),
            topics: self.topics.clone(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ModelFileError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(ModelFileError::Format(format!(
                "unsupported format version {}",
                file.format
            )));
        }
        let v = file.vocabulary.len();
        let vocabulary: BTreeMap<String, usize> = file
            .vocabulary
            .into_iter()
            .enumerate()
            .map(|(i, t)| (t, i))
            .collect();
        if vocabulary.len() != v {
            return Err(ModelFileError::Format(
                "duplicate vocabulary entries".into(),
            ));
        }
        let mut log_priors = [f64::NEG_INFINITY; 7];
        let mut log_likelihoods = vec![Vec::new(); 7];
        for intent in IntentCategory::ALL {
            let prior = file
                .priors
                .get(&intent)
                .ok_or_else(|| ModelFileError::Format(format!("missing prior for {intent}")))?;
            log_priors[intent.index()] = prior.unwrap_or(f64::NEG_INFINITY);
            let row = file.likelihoods.get(&intent).ok_or_else(|| {
                ModelFileError::Format(format!("missing likelihoods for {intent}"))
            })?;
            if row.len() != v {
                return Err(ModelFileError::Format(format!(
                    "likelihood row for {intent} has {} entries, expected {v}",
                    row.len()
                )));
            }
            log_likelihoods[intent.index()] = row.clone();
        }
        if !log_priors.iter().any(|p| p.is_finite()) {
            return Err(ModelFileError::Format("no intent has a prior".into()));
        }
        Ok(IntentModel {
            vocabulary,
            log_priors,
            log_likelihoods,
            alpha: file.alpha,
            fingerprint: file.fingerprint,
            example_count: file.example_count,
            topics: file.topics,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Loads a model file. When `corpus_fingerprint` is given and differs
    /// from the one recorded in the model, a warning is logged.
    pub fn load(
        path: impl AsRef<Path>,
        corpus_fingerprint: Option<&str>,
    ) -> Result<Self, ModelFileError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let model = Self::from_json(&text)?;
        if let Some(expected) = corpus_fingerprint {
            if expected != model.fingerprint {
                log::warn!(
                    "model {} was trained on corpus {} but the current corpus is {}",
                    path.display(),
                    model.fingerprint,
                    expected
                );
            }
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: u32,
    alpha: f64,
    fingerprint: String,
    example_count: usize,
    vocabulary: Vec<String>,
    priors: BTreeMap<IntentCategory, Option<f64>>,
    likelihoods: BTreeMap<IntentCategory, Vec<f64>>,
    topics: BTreeMap<IntentCategory, String>,
}

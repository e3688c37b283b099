use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LintIssue {
    ResidualPlaceholder,
    MissingQuestionMark,
    DoubleSpace,
    ArticleDisagreement,
    NonInterrogativeStart,
}

impl fmt::Display for LintIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub const INTERROGATIVES: [&str; 12] = [
    "what", "which", "how", "where", "when", "why", "who", "can", "does", "do", "is", "are",
];

fn word(tok: &str) -> String {
    tok.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Surface grammar checks for a generated question. Each issue kind is
/// reported at most once, in declaration order.
pub fn lint_question(question: &str) -> Vec<LintIssue> {
    let mut issues = Vec::new();
    if question.contains(['{', '}', '|']) {
        issues.push(LintIssue::ResidualPlaceholder);
    }
    if !question.trim_end().ends_with('?') {
        issues.push(LintIssue::MissingQuestionMark);
    }
    if question.contains("  ") {
        issues.push(LintIssue::DoubleSpace);
    }

    let tokens: Vec<&str> = question.split_whitespace().collect();
    let disagree = tokens.windows(2).any(|w| {
        let article = word(w[0]);
        let next = w[1].chars().next().map(|c| c.to_ascii_lowercase());
        match (article.as_str(), next) {
            ("a", Some(c)) if c.is_ascii_alphabetic() => "aeiou".contains(c),
            ("an", Some(c)) if c.is_ascii_alphabetic() => !"aeiou".contains(c),
            _ => false,
        }
    });
    if disagree {
        issues.push(LintIssue::ArticleDisagreement);
    }

    let first = tokens.first().map(|t| word(t)).unwrap_or_default();
    if !INTERROGATIVES.contains(&first.as_str()) {
        issues.push(LintIssue::NonInterrogativeStart);
    }
    issues
}

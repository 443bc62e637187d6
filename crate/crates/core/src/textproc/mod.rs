//! Feature extraction: tokenizer, POS tagger, count vectorizer and sentiment
//! discretization.

mod tagger;
mod vectorize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tagger::{pos_profile, Lexicon, PosProfile, PosTag, PosTagger, STARTER_LEXICON};
pub use vectorize::{build_vocabulary, featurize, vectorize, FeatureVector, TokenCounts, Vocabulary};

/// Default half-width of the neutral sentiment band.
pub const DEFAULT_SENTIMENT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextprocError {
    #[error("sentiment score {0} outside [-1, 1]")]
    SentimentOutOfRange(f64),
    #[error("sentiment epsilon {0} must be a non-negative number")]
    InvalidEpsilon(f64),
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits text into lowercase tokens: maximal runs of Unicode letters and
/// digits. An apostrophe between two such characters stays inside the token
/// (normalized to `'`); all other characters separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if is_apostrophe(c) && !current.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric()) {
            current.push('\'');
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentClass {
    Negative,
    Neutral,
    Positive,
}

impl SentimentClass {
    pub const ALL: [SentimentClass; 3] = [
        SentimentClass::Negative,
        SentimentClass::Neutral,
        SentimentClass::Positive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SentimentClass::Negative => "negative",
            SentimentClass::Neutral => "neutral",
            SentimentClass::Positive => "positive",
        }
    }

    pub fn mirror(self) -> SentimentClass {
        match self {
            SentimentClass::Negative => SentimentClass::Positive,
            SentimentClass::Neutral => SentimentClass::Neutral,
            SentimentClass::Positive => SentimentClass::Negative,
        }
    }
}

impl fmt::Display for SentimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SentimentClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "negative" => Ok(SentimentClass::Negative),
            "neutral" => Ok(SentimentClass::Neutral),
            "positive" => Ok(SentimentClass::Positive),
            other => Err(format!("unknown sentiment class `{other}`")),
        }
    }
}

/// Discretizes a score in `[-1, 1]`. The neutral band `[-epsilon, epsilon]`
/// is closed.
pub fn sentiment_class(score: f64, epsilon: f64) -> Result<SentimentClass, TextprocError> {
    if !(-1.0..=1.0).contains(&score) {
        return Err(TextprocError::SentimentOutOfRange(score));
    }
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(TextprocError::InvalidEpsilon(epsilon));
    }
    Ok(if score < -epsilon {
        SentimentClass::Negative
    } else if score > epsilon {
        SentimentClass::Positive
    } else {
        SentimentClass::Neutral
    })
}

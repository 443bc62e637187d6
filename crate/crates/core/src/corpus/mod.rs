//! Peer-review corpus: data model, validation, anonymization and statistics.
//!
//! A [`Corpus`] is a list of [`Review`]s. Each review is one student's
//! assessment of a peer's project: an optional grade per rubric category and
//! any number of free-text [`Comment`]s. Comments optionally carry a
//! sentiment score in `[-1, 1]`, the rubric category they address, and a
//! free-form ground-truth label (used by synthetic corpora).

mod ingest;
mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::Sha256;
use thiserror::Error;

use crate::textproc;

pub use ingest::{export, ingest, Format, Schema};
pub use synth::{synthesize, ClassSpec, GenSpec};

/// Default inclusive rubric score range.
pub const DEFAULT_SCORE_RANGE: (i32, i32) = (1, 5);

/// Length of a pseudonym in hex characters.
pub const PSEUDONYM_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: field `{field}`: {message}")]
    Field { line: u64, field: String, message: String },
    #[error(
        "line {line}: unknown rubric category `{value}`; expected one of {}",
        RubricCategory::valid_names()
    )]
    UnknownCategory { line: u64, value: String },
    #[error("line {line}: sentiment {value} outside [-1, 1]")]
    SentimentOutOfRange { line: u64, value: f64 },
    #[error("line {line}: review `{id}` repeats with a different `{field}`")]
    InconsistentReview { line: u64, id: String, field: String },
    #[error("corpus failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("anonymization salt must not be empty")]
    EmptySalt,
    #[error("degenerate generator spec: {0}")]
    DegenerateSpec(String),
}

/// The five visual peer-review rubric categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RubricCategory {
    ClearLabeling,
    LieFactor,
    DataInkRatio,
    ChartJunk,
    GestaltPrinciples,
}

impl RubricCategory {
    pub const ALL: [RubricCategory; 5] = [
        RubricCategory::ClearLabeling,
        RubricCategory::LieFactor,
        RubricCategory::DataInkRatio,
        RubricCategory::ChartJunk,
        RubricCategory::GestaltPrinciples,
    ];

    /// Canonical name, used in files and reports.
    pub fn name(self) -> &'static str {
        match self {
            RubricCategory::ClearLabeling => "ClearLabeling",
            RubricCategory::LieFactor => "LieFactor",
            RubricCategory::DataInkRatio => "DataInkRatio",
            RubricCategory::ChartJunk => "ChartJunk",
            RubricCategory::GestaltPrinciples => "GestaltPrinciples",
        }
    }

    fn valid_names() -> String {
        Self::ALL.map(Self::name).join(", ")
    }
}

impl fmt::Display for RubricCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rubric category `{0}`; expected one of {names}", names = RubricCategory::valid_names())]
pub struct ParseCategoryError(pub String);

impl FromStr for RubricCategory {
    type Err = ParseCategoryError;

    /// Accepts the canonical names, and also case/separator variants such as
    /// `lie_factor` or `Data-Ink Ratio`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        Self::ALL
            .into_iter()
            .find(|c| c.name().to_lowercase() == folded)
            .ok_or_else(|| ParseCategoryError(s.to_string()))
    }
}

impl Serialize for RubricCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RubricCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Semester {
    Fall,
    Spring,
}

impl fmt::Display for Semester {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Semester::Fall => "Fall",
            Semester::Spring => "Spring",
        })
    }
}

impl FromStr for Semester {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "fall" => Ok(Semester::Fall),
            "spring" => Ok(Semester::Spring),
            other => Err(format!("unknown semester `{other}`; expected Fall or Spring")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RubricScore {
    pub category: RubricCategory,
    pub score: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub review_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<f64>,
    /// Rubric category the comment addresses, when annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<RubricCategory>,
    /// Free-form ground-truth class (synthetic corpora record it here).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Comment {
    pub fn new(id: impl Into<String>, review_id: impl Into<String>, text: impl Into<String>) -> Self {
        Comment {
            id: id.into(),
            review_id: review_id.into(),
            text: text.into(),
            sentiment: None,
            category: None,
            label: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub reviewer: String,
    pub reviewee: String,
    pub year: i32,
    pub semester: Semester,
    #[serde(default)]
    pub rubric_scores: Vec<RubricScore>,
    #[serde(default)]
    pub comments: Vec<Comment>,
}

impl Review {
    pub fn score(&self, category: RubricCategory) -> Option<i32> {
        self.rubric_scores
            .iter()
            .find(|s| s.category == category)
            .map(|s| s.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub reviews: Vec<Review>,
    /// Declared inclusive year span; `None` only for an empty corpus.
    pub year_span: Option<(i32, i32)>,
    /// Declared inclusive rubric score range.
    pub score_range: (i32, i32),
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus {
            reviews: Vec::new(),
            year_span: None,
            score_range: DEFAULT_SCORE_RANGE,
        }
    }
}

impl Corpus {
    /// Builds a corpus whose year span is taken from the data.
    pub fn new(reviews: Vec<Review>) -> Self {
        let year_span = data_year_span(&reviews);
        Corpus {
            reviews,
            year_span,
            score_range: DEFAULT_SCORE_RANGE,
        }
    }

    pub fn with_score_range(mut self, min: i32, max: i32) -> Self {
        self.score_range = (min, max);
        self
    }

    pub fn comments(&self) -> impl Iterator<Item = (&Review, &Comment)> + '_ {
        self.reviews.iter().flat_map(|r| r.comments.iter().map(move |c| (r, c)))
    }

    pub fn comment_count(&self) -> usize {
        self.reviews.iter().map(|r| r.comments.len()).sum()
    }

    /// Concatenates two corpora, widening the year span to cover both.
    pub fn merge(mut self, other: Corpus) -> Corpus {
        self.year_span = match (self.year_span, other.year_span) {
            (Some((a, b)), Some((c, d))) => Some((a.min(c), b.max(d))),
            (a, b) => a.or(b),
        };
        self.reviews.extend(other.reviews);
        self
    }
}

fn data_year_span(reviews: &[Review]) -> Option<(i32, i32)> {
    let min = reviews.iter().map(|r| r.year).min()?;
    let max = reviews.iter().map(|r| r.year).max()?;
    Some((min, max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateReviewId {
        id: String,
    },
    SelfReview {
        participant: String,
    },
    YearOutOfSpan {
        year: i32,
        span: (i32, i32),
    },
    MissingYearSpan,
    DuplicateRubricCategory {
        category: RubricCategory,
    },
    ScoreOutOfRange {
        category: RubricCategory,
        score: i32,
        range: (i32, i32),
    },
    EmptyCommentText {
        comment_id: String,
    },
    SentimentOutOfRange {
        comment_id: String,
        value: f64,
    },
    CommentReviewMismatch {
        comment_id: String,
        review_id: String,
    },
    InvalidScoreRange {
        range: (i32, i32),
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateReviewId { id } => write!(f, "duplicate review id `{id}`"),
            Violation::SelfReview { participant } => {
                write!(f, "self-review: reviewer and reviewee are both `{participant}`")
            }
            Violation::YearOutOfSpan { year, span } => {
                write!(f, "year {year} outside declared span {}..={}", span.0, span.1)
            }
            Violation::MissingYearSpan => write!(f, "corpus has reviews but no year span"),
            Violation::DuplicateRubricCategory { category } => {
                write!(f, "rubric category {category} scored more than once")
            }
            Violation::ScoreOutOfRange { category, score, range } => write!(
                f,
                "{category} score {score} outside declared range {}..={}",
                range.0, range.1
            ),
            Violation::EmptyCommentText { comment_id } => {
                write!(f, "comment `{comment_id}` has empty text")
            }
            Violation::SentimentOutOfRange { comment_id, value } => {
                write!(f, "comment `{comment_id}` sentiment {value} outside [-1, 1]")
            }
            Violation::CommentReviewMismatch { comment_id, review_id } => write!(
                f,
                "comment `{comment_id}` points at review `{review_id}`, not its container"
            ),
            Violation::InvalidScoreRange { range } => {
                write!(f, "score range {}..={} is empty", range.0, range.1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationEntry {
    /// Index of the offending review; `None` for corpus-level violations.
    pub position: Option<usize>,
    pub record_id: Option<String>,
    pub violation: Violation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<ViolationEntry>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, entry) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            match (&entry.position, &entry.record_id) {
                (Some(pos), Some(id)) => write!(f, "review #{} `{id}`: ", pos + 1)?,
                (Some(pos), None) => write!(f, "review #{}: ", pos + 1)?,
                _ => {}
            }
            write!(f, "{}", entry.violation)?;
        }
        Ok(())
    }
}

/// Checks every corpus invariant. Violations are reported in review order.
pub fn validate(corpus: &Corpus) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (lo, hi) = corpus.score_range;
    if lo > hi {
        report.violations.push(ViolationEntry {
            position: None,
            record_id: None,
            violation: Violation::InvalidScoreRange { range: (lo, hi) },
        });
    }
    if corpus.year_span.is_none() && !corpus.reviews.is_empty() {
        report.violations.push(ViolationEntry {
            position: None,
            record_id: None,
            violation: Violation::MissingYearSpan,
        });
    }

    let mut seen = HashSet::new();
    for (position, review) in corpus.reviews.iter().enumerate() {
        let mut push = |violation| {
            report.violations.push(ViolationEntry {
                position: Some(position),
                record_id: Some(review.id.clone()),
                violation,
            })
        };
        if !seen.insert(review.id.as_str()) {
            push(Violation::DuplicateReviewId { id: review.id.clone() });
        }
        if review.reviewer == review.reviewee {
            push(Violation::SelfReview {
                participant: review.reviewer.clone(),
            });
        }
        if let Some(span) = corpus.year_span {
            if review.year < span.0 || review.year > span.1 {
                push(Violation::YearOutOfSpan {
                    year: review.year,
                    span,
                });
            }
        }
        let mut categories = HashSet::new();
        for s in &review.rubric_scores {
            if !categories.insert(s.category) {
                push(Violation::DuplicateRubricCategory { category: s.category });
            }
            if s.score < lo || s.score > hi {
                push(Violation::ScoreOutOfRange {
                    category: s.category,
                    score: s.score,
                    range: (lo, hi),
                });
            }
        }
        for c in &review.comments {
            if c.review_id != review.id {
                push(Violation::CommentReviewMismatch {
                    comment_id: c.id.clone(),
                    review_id: c.review_id.clone(),
                });
            }
            if c.text.trim().is_empty() {
                push(Violation::EmptyCommentText {
                    comment_id: c.id.clone(),
                });
            }
            if let Some(v) = c.sentiment {
                if !(-1.0..=1.0).contains(&v) {
                    push(Violation::SentimentOutOfRange {
                        comment_id: c.id.clone(),
                        value: v,
                    });
                }
            }
        }
    }
    report
}

/// Keyed-hash pseudonym for a participant id.
pub fn pseudonym(id: &str, salt: &[u8]) -> Result<String, CorpusError> {
    if salt.is_empty() {
        return Err(CorpusError::EmptySalt);
    }
    let mut mac = Hmac::<Sha256>::new_from_slice(salt).expect("HMAC accepts any key length");
    mac.update(id.as_bytes());
    let digest = mac.finalize().into_bytes();
    let mut out = String::with_capacity(PSEUDONYM_LEN);
    for byte in digest.iter().take(PSEUDONYM_LEN / 2) {
        out.push_str(&format!("{byte:02x}"));
    }
    Ok(out)
}

/// Replaces reviewer and reviewee ids with salted pseudonyms. Everything
/// else, including review and comment ids, is left untouched.
pub fn anonymize(corpus: &Corpus, salt: &[u8]) -> Result<Corpus, CorpusError> {
    if salt.is_empty() {
        return Err(CorpusError::EmptySalt);
    }
    let mut cache: BTreeMap<String, String> = BTreeMap::new();
    let mut lookup = |id: &str| -> Result<String, CorpusError> {
        if let Some(p) = cache.get(id) {
            return Ok(p.clone());
        }
        let p = pseudonym(id, salt)?;
        cache.insert(id.to_string(), p.clone());
        Ok(p)
    };
    let mut out = corpus.clone();
    for review in &mut out.reviews {
        review.reviewer = lookup(&review.reviewer)?;
        review.reviewee = lookup(&review.reviewee)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub total_reviews: usize,
    pub total_comments: usize,
    pub total_words: usize,
    /// `None` when the corpus has no reviews.
    pub mean_words_per_review: Option<f64>,
    pub words_by_year: BTreeMap<i32, usize>,
    pub comments_by_year: BTreeMap<i32, usize>,
}

/// Word counts use [`textproc::tokenize`], so they agree with every other
/// token-based feature in the crate.
pub fn stats(corpus: &Corpus) -> CorpusStats {
    let mut st = CorpusStats {
        total_reviews: corpus.reviews.len(),
        ..Default::default()
    };
    for review in &corpus.reviews {
        let words: usize = review.comments.iter().map(|c| textproc::tokenize(&c.text).len()).sum();
        st.total_words += words;
        st.total_comments += review.comments.len();
        *st.words_by_year.entry(review.year).or_default() += words;
        *st.comments_by_year.entry(review.year).or_default() += review.comments.len();
    }
    if st.total_reviews > 0 {
        st.mean_words_per_review = Some(st.total_words as f64 / st.total_reviews as f64);
    }
    st
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn review(id: &str, reviewer: &str, reviewee: &str, year: i32, texts: &[&str]) -> Review {
        Review {
            id: id.to_string(),
            reviewer: reviewer.to_string(),
            reviewee: reviewee.to_string(),
            year,
            semester: Semester::Fall,
            rubric_scores: vec![],
            comments: texts
                .iter()
                .enumerate()
                .map(|(i, t)| Comment::new(format!("{id}-c{}", i + 1), id, *t))
                .collect(),
        }
    }

    #[test]
    fn category_names_round_trip() {
        for c in RubricCategory::ALL {
            assert_eq!(c.name().parse::<RubricCategory>().unwrap(), c);
            assert_eq!(c.to_string(), c.name());
        }
        assert_eq!(
            "lie_factor".parse::<RubricCategory>().unwrap(),
            RubricCategory::LieFactor
        );
        assert_eq!(
            "Data-Ink Ratio".parse::<RubricCategory>().unwrap(),
            RubricCategory::DataInkRatio
        );
        let err = "colour".parse::<RubricCategory>().unwrap_err().to_string();
        for c in RubricCategory::ALL {
            assert!(err.contains(c.name()), "{err}");
        }
    }

    #[test]
    fn duplicate_review_id_is_one_violation() {
        let corpus = Corpus::new(vec![
            review("r1", "a", "b", 2019, &["fine"]),
            review("r1", "c", "d", 2019, &["ok"]),
        ]);
        let report = validate(&corpus);
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].position, Some(1));
        assert_eq!(
            report.violations[0].violation,
            Violation::DuplicateReviewId { id: "r1".into() }
        );
    }

    #[test]
    fn self_review_is_one_violation() {
        let corpus = Corpus::new(vec![review("r1", "a", "a", 2019, &["fine"])]);
        let report = validate(&corpus);
        assert_eq!(report.len(), 1);
        assert!(matches!(report.violations[0].violation, Violation::SelfReview { .. }));
    }

    #[test]
    fn valid_corpus_has_empty_report() {
        let corpus = Corpus::new(vec![
            review("r1", "a", "b", 2018, &["fine"]),
            review("r2", "b", "a", 2019, &["ok"]),
        ]);
        assert!(validate(&corpus).is_empty());
        assert!(validate(&Corpus::default()).is_empty());
    }

    #[test]
    fn validation_catches_field_level_problems() {
        let mut r = review("r1", "a", "b", 2025, &["  "]);
        r.rubric_scores = vec![
            RubricScore {
                category: RubricCategory::LieFactor,
                score: 9,
            },
            RubricScore {
                category: RubricCategory::LieFactor,
                score: 3,
            },
        ];
        r.comments[0].sentiment = Some(-2.0);
        r.comments[0].review_id = "elsewhere".into();
        let mut corpus = Corpus::new(vec![r]);
        corpus.year_span = Some((2017, 2022));
        let kinds: Vec<_> = validate(&corpus).violations.into_iter().map(|v| v.violation).collect();
        assert_eq!(kinds.len(), 6, "{kinds:?}");
        assert!(matches!(kinds[0], Violation::YearOutOfSpan { year: 2025, .. }));
        assert!(matches!(kinds[1], Violation::ScoreOutOfRange { score: 9, .. }));
        assert!(matches!(kinds[2], Violation::DuplicateRubricCategory { .. }));
        assert!(matches!(kinds[3], Violation::CommentReviewMismatch { .. }));
        assert!(matches!(kinds[4], Violation::EmptyCommentText { .. }));
        assert!(matches!(kinds[5], Violation::SentimentOutOfRange { .. }));
    }

    #[test]
    fn anonymize_is_deterministic_and_salted() {
        let corpus = Corpus::new(vec![
            review("r1", "alice-01", "bob-07", 2019, &["nice chart"]),
            review("r2", "bob-07", "alice-01", 2019, &["clear labels"]),
        ]);
        let a = anonymize(&corpus, b"salt-1").unwrap();
        let b = anonymize(&corpus, b"salt-1").unwrap();
        assert_eq!(a, b);
        let c = anonymize(&corpus, b"salt-2").unwrap();
        let ids = |c: &Corpus| -> HashSet<String> {
            c.reviews
                .iter()
                .flat_map(|r| [r.reviewer.clone(), r.reviewee.clone()])
                .collect()
        };
        assert!(ids(&a).is_disjoint(&ids(&c)));
        assert_eq!(a.reviews[0].reviewer, a.reviews[1].reviewee);
        assert_eq!(a.reviews[0].reviewer.len(), PSEUDONYM_LEN);
        assert!(a.reviews[0].reviewer.chars().all(|ch| ch.is_ascii_hexdigit()));
        for (x, y) in corpus.reviews.iter().zip(&a.reviews) {
            assert_eq!(x.comments, y.comments);
            assert_eq!(x.id, y.id);
            assert_eq!(x.year, y.year);
        }
    }

    #[test]
    fn same_display_name_distinct_ids_get_distinct_pseudonyms() {
        // Two students both called "Sam Lee" are only ever known by id.
        let corpus = Corpus::new(vec![
            review("r1", "sam-lee-1001", "x", 2019, &["ok"]),
            review("r2", "sam-lee-1002", "x", 2019, &["ok"]),
        ]);
        let a = anonymize(&corpus, b"k").unwrap();
        assert_ne!(a.reviews[0].reviewer, a.reviews[1].reviewer);
    }

    #[test]
    fn anonymize_rejects_empty_salt() {
        assert!(matches!(
            anonymize(&Corpus::default(), b""),
            Err(CorpusError::EmptySalt)
        ));
    }

    #[test]
    fn stats_hand_counts() {
        let corpus = Corpus::new(vec![review("r1", "a", "b", 2020, &["good clear labels"])]);
        let st = stats(&corpus);
        assert_eq!(st.total_words, 3);
        assert_eq!(st.mean_words_per_review, Some(3.0));
        assert_eq!(st.words_by_year[&2020], 3);
        assert_eq!(st.comments_by_year[&2020], 1);

        let empty = stats(&Corpus::default());
        assert_eq!(empty.total_reviews, 0);
        assert_eq!(empty.total_words, 0);
        assert_eq!(empty.mean_words_per_review, None);
        assert!(empty.words_by_year.is_empty());
    }

    #[test]
    fn stats_is_additive_over_disjoint_corpora() {
        let a = Corpus::new(vec![review("r1", "a", "b", 2018, &["one two", "three"])]);
        let b = Corpus::new(vec![review("r2", "a", "b", 2021, &["four five six seven"])]);
        let (sa, sb) = (stats(&a), stats(&b));
        let merged = stats(&a.merge(b));
        assert_eq!(merged.total_words, sa.total_words + sb.total_words);
        assert_eq!(merged.words_by_year.values().sum::<usize>(), merged.total_words);
    }
}

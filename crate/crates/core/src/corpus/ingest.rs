//! CSV and JSONL ingestion and export.
//!
//! CSV holds one comment per row. Consecutive rows with the same review id
//! belong to the same review and must agree on every review-level field. A
//! row with empty comment id and empty text carries a review without
//! comments. JSONL holds one review object per line; review-level keys are
//! the same as the CSV columns and comments live in a `comments` array.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{
    validate, Comment, Corpus, CorpusError, Review, RubricCategory, RubricScore, Semester, DEFAULT_SCORE_RANGE,
};

/// Key of the comment array in a JSONL review object.
const COMMENTS_KEY: &str = "comments";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "jsonl" | "ndjson" => Some(Format::Jsonl),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "ndjson" => Ok(Format::Jsonl),
            other => Err(format!("unknown format `{other}`; expected csv or jsonl")),
        }
    }
}

/// Column (CSV) or key (JSONL) names, plus the declared corpus ranges.
///
/// `review_id`, `reviewer`, `reviewee`, `year` and `text` are required in the
/// input; every other column is read when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub review_id: String,
    pub comment_id: String,
    pub reviewer: String,
    pub reviewee: String,
    pub year: String,
    pub semester: String,
    pub text: String,
    pub sentiment: String,
    pub category: String,
    pub label: String,
    pub rubric_columns: BTreeMap<RubricCategory, String>,
    pub score_range: (i32, i32),
    /// When unset the span is taken from the data.
    pub year_span: Option<(i32, i32)>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            review_id: "review_id".into(),
            comment_id: "comment_id".into(),
            reviewer: "reviewer".into(),
            reviewee: "reviewee".into(),
            year: "year".into(),
            semester: "semester".into(),
            text: "text".into(),
            sentiment: "sentiment".into(),
            category: "category".into(),
            label: "label".into(),
            rubric_columns: RubricCategory::ALL
                .into_iter()
                .map(|c| (c, c.name().to_string()))
                .collect(),
            score_range: DEFAULT_SCORE_RANGE,
            year_span: None,
        }
    }
}

impl Schema {
    fn rubric_column(&self, category: RubricCategory) -> Option<&str> {
        self.rubric_columns.get(&category).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ReviewHead {
    id: String,
    reviewer: String,
    reviewee: String,
    year: i32,
    semester: Semester,
    rubric_scores: Vec<RubricScore>,
}

struct CommentFields {
    id: Option<String>,
    text: String,
    sentiment: Option<f64>,
    category: Option<RubricCategory>,
    label: Option<String>,
}

fn required(line: u64, field: &str, value: Option<String>) -> Result<String, CorpusError> {
    value.ok_or_else(|| CorpusError::Field {
        line,
        field: field.to_string(),
        message: "missing value".into(),
    })
}

fn parse_num<T: FromStr>(line: u64, field: &str, raw: &str) -> Result<T, CorpusError>
where
    T::Err: fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| CorpusError::Field {
        line,
        field: field.to_string(),
        message: format!("cannot parse `{raw}`: {e}"),
    })
}

fn parse_head<F>(line: u64, schema: &Schema, get: F) -> Result<ReviewHead, CorpusError>
where
    F: Fn(&str) -> Option<String>,
{
    let year_raw = required(line, &schema.year, get(&schema.year))?;
    let semester = match get(&schema.semester) {
        Some(raw) => raw.parse().map_err(|message| CorpusError::Field {
            line,
            field: schema.semester.clone(),
            message,
        })?,
        None => Semester::Fall,
    };
    let mut rubric_scores = Vec::new();
    for category in RubricCategory::ALL {
        let Some(column) = schema.rubric_column(category) else {
            continue;
        };
        if let Some(raw) = get(column) {
            rubric_scores.push(RubricScore {
                category,
                score: parse_num(line, column, &raw)?,
            });
        }
    }
    Ok(ReviewHead {
        id: required(line, &schema.review_id, get(&schema.review_id))?,
        reviewer: required(line, &schema.reviewer, get(&schema.reviewer))?,
        reviewee: required(line, &schema.reviewee, get(&schema.reviewee))?,
        year: parse_num(line, &schema.year, &year_raw)?,
        semester,
        rubric_scores,
    })
}

/// `get` returns trimmed, non-empty values; `text` is returned untrimmed.
fn parse_comment<F>(line: u64, schema: &Schema, get: F) -> Result<Option<CommentFields>, CorpusError>
where
    F: Fn(&str) -> Option<String>,
{
    let id = get(&schema.comment_id);
    let text = get(&schema.text).unwrap_or_default();
    if text.trim().is_empty() {
        if id.is_none() {
            return Ok(None);
        }
        return Err(CorpusError::Field {
            line,
            field: schema.text.clone(),
            message: "comment text is empty".into(),
        });
    }
    let sentiment = match get(&schema.sentiment) {
        Some(raw) => {
            let value: f64 = parse_num(line, &schema.sentiment, &raw)?;
            if !(-1.0..=1.0).contains(&value) {
                return Err(CorpusError::SentimentOutOfRange { line, value });
            }
            Some(value)
        }
        None => None,
    };
    let category = match get(&schema.category) {
        Some(raw) => Some(
            raw.parse()
                .map_err(|_| CorpusError::UnknownCategory { line, value: raw })?,
        ),
        None => None,
    };
    Ok(Some(CommentFields {
        id,
        text,
        sentiment,
        category,
        label: get(&schema.label),
    }))
}

#[derive(Default)]
struct Assembler {
    reviews: Vec<Review>,
    head: Option<ReviewHead>,
}

impl Assembler {
    fn push(&mut self, line: u64, head: ReviewHead, comment: Option<CommentFields>) -> Result<(), CorpusError> {
        let continues = matches!(&self.head, Some(h) if h.id == head.id);
        if continues {
            let prev = self.head.as_ref().expect("checked above");
            let field = if prev.reviewer != head.reviewer {
                Some("reviewer")
            } else if prev.reviewee != head.reviewee {
                Some("reviewee")
            } else if prev.year != head.year {
                Some("year")
            } else if prev.semester != head.semester {
                Some("semester")
            } else if prev.rubric_scores != head.rubric_scores {
                Some("rubric scores")
            } else {
                None
            };
            if let Some(field) = field {
                return Err(CorpusError::InconsistentReview {
                    line,
                    id: head.id,
                    field: field.into(),
                });
            }
        } else {
            self.reviews.push(Review {
                id: head.id.clone(),
                reviewer: head.reviewer.clone(),
                reviewee: head.reviewee.clone(),
                year: head.year,
                semester: head.semester,
                rubric_scores: head.rubric_scores.clone(),
                comments: Vec::new(),
            });
            self.head = Some(head);
        }
        if let Some(fields) = comment {
            let review = self.reviews.last_mut().expect("review pushed above");
            let id = fields
                .id
                .unwrap_or_else(|| format!("{}-c{}", review.id, review.comments.len() + 1));
            review.comments.push(Comment {
                id,
                review_id: review.id.clone(),
                text: fields.text,
                sentiment: fields.sentiment,
                category: fields.category,
                label: fields.label,
            });
        }
        Ok(())
    }

    /// Starts a new review even if the next one repeats the same id.
    fn break_run(&mut self) {
        self.head = None;
    }

    fn finish(self, schema: &Schema) -> Result<Corpus, CorpusError> {
        let mut corpus = Corpus::new(self.reviews);
        corpus.score_range = schema.score_range;
        if schema.year_span.is_some() {
            corpus.year_span = schema.year_span;
        }
        let report = validate(&corpus);
        if report.is_empty() {
            Ok(corpus)
        } else {
            Err(CorpusError::Invalid(report))
        }
    }
}

fn non_empty(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Reads a corpus and checks it against every corpus invariant.
pub fn ingest<R: Read>(reader: R, format: Format, schema: &Schema) -> Result<Corpus, CorpusError> {
    match format {
        Format::Csv => ingest_csv(reader, schema),
        Format::Jsonl => ingest_jsonl(reader, schema),
    }
}

fn csv_error(err: csv::Error) -> CorpusError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => CorpusError::Io(e),
        csv::ErrorKind::Utf8 { err, .. } => CorpusError::Csv {
            line,
            message: format!("invalid UTF-8 in field {}", err.field() + 1),
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => CorpusError::Csv {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => CorpusError::Csv {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn ingest_csv<R: Read>(reader: R, schema: &Schema) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let index: BTreeMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    for column in [
        &schema.review_id,
        &schema.reviewer,
        &schema.reviewee,
        &schema.year,
        &schema.text,
    ] {
        if !index.contains_key(column.as_str()) {
            return Err(CorpusError::MissingColumn(column.clone()));
        }
    }

    let mut asm = Assembler::default();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(csv_error)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |name: &str| index.get(name).and_then(|&i| record.get(i));
        let get = |name: &str| field(name).and_then(non_empty);
        let head = parse_head(line, schema, get)?;
        let comment = parse_comment(line, schema, |name: &str| {
            if name == schema.text {
                field(name).map(str::to_string)
            } else {
                get(name)
            }
        })?;
        asm.push(line, head, comment)?;
    }
    asm.finish(schema)
}

fn json_scalar(line: u64, key: &str, value: Option<&Value>) -> Result<Option<String>, CorpusError> {
    match value {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(Value::Bool(b)) => Ok(Some(b.to_string())),
        Some(_) => Err(CorpusError::Field {
            line,
            field: key.to_string(),
            message: "expected a scalar value".into(),
        }),
    }
}

fn ingest_jsonl<R: Read>(reader: R, schema: &Schema) -> Result<Corpus, CorpusError> {
    let mut asm = Assembler::default();
    for (i, text) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let text = text.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => CorpusError::Csv {
                line: line_no,
                message: "stream is not valid UTF-8".into(),
            },
            _ => CorpusError::Io(e),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let object: Map<String, Value> = serde_json::from_str(&text).map_err(|e| CorpusError::Json {
            line: i + 1,
            message: e.to_string(),
        })?;
        let lookup = |obj: &Map<String, Value>, key: &str| -> Result<Option<String>, CorpusError> {
            json_scalar(line_no, key, obj.get(key))
        };

        // Surface non-scalar values as errors before the infallible getters below.
        for key in object.keys().filter(|k| k.as_str() != COMMENTS_KEY) {
            lookup(&object, key)?;
        }
        let get = |key: &str| lookup(&object, key).ok().flatten().and_then(|s| non_empty(&s));
        let head = parse_head(line_no, schema, get)?;

        asm.break_run();
        let comments = match object.get(COMMENTS_KEY) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items.clone(),
            Some(_) => {
                return Err(CorpusError::Field {
                    line: line_no,
                    field: COMMENTS_KEY.into(),
                    message: "expected an array of comment objects".into(),
                })
            }
        };
        if comments.is_empty() {
            asm.push(line_no, head.clone(), None)?;
        }
        for item in &comments {
            let Value::Object(obj) = item else {
                return Err(CorpusError::Field {
                    line: line_no,
                    field: COMMENTS_KEY.into(),
                    message: "expected an array of comment objects".into(),
                });
            };
            for key in obj.keys() {
                lookup(obj, key)?;
            }
            let fields = parse_comment(line_no, schema, |key: &str| {
                let value = lookup(obj, key).ok().flatten();
                if key == schema.text {
                    value
                } else {
                    value.and_then(|s| non_empty(&s))
                }
            })?;
            let Some(fields) = fields else {
                return Err(CorpusError::Field {
                    line: line_no,
                    field: schema.text.clone(),
                    message: "comment text is empty".into(),
                });
            };
            asm.push(line_no, head.clone(), Some(fields))?;
        }
    }
    asm.finish(schema)
}

/// Writes a corpus in the layout `ingest` reads back.
pub fn export<W: Write>(corpus: &Corpus, writer: W, format: Format, schema: &Schema) -> Result<(), CorpusError> {
    match format {
        Format::Csv => export_csv(corpus, writer, schema),
        Format::Jsonl => export_jsonl(corpus, writer, schema),
    }
}

fn export_csv<W: Write>(corpus: &Corpus, writer: W, schema: &Schema) -> Result<(), CorpusError> {
    let rubric: Vec<(RubricCategory, &str)> = RubricCategory::ALL
        .into_iter()
        .filter_map(|c| schema.rubric_column(c).map(|col| (c, col)))
        .collect();
    let mut header = vec![
        schema.review_id.as_str(),
        &schema.comment_id,
        &schema.reviewer,
        &schema.reviewee,
        &schema.year,
        &schema.semester,
        &schema.text,
        &schema.sentiment,
        &schema.category,
        &schema.label,
    ];
    header.extend(rubric.iter().map(|(_, col)| *col));

    let mut wtr = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| CorpusError::Io(e.into());
    wtr.write_record(&header).map_err(io)?;
    for review in &corpus.reviews {
        let scores: Vec<String> = rubric
            .iter()
            .map(|(c, _)| review.score(*c).map(|s| s.to_string()).unwrap_or_default())
            .collect();
        let mut write_row = |comment: Option<&Comment>| -> Result<(), CorpusError> {
            let mut row = vec![
                review.id.clone(),
                comment.map(|c| c.id.clone()).unwrap_or_default(),
                review.reviewer.clone(),
                review.reviewee.clone(),
                review.year.to_string(),
                review.semester.to_string(),
                comment.map(|c| c.text.clone()).unwrap_or_default(),
                comment
                    .and_then(|c| c.sentiment)
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
                comment
                    .and_then(|c| c.category)
                    .map(|c| c.name().to_string())
                    .unwrap_or_default(),
                comment.and_then(|c| c.label.clone()).unwrap_or_default(),
            ];
            row.extend(scores.iter().cloned());
            wtr.write_record(&row).map_err(io)
        };
        if review.comments.is_empty() {
            write_row(None)?;
        }
        for comment in &review.comments {
            write_row(Some(comment))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn export_jsonl<W: Write>(corpus: &Corpus, mut writer: W, schema: &Schema) -> Result<(), CorpusError> {
    for review in &corpus.reviews {
        let mut obj = Map::new();
        obj.insert(schema.review_id.clone(), review.id.clone().into());
        obj.insert(schema.reviewer.clone(), review.reviewer.clone().into());
        obj.insert(schema.reviewee.clone(), review.reviewee.clone().into());
        obj.insert(schema.year.clone(), review.year.into());
        obj.insert(schema.semester.clone(), review.semester.to_string().into());
        for s in &review.rubric_scores {
            if let Some(col) = schema.rubric_column(s.category) {
                obj.insert(col.to_string(), s.score.into());
            }
        }
        let comments: Vec<Value> = review
            .comments
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert(schema.comment_id.clone(), c.id.clone().into());
                m.insert(schema.text.clone(), c.text.clone().into());
                if let Some(s) = c.sentiment {
                    m.insert(schema.sentiment.clone(), s.into());
                }
                if let Some(cat) = c.category {
                    m.insert(schema.category.clone(), cat.name().into());
                }
                if let Some(label) = &c.label {
                    m.insert(schema.label.clone(), label.clone().into());
                }
                Value::Object(m)
            })
            .collect();
        obj.insert(COMMENTS_KEY.into(), Value::Array(comments));
        serde_json::to_writer(&mut writer, &Value::Object(obj)).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

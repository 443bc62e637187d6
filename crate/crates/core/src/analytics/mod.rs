//! Descriptive reporting: yearly word-count trends, POS distributions,
//! Pearson correlation matrices and per-category rubric scores.

mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, RubricCategory};
use crate::evalkit::{cross_validate, ConfusionMatrix, EvalError, FoldPlan, FoldWarning, Ratio};
use crate::pipeline::{Dataset, PipelineConfig};
use crate::textproc::{pos_profile, tokenize, PosProfile, PosTag, PosTagger};

pub use report::{emit_report, ReferenceAnnotations, ReportBundle, ReportFormat, REPORT_SCHEMA, REPORT_SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("series lengths differ ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("trend CSV line {line}: {message}")]
    TrendCsv { line: usize, message: String },
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub metric: String,
    /// `(year, value)` with strictly increasing years.
    pub points: Vec<(i32, f64)>,
}

impl TrendSeries {
    pub fn total(&self) -> f64 {
        self.points.iter().map(|p| p.1).sum()
    }

    /// Years whose value is strictly above both neighbours (end points
    /// compare against their single neighbour).
    pub fn peaks(&self) -> Vec<i32> {
        let v: Vec<f64> = self.points.iter().map(|p| p.1).collect();
        (0..v.len())
            .filter(|&i| {
                let left = i == 0 || v[i] > v[i - 1];
                let right = i + 1 == v.len() || v[i] > v[i + 1];
                v.len() > 1 && left && right
            })
            .map(|i| self.points[i].0)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("year,{}\n", self.metric);
        for (year, value) in &self.points {
            out.push_str(&format!("{year},{value}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, AnalyticsError> {
        let bad = |line: usize, message: String| AnalyticsError::TrendCsv { line, message };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad(1, "empty input".into()))?;
        let metric = header
            .strip_prefix("year,")
            .ok_or_else(|| bad(1, format!("expected `year,<metric>` header, got `{header}`")))?
            .to_string();
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let (year, value) = line
                .split_once(',')
                .ok_or_else(|| bad(n, "expected two fields".into()))?;
            let year: i32 = year.parse().map_err(|e| bad(n, format!("year: {e}")))?;
            let value: f64 = value.parse().map_err(|e| bad(n, format!("value: {e}")))?;
            if points.last().is_some_and(|&(prev, _)| prev >= year) {
                return Err(bad(n, "years must be strictly increasing".into()));
            }
            points.push((year, value));
        }
        Ok(TrendSeries { metric, points })
    }
}

/// Token totals per year, zero-filled across the corpus year span.
pub fn yearly_word_counts(corpus: &Corpus) -> TrendSeries {
    let mut by_year: BTreeMap<i32, usize> = BTreeMap::new();
    for review in &corpus.reviews {
        let words: usize = review.comments.iter().map(|c| tokenize(&c.text).len()).sum();
        *by_year.entry(review.year).or_default() += words;
    }
    let span = corpus.year_span.or_else(|| {
        let first = *by_year.keys().next()?;
        let last = *by_year.keys().next_back()?;
        Some((first, last))
    });
    let mut points = Vec::new();
    if let Some((lo, hi)) = span {
        let lo = lo.min(by_year.keys().next().copied().unwrap_or(lo));
        let hi = hi.max(by_year.keys().next_back().copied().unwrap_or(hi));
        for year in lo..=hi {
            points.push((year, by_year.get(&year).copied().unwrap_or(0) as f64));
        }
    }
    TrendSeries {
        metric: "words".into(),
        points,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosDistribution {
    pub totals: PosProfile,
    pub comments: usize,
    /// Share of each tag; absent when there are no tokens.
    pub proportions: Option<BTreeMap<PosTag, f64>>,
    /// Tokens of each tag per comment; absent when there are no comments.
    pub per_comment: Option<BTreeMap<PosTag, f64>>,
}

pub fn pos_distribution(corpus: &Corpus, tagger: &impl PosTagger) -> PosDistribution {
    let mut totals = PosProfile::default();
    let mut comments = 0;
    for (_, comment) in corpus.comments() {
        totals.add(&pos_profile(&tagger.tag_all(&tokenize(&comment.text))));
        comments += 1;
    }
    let share = |denom: usize| {
        (denom > 0).then(|| {
            PosTag::ALL
                .into_iter()
                .map(|t| (t, totals.count(t) as f64 / denom as f64))
                .collect()
        })
    };
    PosDistribution {
        proportions: share(totals.token_total),
        per_comment: share(comments),
        totals,
        comments,
    }
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

/// Product-moment correlation; `None` when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(AnalyticsError::TooShort(x.len()));
    }
    if is_constant(x) || is_constant(y) {
        return Ok(None);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom == 0.0 || !denom.is_finite() {
        return Ok(None);
    }
    Ok(Some((sxy / denom).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    /// `None` marks cells involving a zero-variance variable.
    pub values: Vec<Vec<Option<f64>>>,
    pub observations: usize,
    /// Unit of observation, e.g. `comment`.
    pub granularity: String,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        self.values[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable");
        for v in &self.variables {
            out.push(',');
            out.push_str(v);
        }
        out.push('\n');
        for (name, row) in self.variables.iter().zip(&self.values) {
            out.push_str(name);
            for cell in row {
                out.push(',');
                if let Some(r) = cell {
                    out.push_str(&r.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pairwise Pearson coefficients. Each pair is computed once and mirrored,
/// so the result is exactly symmetric.
pub fn correlation_matrix(
    columns: &[(String, Vec<f64>)],
    granularity: &str,
) -> Result<CorrelationMatrix, AnalyticsError> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if let Some((_, col)) = columns.iter().find(|c| c.1.len() != n) {
        return Err(AnalyticsError::LengthMismatch { x: n, y: col.len() });
    }
    if n < 2 {
        return Err(AnalyticsError::TooShort(n));
    }
    let m = columns.len();
    let mut values = vec![vec![None; m]; m];
    for i in 0..m {
        values[i][i] = (!is_constant(&columns[i].1)).then_some(1.0);
        for j in i + 1..m {
            let r = pearson(&columns[i].1, &columns[j].1)?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        variables: columns.iter().map(|c| c.0.clone()).collect(),
        values,
        observations: n,
        granularity: granularity.to_string(),
    })
}

/// Per-comment counts of noun, verb, adverb and adjective tokens, plus the
/// comment length when `include_length` is set.
pub fn pos_count_columns(corpus: &Corpus, tagger: &impl PosTagger, include_length: bool) -> Vec<(String, Vec<f64>)> {
    const TAGS: [PosTag; 4] = [PosTag::Noun, PosTag::Verb, PosTag::Adverb, PosTag::Adjective];
    let profiles: Vec<PosProfile> = corpus
        .comments()
        .map(|(_, c)| pos_profile(&tagger.tag_all(&tokenize(&c.text))))
        .collect();
    let mut columns: Vec<(String, Vec<f64>)> = TAGS
        .into_iter()
        .map(|t| {
            (
                t.name().to_string(),
                profiles.iter().map(|p| p.count(t) as f64).collect(),
            )
        })
        .collect();
    if include_length {
        columns.push(("length".into(), profiles.iter().map(|p| p.token_total as f64).collect()));
    }
    columns
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RubricReport {
    /// One-vs-rest sensitivity per category under cross-validation;
    /// `None` when the category does not occur in the data.
    pub scores: BTreeMap<RubricCategory, Option<f64>>,
    pub best: Option<RubricCategory>,
    pub accuracy: Ratio,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<FoldWarning>,
}

/// Cross-validates a rubric-category dataset and scores each category
/// against the rest from the pooled confusion matrix.
pub fn rubric_report(
    dataset: &Dataset,
    config: &PipelineConfig,
    plan: &FoldPlan,
) -> Result<RubricReport, AnalyticsError> {
    let cv = cross_validate(dataset, config, plan)?;
    let cm = cv.metrics.confusion;
    let mut scores = BTreeMap::new();
    for category in RubricCategory::ALL {
        let score = cm.index(category.name()).and_then(|i| {
            let (tp, fn_, _, _) = cm.one_vs_rest(i);
            Ratio::new(tp, tp + fn_).value()
        });
        scores.insert(category, score);
    }
    let mut best: Option<(RubricCategory, f64)> = None;
    for category in RubricCategory::ALL {
        if let Some(s) = scores[&category] {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((category, s));
            }
        }
    }
    Ok(RubricReport {
        scores,
        best: best.map(|b| b.0),
        accuracy: cm.accuracy(),
        confusion: cm,
        warnings: cv.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::review;
    use crate::corpus::{stats, Comment};
    use crate::evalkit::kfold_plan;
    use crate::pipeline::Task;
    use crate::textproc::Lexicon;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn word_trend_examples() {
        let c = Corpus::new(vec![
            review("r1", "a", "b", 2018, &["a b"]),
            review("r2", "b", "a", 2019, &["c d e"]),
        ]);
        assert_eq!(yearly_word_counts(&c).points, vec![(2018, 2.0), (2019, 3.0)]);
        assert!(yearly_word_counts(&Corpus::default()).points.is_empty());

        let gap = Corpus::new(vec![
            review("r1", "a", "b", 2017, &["a"]),
            review("r2", "b", "a", 2020, &["b c"]),
        ]);
        let series = yearly_word_counts(&gap);
        assert_eq!(series.points.len(), 4);
        assert_eq!(series.points[1], (2018, 0.0));
        assert_eq!(series.total() as usize, stats(&gap).total_words);
        assert_eq!(TrendSeries::from_csv(&series.to_csv()).unwrap(), series);
    }

    #[test]
    fn peaks() {
        let s = TrendSeries {
            metric: "words".into(),
            points: vec![
                (2017, 1.0),
                (2018, 2.0),
                (2019, 5.0),
                (2020, 3.0),
                (2021, 3.5),
                (2022, 6.0),
            ],
        };
        assert_eq!(s.peaks(), vec![2019, 2022]);
    }

    #[test]
    fn pos_distribution_examples() {
        let lex = Lexicon::new().with_word("runs", PosTag::Verb);
        let c = Corpus::new(vec![review("r1", "a", "b", 2020, &["dog cat runs"])]);
        let d = pos_distribution(&c, &lex);
        let p = d.proportions.unwrap();
        assert!((p[&PosTag::Noun] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[&PosTag::Verb] - 1.0 / 3.0).abs() < 1e-12);
        let empty = pos_distribution(&Corpus::default(), &lex);
        assert_eq!(empty.totals.token_total, 0);
        assert!(empty.proportions.is_none());
    }

    #[test]
    fn pearson_hand_cases() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), Some(1.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[6.0, 4.0, 2.0]).unwrap(), Some(-1.0));
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap().unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), None);
        assert!(matches!(
            pearson(&[1.0], &[1.0, 2.0]),
            Err(AnalyticsError::LengthMismatch { .. })
        ));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(AnalyticsError::TooShort(1))));
    }

    #[test]
    fn correlation_matrix_cases() {
        let cols = vec![
            ("a".to_string(), vec![1.0, 2.0, 4.0]),
            ("b".to_string(), vec![1.0, 2.0, 4.0]),
            ("c".to_string(), vec![3.0, 3.0, 3.0]),
        ];
        let m = correlation_matrix(&cols, "comment").unwrap();
        assert_eq!(m.get("a", "b"), Some(1.0));
        assert_eq!(m.get("a", "a"), Some(1.0));
        assert_eq!(m.values[2], vec![None, None, None]);
        assert_eq!(m.to_csv().lines().nth(3), Some("c,,,"));
    }

    #[test]
    fn independent_columns_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cols: Vec<(String, Vec<f64>)> = (0..4)
            .map(|i| (format!("v{i}"), (0..10_000).map(|_| rng.random::<f64>()).collect()))
            .collect();
        let m = correlation_matrix(&cols, "synthetic").unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(m.values[i][j].unwrap().abs() < 0.05);
                }
            }
        }
    }

    fn rubric_corpus(categories: &[(RubricCategory, &str)], per: usize) -> Corpus {
        let mut r = review("r1", "a", "b", 2020, &[]);
        for (k, (category, text)) in categories.iter().enumerate() {
            for i in 0..per {
                let mut c = Comment::new(format!("c{k}-{i}"), "r1", *text);
                c.category = Some(*category);
                r.comments.push(c);
            }
        }
        Corpus::new(vec![r])
    }

    #[test]
    fn distinct_vocabulary_category_scores_highest() {
        let corpus = rubric_corpus(
            &[
                (RubricCategory::LieFactor, "lie factor distorted scale"),
                (RubricCategory::ClearLabeling, "good chart nice chart"),
                (RubricCategory::ChartJunk, "good chart nice chart"),
            ],
            12,
        );
        let config = PipelineConfig::new(Task::Rubric);
        let data = Dataset::from_corpus(&corpus, &config, &Lexicon::starter()).unwrap();
        let plan = kfold_plan(data.len(), 4, 3, true, Some(&data.labels())).unwrap();
        let report = rubric_report(&data, &config, &plan).unwrap();
        assert_eq!(report.scores[&RubricCategory::LieFactor], Some(1.0));
        assert_eq!(report.best, Some(RubricCategory::LieFactor));
        assert_eq!(report.scores[&RubricCategory::GestaltPrinciples], None);
    }

    #[test]
    fn single_category_corpus() {
        let corpus = rubric_corpus(&[(RubricCategory::DataInkRatio, "ink ratio")], 6);
        let config = PipelineConfig::new(Task::Rubric);
        let data = Dataset::from_corpus(&corpus, &config, &Lexicon::starter()).unwrap();
        let plan = kfold_plan(data.len(), 3, 3, false, None).unwrap();
        let report = rubric_report(&data, &config, &plan).unwrap();
        assert_eq!(report.scores[&RubricCategory::DataInkRatio], Some(1.0));
        assert_eq!(report.scores.values().filter(|s| s.is_none()).count(), 4);
    }

    proptest! {
        #[test]
        fn pearson_symmetry_and_affine_invariance(
            xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            let r = pearson(&x, &y).unwrap();
            prop_assert_eq!(r, pearson(&y, &x).unwrap());
            if let Some(r) = r {
                prop_assert!((-1.0..=1.0).contains(&r));
                let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
                let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
                prop_assert!((pearson(&scaled, &y).unwrap().unwrap() - r).abs() < 1e-9);
                prop_assert!((pearson(&flipped, &y).unwrap().unwrap() + r).abs() < 1e-9);
            }
        }
    }
}

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    correlation_matrix, pos_count_columns, pos_distribution, yearly_word_counts, AnalyticsError, CorrelationMatrix,
    PosDistribution, RubricReport, TrendSeries,
};
use crate::corpus::{stats, Corpus, CorpusStats};
use crate::textproc::{PosTag, PosTagger};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// JSON schema for `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Text => "text",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "text" | "txt" => Ok(ReportFormat::Text),
            _ => Err(format!("unknown report format `{s}`; expected json, csv or text")),
        }
    }
}

/// Externally published figures kept for comparison only; nothing is
/// asserted against them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceAnnotations {
    pub pos_correlation_band: (f64, f64),
}

impl Default for ReferenceAnnotations {
    fn default() -> Self {
        ReferenceAnnotations {
            pos_correlation_band: (0.82, 0.87),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub stats: CorpusStats,
    pub word_trend: TrendSeries,
    pub pos_distribution: PosDistribution,
    /// Absent for corpora with fewer than two comments.
    pub correlation: Option<CorrelationMatrix>,
    pub rubric: Option<RubricReport>,
    pub reference: ReferenceAnnotations,
}

impl ReportBundle {
    /// Descriptive part of the report. `rubric` is filled in separately
    /// because it needs a trained model.
    pub fn describe(corpus: &Corpus, tagger: &impl PosTagger, include_length: bool) -> Self {
        let columns = pos_count_columns(corpus, tagger, include_length);
        ReportBundle {
            schema_version: REPORT_SCHEMA_VERSION,
            stats: stats(corpus),
            word_trend: yearly_word_counts(corpus),
            pos_distribution: pos_distribution(corpus, tagger),
            correlation: correlation_matrix(&columns, "comment").ok(),
            rubric: None,
            reference: ReferenceAnnotations::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let st = &self.stats;
        out.push_str(&format!(
            "reviews {}  comments {}  words {}\n",
            st.total_reviews, st.total_comments, st.total_words
        ));
        if let Some(m) = st.mean_words_per_review {
            out.push_str(&format!("mean words per review {m:.2}\n"));
        }
        out.push_str("\nwords by year\n");
        for (year, v) in &self.word_trend.points {
            out.push_str(&format!("  {year}  {v:>10}\n"));
        }
        let peaks = self.word_trend.peaks();
        if !peaks.is_empty() {
            let peaks: Vec<String> = peaks.iter().map(i32::to_string).collect();
            out.push_str(&format!("  peaks: {}\n", peaks.join(", ")));
        }
        out.push_str("\npart of speech\n");
        for tag in PosTag::ALL {
            let share = self
                .pos_distribution
                .proportions
                .as_ref()
                .map_or("-".to_string(), |p| format!("{:.4}", p[&tag]));
            out.push_str(&format!(
                "  {:<10} {:>8}  {:>8}\n",
                tag.name(),
                self.pos_distribution.totals.count(tag),
                share
            ));
        }
        if let Some(m) = &self.correlation {
            out.push_str(&format!("\ncorrelation ({} {}s)\n", m.observations, m.granularity));
            out.push_str(&format!("  {:<10}", ""));
            for v in &m.variables {
                out.push_str(&format!(" {v:>10}"));
            }
            out.push('\n');
            for (name, row) in m.variables.iter().zip(&m.values) {
                out.push_str(&format!("  {name:<10}"));
                for cell in row {
                    let s = cell.map_or("-".to_string(), |r| format!("{r:.3}"));
                    out.push_str(&format!(" {s:>10}"));
                }
                out.push('\n');
            }
        }
        if let Some(r) = &self.rubric {
            out.push_str(&format!("\nrubric categories (accuracy {})\n", r.accuracy));
            for (category, score) in &r.scores {
                let s = score.map_or("unavailable".to_string(), |s| format!("{s:.4}"));
                out.push_str(&format!("  {:<18} {s}\n", category.name()));
            }
            if let Some(best) = r.best {
                out.push_str(&format!("  best: {}\n", best.name()));
            }
        }
        let (lo, hi) = self.reference.pos_correlation_band;
        out.push_str(&format!("\nreference POS correlation band {lo}-{hi} (not asserted)\n"));
        out
    }

    fn pos_csv(&self) -> String {
        let mut out = String::from("tag,count,proportion\n");
        for tag in PosTag::ALL {
            let share = self
                .pos_distribution
                .proportions
                .as_ref()
                .map_or(String::new(), |p| p[&tag].to_string());
            out.push_str(&format!(
                "{},{},{}\n",
                tag.name(),
                self.pos_distribution.totals.count(tag),
                share
            ));
        }
        out
    }

    fn rubric_csv(r: &RubricReport) -> String {
        let mut out = String::from("category,score\n");
        for (category, score) in &r.scores {
            let s = score.map_or(String::new(), |s| s.to_string());
            out.push_str(&format!("{},{s}\n", category.name()));
        }
        out
    }
}

/// Writes the requested formats into `dir` and returns the written paths
/// in order. Output bytes depend only on the bundle.
pub fn emit_report(
    bundle: &ReportBundle,
    formats: &[ReportFormat],
    dir: &Path,
) -> Result<Vec<PathBuf>, AnalyticsError> {
    fs::create_dir_all(dir)?;
    let mut formats = formats.to_vec();
    formats.sort_unstable();
    formats.dedup();
    let mut written = Vec::new();
    let mut write = |name: &str, contents: String| -> Result<(), AnalyticsError> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    for format in formats {
        match format {
            ReportFormat::Json => write("report.json", bundle.to_json())?,
            ReportFormat::Text => write("report.txt", bundle.to_text())?,
            ReportFormat::Csv => {
                write("word_trend.csv", bundle.word_trend.to_csv())?;
                write("pos_distribution.csv", bundle.pos_csv())?;
                if let Some(m) = &bundle.correlation {
                    write("pos_correlation.csv", m.to_csv())?;
                }
                if let Some(r) = &bundle.rubric {
                    write("rubric_scores.csv", ReportBundle::rubric_csv(r))?;
                    write("rubric_confusion.csv", r.confusion.to_csv())?;
                }
            }
        }
    }
    Ok(written)
}

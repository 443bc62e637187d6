//! The `peerfeed` command-line front end.
//!
//! Settings come from an optional TOML file (`--config`) and are overridden
//! by flags. Every run writes `effective-config.toml` into the output
//! directory with all defaults resolved, so the run can be replayed with
//! `--config`. The output directory itself is left out of that file.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! validation error, 3 internal error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analytics::{emit_report, rubric_report, ReportBundle, ReportFormat};
use crate::bayes::{self, FeatureKind};
use crate::corpus::{anonymize, export, ingest, stats, synthesize, Corpus, Format, GenSpec, Schema};
use crate::evalkit::{
    cross_validate, evaluate_holdout, holdout_split, kfold_plan, CrossValidation, MetricsReport, SplitSpec,
    DEFAULT_FOLDS,
};
use crate::pipeline::{fit, Dataset, PipelineConfig, Task};
use crate::textproc::{Lexicon, Vocabulary, DEFAULT_SENTIMENT_EPSILON};

pub const EFFECTIVE_CONFIG: &str = "effective-config.toml";
pub const MODEL_FILE: &str = "model.pfnb";
pub const VOCABULARY_FILE: &str = "vocabulary.txt";
const DEFAULT_OUT: &str = "peerfeed-out";
const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
const DEFAULT_SYNTH_COMMENTS: usize = 2000;
const DEFAULT_SEPARATION: f64 = 6.0;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Parser, Debug)]
#[command(
    name = "peerfeed",
    version,
    about = "Peer-review comment mining with a Naive Bayes classifier"
)]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Data format (csv or jsonl) for input and corpus output.
    #[arg(long, global = true)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Input corpus files; several files are merged.
    #[arg(long, num_args = 1..)]
    input: Vec<PathBuf>,
    /// TOML column mapping for the input files.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// POS lexicon (`word<TAB>TAG` lines); the bundled lexicon by default.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    /// pos, rubric, sentiment or label.
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    alpha: Option<f64>,
    /// token-counts or pos-profile.
    #[arg(long)]
    features: Option<FeatureKind>,
    #[arg(long)]
    min_frequency: Option<usize>,
    #[arg(long)]
    sentiment_epsilon: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct EvalArgs {
    /// Stratify by label (default true); `--stratified false` turns it off.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    stratified: Option<bool>,
    /// Class reported as positive in the binary metrics.
    #[arg(long)]
    positive_class: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate, optionally pseudonymize, and re-export a corpus.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        /// Replace participant ids with keyed pseudonyms.
        #[arg(long)]
        salt: Option<String>,
    },
    /// Corpus counts per year.
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit a model on the whole corpus.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Classify texts or corpus comments with a trained model.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Directory holding a trained model.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Text to classify; repeatable.
        #[arg(long)]
        text: Vec<String>,
    },
    /// Holdout evaluation.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Training fraction.
        #[arg(long)]
        split: Option<f64>,
    },
    /// k-fold cross-validation.
    Crossval {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Descriptive report plus per-category rubric scores.
    Report {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        folds: Option<usize>,
        /// Comma-separated subset of json, csv, text.
        #[arg(long, value_delimiter = ',')]
        report_formats: Vec<ReportFormat>,
    },
    /// Draw a synthetic rubric corpus.
    Synth {
        #[arg(long)]
        comments: Option<usize>,
        /// Weight of a category's own keywords relative to background words.
        #[arg(long)]
        separation: Option<f64>,
        /// JSON generative spec; replaces the rubric preset.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Stats { .. } => "stats",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::Crossval { .. } => "crossval",
            Command::Report { .. } => "report",
            Command::Synth { .. } => "synth",
        }
    }
}

/// Settings shared by the config file and the flags. Every field is
/// optional so that either source may supply it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub seed: Option<u64>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub input: Option<Vec<PathBuf>>,
    pub schema: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub salt: Option<String>,
    pub task: Option<Task>,
    pub alpha: Option<f64>,
    pub features: Option<FeatureKind>,
    pub min_frequency: Option<usize>,
    pub sentiment_epsilon: Option<f64>,
    pub train_fraction: Option<f64>,
    pub stratified: Option<bool>,
    pub positive_class: Option<String>,
    pub folds: Option<usize>,
    pub model: Option<PathBuf>,
    pub text: Option<Vec<String>>,
    pub report_formats: Option<Vec<ReportFormat>>,
    pub comments: Option<usize>,
    pub separation: Option<f64>,
    pub spec: Option<PathBuf>,
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn set_list<T>(slot: &mut Option<Vec<T>>, flag: Vec<T>) {
    if !flag.is_empty() {
        *slot = Some(flag);
    }
}

/// Parses a TOML config file. Errors name the line.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        let msg = e.message().to_string();
        CliError::Usage(match line {
            Some(line) => format!("config {} line {line}: {msg}", path.display()),
            None => format!("config {}: {msg}", path.display()),
        })
    })
}

impl RunConfig {
    fn apply_data(&mut self, d: DataArgs) {
        set_list(&mut self.input, d.input);
        set(&mut self.schema, d.schema);
        set(&mut self.lexicon, d.lexicon);
    }

    fn apply_model(&mut self, m: ModelArgs) {
        set(&mut self.task, m.task);
        set(&mut self.alpha, m.alpha);
        set(&mut self.features, m.features);
        set(&mut self.min_frequency, m.min_frequency);
        set(&mut self.sentiment_epsilon, m.sentiment_epsilon);
    }

    fn apply_eval(&mut self, e: EvalArgs) {
        set(&mut self.stratified, e.stratified);
        set(&mut self.positive_class, e.positive_class);
    }

    fn resolve_model_defaults(&mut self) -> Result<(), CliError> {
        if self.task.is_none() {
            return Err(missing("task"));
        }
        self.alpha.get_or_insert(1.0);
        self.features.get_or_insert(FeatureKind::TokenCounts);
        self.min_frequency.get_or_insert(1);
        self.sentiment_epsilon.get_or_insert(DEFAULT_SENTIMENT_EPSILON);
        Ok(())
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            task: self.task.expect("resolved"),
            feature_kind: self.features.unwrap_or_default(),
            alpha: self.alpha.unwrap_or(1.0),
            min_frequency: self.min_frequency.unwrap_or(1),
            sentiment_epsilon: self.sentiment_epsilon.unwrap_or(DEFAULT_SENTIMENT_EPSILON),
        }
    }

    fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| missing("seed"))
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

fn missing(field: &str) -> CliError {
    CliError::Usage(format!(
        "missing required setting `{field}` (pass --{} or set `{field}` in the config file)",
        field.replace('_', "-")
    ))
}

/// Stage seed derived from the master seed and a stage name.
pub fn derive_seed(master: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Merges the config file and flags for the parsed command.
fn build_config(cli: Cli) -> Result<(RunConfig, Command), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.out, cli.out);
    set(&mut cfg.format, cli.format);
    let mut command = cli.command;
    cfg.command = Some(command.name().to_string());
    match &mut command {
        Command::Ingest { data, salt } => {
            cfg.apply_data(std::mem::take(data));
            set(&mut cfg.salt, salt.take());
        }
        Command::Stats { data } => cfg.apply_data(std::mem::take(data)),
        Command::Train { data, model } => {
            cfg.apply_data(std::mem::take(data));
            cfg.apply_model(std::mem::take(model));
            cfg.resolve_model_defaults()?;
        }
        Command::Predict { data, model, text } => {
            cfg.apply_data(std::mem::take(data));
            set(&mut cfg.model, model.take());
            set_list(&mut cfg.text, std::mem::take(text));
            if cfg.model.is_none() {
                return Err(missing("model"));
            }
            if cfg.input.is_none() && cfg.text.is_none() {
                return Err(CliError::Usage("predict needs --input or --text".into()));
            }
        }
        Command::Evaluate {
            data,
            model,
            eval,
            split,
        } => {
            cfg.apply_data(std::mem::take(data));
            cfg.apply_model(std::mem::take(model));
            cfg.apply_eval(std::mem::take(eval));
            set(&mut cfg.train_fraction, split.take());
            cfg.resolve_model_defaults()?;
            cfg.train_fraction.get_or_insert(DEFAULT_TRAIN_FRACTION);
            cfg.stratified.get_or_insert(true);
            cfg.seed()?;
        }
        Command::Crossval {
            data,
            model,
            eval,
            folds,
        } => {
            cfg.apply_data(std::mem::take(data));
            cfg.apply_model(std::mem::take(model));
            cfg.apply_eval(std::mem::take(eval));
            set(&mut cfg.folds, folds.take());
            cfg.resolve_model_defaults()?;
            cfg.folds.get_or_insert(DEFAULT_FOLDS);
            cfg.stratified.get_or_insert(true);
            cfg.seed()?;
        }
        Command::Report {
            data,
            model,
            folds,
            report_formats,
        } => {
            cfg.apply_data(std::mem::take(data));
            cfg.apply_model(std::mem::take(model));
            set(&mut cfg.folds, folds.take());
            set_list(&mut cfg.report_formats, std::mem::take(report_formats));
            cfg.task = Some(Task::Rubric);
            cfg.resolve_model_defaults()?;
            cfg.folds.get_or_insert(DEFAULT_FOLDS);
            cfg.report_formats
                .get_or_insert_with(|| vec![ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text]);
        }
        Command::Synth {
            comments,
            separation,
            spec,
        } => {
            set(&mut cfg.comments, comments.take());
            set(&mut cfg.separation, separation.take());
            set(&mut cfg.spec, spec.take());
            if cfg.spec.is_none() {
                cfg.comments.get_or_insert(DEFAULT_SYNTH_COMMENTS);
                cfg.separation.get_or_insert(DEFAULT_SEPARATION);
            }
            cfg.format.get_or_insert(Format::Csv);
            cfg.seed()?;
        }
    }
    if matches!(
        command,
        Command::Ingest { .. }
            | Command::Stats { .. }
            | Command::Train { .. }
            | Command::Evaluate { .. }
            | Command::Crossval { .. }
            | Command::Report { .. }
    ) && cfg.input.is_none()
    {
        return Err(missing("input"));
    }
    Ok((cfg, command))
}

fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    let schema = match &cfg.schema {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
            toml::from_str::<Schema>(&text).map_err(|e| data_err(format!("{}: {}", path.display(), e.message())))?
        }
        None => Schema::default(),
    };
    let mut corpus: Option<Corpus> = None;
    for path in cfg.input.iter().flatten() {
        let format = cfg
            .format
            .or_else(|| Format::from_path(path))
            .ok_or_else(|| CliError::Usage(format!("cannot tell the format of {}; pass --format", path.display())))?;
        let file = fs::File::open(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        let part = ingest(file, format, &schema).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        corpus = Some(match corpus {
            Some(c) => c.merge(part),
            None => part,
        });
    }
    Ok(corpus.unwrap_or_default())
}

fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon, CliError> {
    match &cfg.lexicon {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
            Lexicon::parse(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))
        }
        None => Ok(Lexicon::starter()),
    }
}

fn build_dataset(cfg: &RunConfig, corpus: &Corpus, lexicon: &Lexicon) -> Result<Dataset, CliError> {
    let config = cfg.pipeline();
    let data = Dataset::from_corpus(corpus, &config, lexicon).map_err(data_err)?;
    if data.len() < 2 {
        return Err(CliError::Data(format!(
            "only {} comments carry a `{}` label; need at least 2",
            data.len(),
            config.task
        )));
    }
    Ok(data)
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| internal(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn json_pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(internal)?;
    s.push('\n');
    Ok(s)
}

fn write_metrics(out: &mut Output, cfg: &RunConfig, mut cv: CrossValidation) -> Result<serde_json::Value, CliError> {
    if let Some(p) = &cfg.positive_class {
        let m = &cv.metrics;
        cv.metrics =
            MetricsReport::new(m.confusion.clone(), Some(p), m.per_fold_accuracies.clone()).map_err(data_err)?;
    }
    out.write("metrics.json", json_pretty(&cv)?)?;
    out.write("metrics.txt", cv.metrics.to_text())?;
    out.write("confusion.csv", cv.metrics.confusion.to_csv())?;
    Ok(json!({
        "examples": cv.metrics.confusion.total(),
        "accuracy": cv.metrics.accuracy.value(),
        "accuracy_mean": cv.metrics.accuracy_mean,
        "accuracy_std": cv.metrics.accuracy_std,
        "warnings": cv.warnings.len(),
    }))
}

fn execute(cfg: &RunConfig, command: &Command, out: &mut Output) -> Result<serde_json::Value, CliError> {
    match command {
        Command::Ingest { .. } => {
            let mut corpus = load_corpus(cfg)?;
            if let Some(salt) = &cfg.salt {
                corpus = anonymize(&corpus, salt.as_bytes()).map_err(data_err)?;
            }
            let format = cfg.format.unwrap_or(Format::Jsonl);
            let mut buf = Vec::new();
            export(&corpus, &mut buf, format, &Schema::default()).map_err(internal)?;
            out.write(&format!("corpus.{}", format.extension()), buf)?;
            Ok(json!({ "reviews": corpus.reviews.len(), "comments": corpus.comment_count() }))
        }
        Command::Stats { .. } => {
            let st = stats(&load_corpus(cfg)?);
            out.write("stats.json", json_pretty(&st)?)?;
            Ok(json!({ "reviews": st.total_reviews, "comments": st.total_comments, "words": st.total_words }))
        }
        Command::Train { .. } => {
            let corpus = load_corpus(cfg)?;
            let lexicon = load_lexicon(cfg)?;
            let data = build_dataset(cfg, &corpus, &lexicon)?;
            let all: Vec<usize> = (0..data.len()).collect();
            let trained = fit(&data, &all, &cfg.pipeline()).map_err(data_err)?;
            out.write(MODEL_FILE, bayes::save(&trained.model))?;
            out.write(VOCABULARY_FILE, trained.vocabulary.to_text())?;
            Ok(json!({
                "examples": data.len(),
                "skipped": data.skipped,
                "classes": trained.model.class_labels(),
                "vocabulary": trained.vocabulary.len(),
            }))
        }
        Command::Predict { .. } => {
            let dir = cfg.model.as_ref().expect("validated");
            let read = |name: &str| {
                let path = dir.join(name);
                fs::read(&path).map_err(|e| data_err(format!("{}: {e}", path.display())))
            };
            let model = bayes::load(&read(MODEL_FILE)?).map_err(data_err)?;
            let vocab_text = String::from_utf8(read(VOCABULARY_FILE)?).map_err(data_err)?;
            let vocabulary = Vocabulary::from_text(&vocab_text);
            model.check_vocabulary(&vocabulary).map_err(data_err)?;
            let lexicon = load_lexicon(cfg)?;

            let mut items: Vec<(String, String)> = Vec::new();
            if cfg.input.is_some() {
                let corpus = load_corpus(cfg)?;
                items.extend(corpus.comments().map(|(_, c)| (c.id.clone(), c.text.clone())));
            }
            for (i, text) in cfg.text.iter().flatten().enumerate() {
                items.push((format!("text-{}", i + 1), text.clone()));
            }
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["id", "predicted", "probability"]).map_err(internal)?;
            for (id, text) in &items {
                let tokens = crate::textproc::tokenize(text);
                let x = crate::textproc::featurize(&tokens, &vocabulary, &lexicon);
                let post = model.posteriors(&x).map_err(data_err)?;
                let label = model.predict(&x).map_err(data_err)?;
                let p = post.get(label).unwrap_or(0.0);
                wtr.write_record([id.as_str(), label, &format!("{p:.6}")])
                    .map_err(internal)?;
            }
            out.write("predictions.csv", wtr.into_inner().map_err(internal)?)?;
            Ok(json!({ "predictions": items.len() }))
        }
        Command::Evaluate { .. } => {
            let corpus = load_corpus(cfg)?;
            let lexicon = load_lexicon(cfg)?;
            let data = build_dataset(cfg, &corpus, &lexicon)?;
            let spec = SplitSpec::new(
                cfg.train_fraction.expect("resolved"),
                derive_seed(cfg.seed()?, "holdout"),
            )
            .stratified(cfg.stratified.unwrap_or(true));
            let labels = data.labels();
            let split = holdout_split(data.len(), &spec, Some(&labels)).map_err(data_err)?;
            let cv = evaluate_holdout(&data, &cfg.pipeline(), &split).map_err(data_err)?;
            write_metrics(out, cfg, cv)
        }
        Command::Crossval { .. } => {
            let corpus = load_corpus(cfg)?;
            let lexicon = load_lexicon(cfg)?;
            let data = build_dataset(cfg, &corpus, &lexicon)?;
            let labels = data.labels();
            let plan = kfold_plan(
                data.len(),
                cfg.folds.expect("resolved"),
                derive_seed(cfg.seed()?, "folds"),
                cfg.stratified.unwrap_or(true),
                Some(&labels),
            )
            .map_err(data_err)?;
            let cv = cross_validate(&data, &cfg.pipeline(), &plan).map_err(data_err)?;
            write_metrics(out, cfg, cv)
        }
        Command::Report { .. } => {
            let corpus = load_corpus(cfg)?;
            let lexicon = load_lexicon(cfg)?;
            let mut bundle = ReportBundle::describe(&corpus, &lexicon, true);
            let data = Dataset::from_corpus(&corpus, &cfg.pipeline(), &lexicon).map_err(data_err)?;
            if data.len() >= 2 {
                let labels = data.labels();
                let k = cfg.folds.expect("resolved").min(data.len());
                let plan = kfold_plan(
                    data.len(),
                    k,
                    derive_seed(cfg.seed()?, "report-folds"),
                    true,
                    Some(&labels),
                )
                .map_err(data_err)?;
                bundle.rubric = Some(rubric_report(&data, &cfg.pipeline(), &plan).map_err(data_err)?);
            }
            let formats = cfg.report_formats.clone().unwrap_or_default();
            let written = emit_report(&bundle, &formats, &out.dir).map_err(internal)?;
            out.files.extend(
                written
                    .iter()
                    .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())),
            );
            Ok(json!({
                "comments": bundle.stats.total_comments,
                "words": bundle.stats.total_words,
                "rubric_best": bundle.rubric.as_ref().and_then(|r| r.best).map(|c| c.name()),
            }))
        }
        Command::Synth { .. } => {
            let spec = match &cfg.spec {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<GenSpec>(&text).map_err(|e| data_err(format!("{}: {e}", path.display())))?
                }
                None => GenSpec::rubric_preset(cfg.comments.expect("resolved"), cfg.separation.expect("resolved")),
            };
            let corpus = synthesize(&spec, derive_seed(cfg.seed()?, "synth")).map_err(data_err)?;
            let format = cfg.format.expect("resolved");
            let mut buf = Vec::new();
            export(&corpus, &mut buf, format, &Schema::default()).map_err(internal)?;
            out.write(&format!("corpus.{}", format.extension()), buf)?;
            out.write("spec.json", json_pretty(&spec)?)?;
            Ok(json!({ "reviews": corpus.reviews.len(), "comments": corpus.comment_count() }))
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code. The summary line goes to `stdout`, errors to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    match run_parsed(cli) {
        Ok(summary) => {
            let _ = writeln!(stdout, "{summary}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn run_parsed(cli: Cli) -> Result<serde_json::Value, CliError> {
    let (cfg, command) = build_config(cli)?;
    let mut out = Output::new(cfg.out_dir())?;
    let effective = toml::to_string(&cfg).map_err(internal)?;
    let mut details = execute(&cfg, &command, &mut out)?;
    out.write(EFFECTIVE_CONFIG, effective)?;
    let summary = json!({
        "command": command.name(),
        "status": "ok",
        "out": out.dir.display().to_string(),
        "files": out.files,
    });
    if let (serde_json::Value::Object(s), serde_json::Value::Object(d)) = (summary, details.take()) {
        let mut merged = s;
        merged.extend(d);
        return Ok(serde_json::Value::Object(merged));
    }
    unreachable!("summaries are JSON objects")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("peerfeed").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_args(&["stats", "--bogus"]);
        assert_eq!(code, 1);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn missing_seed_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, _, err) = run_args(&["crossval", "--input", "x.csv", "--task", "rubric", "--out", out]);
        assert_eq!(code, 1);
        assert!(err.contains("`seed`"), "{err}");
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.toml");
        fs::write(&cfg_path, "alpha = 1.0\ntask = \"rubric\"\n").unwrap();
        let cli = Cli::try_parse_from([
            "peerfeed",
            "--config",
            cfg_path.to_str().unwrap(),
            "train",
            "--input",
            "c.csv",
            "--alpha",
            "2",
        ])
        .unwrap();
        let (cfg, _) = build_config(cli).unwrap();
        assert_eq!(cfg.alpha, Some(2.0));
        assert_eq!(cfg.task, Some(Task::Rubric));

        fs::write(&cfg_path, "").unwrap();
        let cli = Cli::try_parse_from([
            "peerfeed",
            "--config",
            cfg_path.to_str().unwrap(),
            "train",
            "--input",
            "c.csv",
            "--task",
            "pos",
        ])
        .unwrap();
        assert!(build_config(cli).is_ok());
    }

    #[test]
    fn config_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("bad.toml");
        fs::write(&cfg_path, "alpha = 1.0\n\nfolds = \"ten\"\n").unwrap();
        let err = load_config(&cfg_path).unwrap_err();
        assert!(err.message().contains("line 3"), "{}", err.message());
        fs::write(&cfg_path, "colour = 1\n").unwrap();
        assert!(load_config(&cfg_path).unwrap_err().message().contains("colour"));
    }

    #[test]
    fn derived_seeds_differ_by_stage() {
        assert_ne!(derive_seed(42, "folds"), derive_seed(42, "holdout"));
        assert_eq!(derive_seed(42, "folds"), derive_seed(42, "folds"));
    }
}

//! Peer-review comment mining.
//!
//! `peerfeed` ingests rubric-labelled peer-review comments, turns them into
//! part-of-speech and bag-of-words features, and trains a multinomial Naive
//! Bayes classifier over them. The evaluation side covers holdout splits,
//! stratified k-fold cross-validation, confusion-matrix metrics
//! (sensitivity, specificity, PPV, NPV, accuracy) and a two-proportion
//! chi-squared test with continuity correction.
//!
//! The modules follow the pipeline order:
//!
//! * [`corpus`]: data model, CSV/JSONL ingestion, validation, anonymization,
//!   descriptive statistics and a seeded synthetic corpus generator.
//! * [`textproc`]: tokenizer, lexicon POS tagger, vocabulary and count
//!   vectorizer, sentiment discretization.
//! * [`bayes`]: the classifier and its binary model format.
//! * [`evalkit`]: splits, fold plans, confusion matrices, metrics and tests.
//! * [`pipeline`]: task-specific datasets and the train/evaluate glue used by
//!   cross-validation and the CLI.
//! * [`analytics`]: yearly trends, POS distributions, Pearson correlation
//!   matrices, rubric reports and report emission.
//! * [`cli`]: the `peerfeed` command-line front end.

pub mod analytics;
pub mod bayes;
pub mod cli;
pub mod corpus;
pub mod evalkit;
pub mod pipeline;
pub mod textproc;

pub use bayes::{FeatureKind, NaiveBayesModel, Posterior};
pub use corpus::{Comment, Corpus, Review, RubricCategory, RubricScore, Semester};
pub use evalkit::{ConfusionMatrix, FoldPlan, MetricsReport, Ratio, SplitSpec};
pub use pipeline::{Dataset, PipelineConfig, Task};
pub use textproc::{Lexicon, PosProfile, PosTag, SentimentClass, Vocabulary};

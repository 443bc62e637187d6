//! Validation machinery: holdout splits, fold plans, confusion matrices,
//! predictive metrics, the two-proportion test and a consistency check for
//! reported metric triples.

mod crossval;
mod metrics;
mod split;
mod stats;

use thiserror::Error;

use crate::bayes::BayesError;

pub use crossval::{cross_validate, evaluate_holdout, CrossValidation, FoldWarning};
pub use metrics::{
    binary_metrics, confusion, mean_and_sample_std, BinaryMetrics, ConfusionMatrix, MacroAverage, MetricsReport, Ratio,
};
pub use split::{holdout_split, kfold_plan, FoldPlan, Holdout, SplitSpec, CONFORMANT_TRAIN_FRACTION, DEFAULT_FOLDS};
pub use stats::{
    metric_feasibility, two_proportion_test, Feasibility, FeasibilityReport, ProportionTestResult,
    FEASIBILITY_TOLERANCE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("need at least 2 records, got {0}")]
    TooFewRecords(usize),
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("{labels} labels for {records} records")]
    LabelCountMismatch { labels: usize, records: usize },
    #[error("stratified splitting needs labels")]
    MissingLabels,
    #[error("fold count {k} must satisfy 2 <= k <= {n}")]
    InvalidFolds { k: usize, n: usize },
    #[error("{actual} actual labels but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("label `{0}` is not among the declared classes")]
    UnknownLabel(String),
    #[error("confusion matrices have different class lists")]
    ClassMismatch,
    #[error("binary metrics need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("{name} = {value} is outside [0, 1]")]
    RateOutOfRange { name: &'static str, value: f64 },
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error("fold plan covers {plan} records but the dataset has {records}")]
    PlanMismatch { plan: usize, records: usize },
    #[error(transparent)]
    Bayes(#[from] BayesError),
}

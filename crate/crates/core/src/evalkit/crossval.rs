use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{confusion, ConfusionMatrix, MetricsReport};
use super::split::{FoldPlan, Holdout};
use super::EvalError;
use crate::pipeline::{fit, Dataset, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldWarning {
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation {
    pub metrics: MetricsReport,
    pub warnings: Vec<FoldWarning>,
}

struct FoldResult {
    cm: ConfusionMatrix,
    warnings: Vec<String>,
}

fn evaluate_fold(
    dataset: &Dataset,
    config: &PipelineConfig,
    classes: &[String],
    train: &[usize],
    test: &[usize],
) -> Result<FoldResult, EvalError> {
    let trained = fit(dataset, train, config)?;
    let warnings = classes
        .iter()
        .filter(|c| trained.model.class_index(c).is_none())
        .map(|c| format!("class `{c}` is absent from the training folds"))
        .collect();
    let actual: Vec<&str> = test.iter().map(|&i| dataset.examples[i].label.as_str()).collect();
    let predicted = test
        .iter()
        .map(|&i| trained.predict_example(&dataset.examples[i]))
        .collect::<Result<Vec<&str>, _>>()?;
    let cm = confusion(&actual, &predicted, classes)?;
    Ok(FoldResult { cm, warnings })
}

/// Trains on each fold's complement and evaluates on the fold. Folds run in
/// parallel; results are combined in fold order. The confusion matrix in
/// the report is the sum over folds.
pub fn cross_validate(
    dataset: &Dataset,
    config: &PipelineConfig,
    plan: &FoldPlan,
) -> Result<CrossValidation, EvalError> {
    if plan.len() != dataset.len() {
        return Err(EvalError::PlanMismatch {
            plan: plan.len(),
            records: dataset.len(),
        });
    }
    let classes = dataset.classes();
    let folds: Vec<FoldResult> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            evaluate_fold(
                dataset,
                config,
                &classes,
                &plan.train_indices(fold),
                &plan.test_indices(fold),
            )
        })
        .collect::<Result<_, _>>()?;

    let mut total = ConfusionMatrix::zeros(classes);
    let mut accuracies = Vec::with_capacity(folds.len());
    let mut warnings = Vec::new();
    for (fold, result) in folds.into_iter().enumerate() {
        total.add(&result.cm)?;
        accuracies.push(result.cm.accuracy().value().unwrap_or(0.0));
        warnings.extend(result.warnings.into_iter().map(|message| FoldWarning { fold, message }));
    }
    Ok(CrossValidation {
        metrics: MetricsReport::new(total, None, accuracies)?,
        warnings,
    })
}

/// Single train/test evaluation over a precomputed split.
pub fn evaluate_holdout(
    dataset: &Dataset,
    config: &PipelineConfig,
    split: &Holdout,
) -> Result<CrossValidation, EvalError> {
    let classes = dataset.classes();
    let result = evaluate_fold(dataset, config, &classes, &split.train, &split.test)?;
    let warnings = split
        .warnings
        .iter()
        .chain(&result.warnings)
        .map(|message| FoldWarning {
            fold: 0,
            message: message.clone(),
        })
        .collect();
    let accuracy = result.cm.accuracy().value().into_iter().collect();
    Ok(CrossValidation {
        metrics: MetricsReport::new(result.cm, None, accuracy)?,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, Corpus, Review, Semester};
    use crate::evalkit::kfold_plan;
    use crate::pipeline::Task;
    use crate::textproc::Lexicon;

    fn separable(n: usize) -> Corpus {
        let comments = (0..n)
            .map(|i| {
                let (text, label) = if i % 2 == 0 {
                    ("alpha beta gamma", "x")
                } else {
                    ("delta epsilon zeta", "y")
                };
                let mut c = Comment::new(format!("c{i}"), "r1", text);
                c.label = Some(label.into());
                c
            })
            .collect();
        Corpus::new(vec![Review {
            id: "r1".into(),
            reviewer: "a".into(),
            reviewee: "b".into(),
            year: 2020,
            semester: Semester::Fall,
            rubric_scores: vec![],
            comments,
        }])
    }

    #[test]
    fn separable_corpus_is_perfect() {
        let config = PipelineConfig::new(Task::Label);
        let data = Dataset::from_corpus(&separable(40), &config, &Lexicon::starter()).unwrap();
        let plan = kfold_plan(data.len(), 5, 7, true, Some(&data.labels())).unwrap();
        let cv = cross_validate(&data, &config, &plan).unwrap();
        assert_eq!(cv.metrics.accuracy_mean, Some(1.0));
        assert_eq!(cv.metrics.per_fold_accuracies.len(), 5);
        assert_eq!(cv.metrics.confusion.total(), 40);
        assert!(cv.warnings.is_empty());
    }

    #[test]
    fn missing_class_in_training_is_a_warning() {
        let config = PipelineConfig::new(Task::Label);
        let mut corpus = separable(10);
        corpus.reviews[0].comments[0].label = Some("z".into());
        let data = Dataset::from_corpus(&corpus, &config, &Lexicon::starter()).unwrap();
        let plan = kfold_plan(data.len(), 5, 1, false, None).unwrap();
        let cv = cross_validate(&data, &config, &plan).unwrap();
        assert_eq!(cv.warnings.len(), 1);
        assert!(cv.warnings[0].message.contains("`z`"));
        assert!(cv.metrics.accuracy.equals_fraction(cv.metrics.confusion.trace(), 10));
    }

    #[test]
    fn plan_size_must_match() {
        let config = PipelineConfig::new(Task::Label);
        let data = Dataset::from_corpus(&separable(10), &config, &Lexicon::starter()).unwrap();
        let plan = kfold_plan(8, 2, 1, false, None).unwrap();
        assert_eq!(
            cross_validate(&data, &config, &plan),
            Err(EvalError::PlanMismatch { plan: 8, records: 10 })
        );
    }
}

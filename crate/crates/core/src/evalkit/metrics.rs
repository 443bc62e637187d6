use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::EvalError;

/// Exact rate `numerator / denominator`. A zero denominator is the
/// explicit "undefined" marker; it never turns into NaN or 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio { numerator, denominator }
    }

    pub fn is_defined(&self) -> bool {
        self.denominator != 0
    }

    pub fn value(&self) -> Option<f64> {
        self.is_defined()
            .then(|| self.numerator as f64 / self.denominator as f64)
    }

    /// Exact rational comparison with `num / den`.
    pub fn equals_fraction(&self, num: u64, den: u64) -> bool {
        self.is_defined()
            && den != 0
            && u128::from(self.numerator) * u128::from(den) == u128::from(num) * u128::from(self.denominator)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v:.4}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Ratio", 3)?;
        s.serialize_field("numerator", &self.numerator)?;
        s.serialize_field("denominator", &self.denominator)?;
        s.serialize_field("value", &self.value())?;
        s.end()
    }
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub class_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(class_labels: Vec<String>) -> Self {
        let n = class_labels.len();
        ConfusionMatrix {
            class_labels,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    pub fn accuracy(&self) -> Ratio {
        Ratio::new(self.trace(), self.total())
    }

    /// Cell-wise sum; both matrices must share the same labels.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<(), EvalError> {
        if self.class_labels != other.class_labels {
            return Err(EvalError::ClassMismatch);
        }
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (cell, v) in row.iter_mut().zip(other_row) {
                *cell += v;
            }
        }
        Ok(())
    }

    /// Collapses to (TP, FN, FP, TN) for `positive` against all other classes.
    pub fn one_vs_rest(&self, positive: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[positive][positive];
        let fn_ = self.row_sum(positive) - tp;
        let fp = self.column_sum(positive) - tp;
        let tn = self.total() - tp - fn_ - fp;
        (tp, fn_, fp, tn)
    }

    /// CSV with a labelled header row and a labelled first column.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["actual\\predicted".to_string()];
        header.extend(self.class_labels.iter().cloned());
        wtr.write_record(&header).expect("in-memory write");
        for (label, row) in self.class_labels.iter().zip(&self.counts) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(u64::to_string));
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("UTF-8 labels")
    }
}

/// Tallies `(actual, predicted)` pairs over an ordered class list.
pub fn confusion<A: AsRef<str>, P: AsRef<str>>(
    actual: &[A],
    predicted: &[P],
    classes: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(classes.to_vec());
    for (a, p) in actual.iter().zip(predicted) {
        let i = cm
            .index(a.as_ref())
            .ok_or_else(|| EvalError::UnknownLabel(a.as_ref().to_string()))?;
        let j = cm
            .index(p.as_ref())
            .ok_or_else(|| EvalError::UnknownLabel(p.as_ref().to_string()))?;
        cm.counts[i][j] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BinaryMetrics {
    pub positive_class: String,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    pub sensitivity: Ratio,
    pub specificity: Ratio,
    pub ppv: Ratio,
    pub npv: Ratio,
    pub accuracy: Ratio,
}

impl BinaryMetrics {
    pub fn from_counts(positive_class: impl Into<String>, tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        BinaryMetrics {
            positive_class: positive_class.into(),
            tp,
            fn_,
            fp,
            tn,
            sensitivity: Ratio::new(tp, tp + fn_),
            specificity: Ratio::new(tn, tn + fp),
            ppv: Ratio::new(tp, tp + fp),
            npv: Ratio::new(tn, tn + fn_),
            accuracy: Ratio::new(tp + tn, tp + fn_ + fp + tn),
        }
    }
}

/// Sensitivity, specificity, PPV, NPV and accuracy for `positive_class`
/// against the rest.
pub fn binary_metrics(cm: &ConfusionMatrix, positive_class: &str) -> Result<BinaryMetrics, EvalError> {
    if cm.class_labels.len() < 2 {
        return Err(EvalError::TooFewClasses(cm.class_labels.len()));
    }
    let p = cm
        .index(positive_class)
        .ok_or_else(|| EvalError::UnknownLabel(positive_class.to_string()))?;
    let (tp, fn_, fp, tn) = cm.one_vs_rest(p);
    Ok(BinaryMetrics::from_counts(positive_class, tp, fn_, fp, tn))
}

/// Unweighted mean over classes, skipping undefined values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroAverage {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Metrics of the designated positive class; `None` for one-class matrices.
    pub positive: Option<BinaryMetrics>,
    pub per_class: Vec<BinaryMetrics>,
    pub macro_average: MacroAverage,
    pub accuracy: Ratio,
    pub per_fold_accuracies: Vec<f64>,
    pub accuracy_mean: Option<f64>,
    /// Sample (n - 1) standard deviation across folds.
    pub accuracy_std: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    /// `positive_class` defaults to the first class label.
    pub fn new(
        confusion: ConfusionMatrix,
        positive_class: Option<&str>,
        per_fold_accuracies: Vec<f64>,
    ) -> Result<Self, EvalError> {
        let per_class: Vec<BinaryMetrics> = (0..confusion.class_labels.len())
            .map(|i| {
                let (tp, fn_, fp, tn) = confusion.one_vs_rest(i);
                BinaryMetrics::from_counts(confusion.class_labels[i].clone(), tp, fn_, fp, tn)
            })
            .collect();
        let positive = match positive_class.or(confusion.class_labels.first().map(String::as_str)) {
            Some(p) if confusion.class_labels.len() >= 2 => Some(binary_metrics(&confusion, p)?),
            Some(p) if confusion.index(p).is_none() => return Err(EvalError::UnknownLabel(p.into())),
            _ => None,
        };
        let macro_average = MacroAverage {
            sensitivity: mean_defined(per_class.iter().map(|m| m.sensitivity.value())),
            specificity: mean_defined(per_class.iter().map(|m| m.specificity.value())),
            ppv: mean_defined(per_class.iter().map(|m| m.ppv.value())),
            npv: mean_defined(per_class.iter().map(|m| m.npv.value())),
        };
        let (accuracy_mean, accuracy_std) = mean_and_sample_std(&per_fold_accuracies);
        Ok(MetricsReport {
            positive,
            per_class,
            macro_average,
            accuracy: confusion.accuracy(),
            per_fold_accuracies,
            accuracy_mean,
            accuracy_std,
            confusion,
        })
    }

    /// Aligned-column summary for terminals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("accuracy        {}\n", self.accuracy));
        if let (Some(mean), Some(std)) = (self.accuracy_mean, self.accuracy_std) {
            out.push_str(&format!(
                "fold accuracy   {mean:.4} +/- {std:.4} over {} folds\n",
                self.per_fold_accuracies.len()
            ));
        }
        let width = self
            .per_class
            .iter()
            .map(|m| m.positive_class.len())
            .max()
            .unwrap_or(0)
            .max(5);
        out.push_str(&format!(
            "\n{:<width$}  {:>11}  {:>11}  {:>9}  {:>9}\n",
            "class", "sensitivity", "specificity", "ppv", "npv"
        ));
        for m in &self.per_class {
            out.push_str(&format!(
                "{:<width$}  {:>11}  {:>11}  {:>9}  {:>9}\n",
                m.positive_class,
                m.sensitivity.to_string(),
                m.specificity.to_string(),
                m.ppv.to_string(),
                m.npv.to_string()
            ));
        }
        out
    }
}

pub fn mean_and_sample_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 2).then(|| {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    });
    (Some(mean), std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn confusion_examples() {
        let classes = labels(&["A", "B"]);
        let cm = confusion(&["A", "A", "B"], &["A", "B", "B"], &classes).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);

        let same = confusion(&["A", "B", "B"], &["A", "B", "B"], &classes).unwrap();
        assert_eq!(same.counts, vec![vec![1, 0], vec![0, 2]]);

        let empty = confusion::<&str, &str>(&[], &[], &classes).unwrap();
        assert_eq!(empty.total(), 0);

        assert!(matches!(
            confusion(&["A"], &["A", "B"], &classes),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert_eq!(
            confusion(&["A"], &["C"], &classes),
            Err(EvalError::UnknownLabel("C".into()))
        );
    }

    #[test]
    fn binary_metric_formulas() {
        let m = BinaryMetrics::from_counts("pos", 88, 12, 13, 87);
        assert!(m.sensitivity.equals_fraction(88, 100));
        assert!(m.specificity.equals_fraction(87, 100));
        assert!(m.accuracy.equals_fraction(875, 1000));
        assert!(m.ppv.equals_fraction(88, 101));
        assert!((m.ppv.value().unwrap() - 0.871).abs() < 1e-3);
        assert!(m.npv.equals_fraction(87, 99));
    }

    #[test]
    fn zero_denominators_are_undefined() {
        let m = BinaryMetrics::from_counts("pos", 0, 5, 0, 5);
        assert!(!m.ppv.is_defined());
        assert_eq!(m.ppv.value(), None);
        assert_eq!(m.ppv.to_string(), "undefined");
        let json = serde_json::to_value(m.ppv).unwrap();
        assert_eq!(json["value"], serde_json::Value::Null);
    }

    #[test]
    fn perfect_matrix_is_all_ones() {
        let cm = ConfusionMatrix {
            class_labels: labels(&["neg", "pos"]),
            counts: vec![vec![7, 0], vec![0, 3]],
        };
        let m = binary_metrics(&cm, "pos").unwrap();
        for r in [m.sensitivity, m.specificity, m.ppv, m.npv, m.accuracy] {
            assert_eq!(r.value(), Some(1.0));
        }
    }

    #[test]
    fn report_and_csv() {
        let cm = ConfusionMatrix {
            class_labels: labels(&["A", "B", "C"]),
            counts: vec![vec![5, 1, 0], vec![0, 4, 2], vec![1, 0, 3]],
        };
        let report = MetricsReport::new(cm.clone(), Some("B"), vec![0.7, 0.75, 0.8]).unwrap();
        assert_eq!(report.positive.as_ref().unwrap().positive_class, "B");
        assert_eq!(report.per_class.len(), 3);
        assert!((report.accuracy_mean.unwrap() - 0.75).abs() < 1e-12);
        assert!((report.accuracy_std.unwrap() - 0.05).abs() < 1e-12);
        assert!(report.accuracy.equals_fraction(12, 16));
        assert!(report.to_text().contains("sensitivity"));
        assert_eq!(cm.to_csv(), "actual\\predicted,A,B,C\nA,5,1,0\nB,0,4,2\nC,1,0,3\n");
        assert!(MetricsReport::new(cm, Some("Z"), vec![]).is_err());
    }

    #[test]
    fn binary_metrics_needs_two_classes() {
        let cm = ConfusionMatrix::zeros(labels(&["A"]));
        assert_eq!(binary_metrics(&cm, "A"), Err(EvalError::TooFewClasses(1)));
    }

    proptest! {
        #[test]
        fn swapping_positive_class_swaps_rates(cells in prop::array::uniform4(0u64..50)) {
            let cm = ConfusionMatrix {
                class_labels: labels(&["neg", "pos"]),
                counts: vec![vec![cells[0], cells[1]], vec![cells[2], cells[3]]],
            };
            let a = binary_metrics(&cm, "pos").unwrap();
            let b = binary_metrics(&cm, "neg").unwrap();
            prop_assert_eq!(a.sensitivity, b.specificity);
            prop_assert_eq!(a.specificity, b.sensitivity);
            prop_assert_eq!(a.ppv, b.npv);
            prop_assert_eq!(a.npv, b.ppv);
            prop_assert_eq!(a.accuracy, b.accuracy);
        }

        #[test]
        fn row_sums_ignore_predictions(actual in prop::collection::vec(0usize..3, 0..40), seed in prop::collection::vec(0usize..3, 40)) {
            let classes = labels(&["a", "b", "c"]);
            let names: Vec<&str> = actual.iter().map(|&i| classes[i].as_str()).collect();
            let predicted: Vec<&str> = (0..names.len()).map(|i| classes[seed[i]].as_str()).collect();
            let cm1 = confusion(&names, &names, &classes).unwrap();
            let cm2 = confusion(&names, &predicted, &classes).unwrap();
            prop_assert_eq!(cm2.total() as usize, names.len());
            for i in 0..3 {
                prop_assert_eq!(cm1.row_sum(i), cm2.row_sum(i));
            }
        }
    }
}

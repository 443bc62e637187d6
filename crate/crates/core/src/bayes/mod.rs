//! Multinomial Naive Bayes with Laplace smoothing.
//!
//! For class `k` and feature alphabet of size `n`:
//!
//! ```text
//! P(Y = k)      = count(k) / N
//! P(x_i | Y = k) = (count of i in class k + alpha) / (total count in class k + alpha * n)
//! score(k)      = ln P(Y = k) + sum_i x_i * ln P(x_i | Y = k)
//! ```
//!
//! Posteriors normalize `score` across classes with log-sum-exp. The
//! textbook form divides by the product of feature marginals instead; that
//! denominator does not depend on `k`, so the argmax is the same and the
//! class-normalized form is a proper distribution.
//!
//! Out-of-vocabulary tokens contribute `ln(1 / (n + 1))` to every class
//! alike, which leaves posteriors untouched while keeping raw scores
//! comparable across inputs of the same length.

mod format;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::{FeatureVector, PosTag, Vocabulary};

pub use format::{load, save, FORMAT_VERSION, MAGIC};

/// Profile counts above this share one bucket in `PosProfile` mode.
pub const POS_COUNT_CAP: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BayesError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("smoothing alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("class `{0}` has no training examples")]
    EmptyClass(String),
    #[error("label `{0}` is not one of the declared classes")]
    UnknownLabel(String),
    #[error("feature index {index} outside alphabet of size {size}")]
    DimensionMismatch { index: usize, size: usize },
    #[error("model file: bad magic bytes")]
    BadMagic,
    #[error("model file: unsupported format version {found} at offset {offset} (expected {expected})")]
    UnsupportedVersion { found: u16, expected: u16, offset: usize },
    #[error("model file truncated at offset {offset} while reading {field}")]
    Truncated { offset: usize, field: &'static str },
    #[error("model file corrupt at offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("model was trained on vocabulary {expected:016x}, got {found:016x}")]
    VocabularyMismatch { expected: u64, found: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Bag-of-words counts over the vocabulary.
    #[default]
    TokenCounts,
    /// Categorical mode: each (POS tag, capped count) pair is one symbol.
    PosProfile,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::TokenCounts => "token-counts",
            FeatureKind::PosProfile => "pos-profile",
        }
    }

    fn alphabet_size(self, vocab: &Vocabulary) -> usize {
        match self {
            FeatureKind::TokenCounts => vocab.len(),
            FeatureKind::PosProfile => PosTag::ALL.len() * (POS_COUNT_CAP + 1),
        }
    }

    /// Sparse symbol counts and the OOV tally for one feature vector.
    fn encode(self, x: &FeatureVector) -> (BTreeMap<usize, u32>, u32) {
        match self {
            FeatureKind::TokenCounts => (x.token_counts.counts.clone(), x.token_counts.oov),
            FeatureKind::PosProfile => {
                let symbols = PosTag::ALL
                    .into_iter()
                    .map(|tag| {
                        let bucket = x.pos_profile.count(tag).min(POS_COUNT_CAP);
                        (tag.index() * (POS_COUNT_CAP + 1) + bucket, 1)
                    })
                    .collect();
                (symbols, 0)
            }
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token-counts" | "tokens" => Ok(FeatureKind::TokenCounts),
            "pos-profile" | "pos" => Ok(FeatureKind::PosProfile),
            other => Err(format!(
                "unknown feature kind `{other}`; expected token-counts or pos-profile"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub feature_kind: FeatureKind,
    /// Declared class set. When `None`, the distinct training labels are used.
    pub classes: Option<Vec<String>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 1.0,
            feature_kind: FeatureKind::TokenCounts,
            classes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    class_labels: Vec<String>,
    class_counts: Vec<u64>,
    log_priors: Vec<f64>,
    /// `[class][feature]`
    log_likelihoods: Vec<Vec<f64>>,
    alpha: f64,
    vocabulary_size: usize,
    vocabulary_fingerprint: u64,
    feature_kind: FeatureKind,
}

/// Per-class probabilities, aligned with the model's class labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Posterior {
    pub labels: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl Posterior {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probabilities[i])
    }
}

/// Fits the model. Classes are ordered lexicographically.
pub fn train<L: AsRef<str>>(
    features: &[FeatureVector],
    labels: &[L],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<NaiveBayesModel, BayesError> {
    if !(config.alpha.is_finite() && config.alpha > 0.0) {
        return Err(BayesError::InvalidAlpha(config.alpha));
    }
    if features.len() != labels.len() {
        return Err(BayesError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(BayesError::EmptyTrainingSet);
    }

    let mut class_labels: Vec<String> = match &config.classes {
        Some(declared) => declared.clone(),
        None => labels.iter().map(|l| l.as_ref().to_string()).collect(),
    };
    class_labels.sort_unstable();
    class_labels.dedup();

    let kind = config.feature_kind;
    let n = kind.alphabet_size(vocab);
    let mut class_counts = vec![0u64; class_labels.len()];
    let mut feature_counts = vec![vec![0u64; n]; class_labels.len()];
    for (x, label) in features.iter().zip(labels) {
        let label = label.as_ref();
        let k = class_labels
            .binary_search_by(|c| c.as_str().cmp(label))
            .map_err(|_| BayesError::UnknownLabel(label.to_string()))?;
        class_counts[k] += 1;
        let (symbols, _) = kind.encode(x);
        for (index, count) in symbols {
            let slot = feature_counts[k]
                .get_mut(index)
                .ok_or(BayesError::DimensionMismatch { index, size: n })?;
            *slot += u64::from(count);
        }
    }
    if let Some(k) = class_counts.iter().position(|&c| c == 0) {
        return Err(BayesError::EmptyClass(class_labels[k].clone()));
    }

    let total = features.len() as f64;
    let log_priors = class_counts.iter().map(|&c| (c as f64 / total).ln()).collect();
    let log_likelihoods = feature_counts
        .iter()
        .map(|counts| {
            let denom = counts.iter().sum::<u64>() as f64 + config.alpha * n as f64;
            counts
                .iter()
                .map(|&c| ((c as f64 + config.alpha) / denom).ln())
                .collect()
        })
        .collect();

    Ok(NaiveBayesModel {
        class_labels,
        class_counts,
        log_priors,
        log_likelihoods,
        alpha: config.alpha,
        vocabulary_size: n,
        vocabulary_fingerprint: vocab.fingerprint(),
        feature_kind: kind,
    })
}

impl NaiveBayesModel {
    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn class_counts(&self) -> &[u64] {
        &self.class_counts
    }

    /// Empirical class frequencies, `count(k) / N`.
    pub fn priors(&self) -> Vec<f64> {
        let total: u64 = self.class_counts.iter().sum();
        self.class_counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn log_likelihoods(&self, class: usize) -> &[f64] {
        &self.log_likelihoods[class]
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Size of the feature alphabet `n`.
    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary_size
    }

    pub fn vocabulary_fingerprint(&self) -> u64 {
        self.vocabulary_fingerprint
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|c| c == label)
    }

    /// Shared log-likelihood of an out-of-vocabulary token.
    pub fn oov_log_likelihood(&self) -> f64 {
        -((self.vocabulary_size + 1) as f64).ln()
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<(), BayesError> {
        let found = vocab.fingerprint();
        if self.feature_kind == FeatureKind::TokenCounts && found != self.vocabulary_fingerprint {
            return Err(BayesError::VocabularyMismatch {
                expected: self.vocabulary_fingerprint,
                found,
            });
        }
        Ok(())
    }

    /// Unnormalized per-class log scores.
    pub fn log_posteriors(&self, x: &FeatureVector) -> Result<Vec<f64>, BayesError> {
        let (symbols, oov) = self.feature_kind.encode(x);
        if let Some((&index, _)) = symbols.iter().next_back() {
            if index >= self.vocabulary_size {
                return Err(BayesError::DimensionMismatch {
                    index,
                    size: self.vocabulary_size,
                });
            }
        }
        let oov_term = f64::from(oov) * self.oov_log_likelihood();
        Ok(self
            .log_priors
            .iter()
            .zip(&self.log_likelihoods)
            .map(|(prior, table)| {
                let evidence: f64 = symbols.iter().map(|(&i, &count)| f64::from(count) * table[i]).sum();
                prior + evidence + oov_term
            })
            .collect())
    }

    pub fn posteriors(&self, x: &FeatureVector) -> Result<Posterior, BayesError> {
        let scores = self.log_posteriors(x)?;
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let norm: f64 = shifted.iter().sum();
        Ok(Posterior {
            labels: self.class_labels.clone(),
            probabilities: shifted.into_iter().map(|p| p / norm).collect(),
        })
    }

    /// Highest-scoring class; exact ties go to the lexicographically
    /// smallest label.
    pub fn predict(&self, x: &FeatureVector) -> Result<&str, BayesError> {
        let scores = self.log_posteriors(x)?;
        let mut best = 0;
        for (k, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = k;
            }
        }
        Ok(&self.class_labels[best])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textproc::{featurize, tokenize, Lexicon};
    use proptest::prelude::*;

    pub(super) fn worked_example() -> (NaiveBayesModel, Vocabulary) {
        let docs = [("A", "good chart"), ("A", "good labels"), ("B", "bad chart")];
        let tokens: Vec<Vec<String>> = docs.iter().map(|(_, t)| tokenize(t)).collect();
        let vocab = Vocabulary::from_documents(tokens.iter().map(Vec::as_slice), 1);
        let lex = Lexicon::starter();
        let features: Vec<_> = tokens.iter().map(|t| featurize(t, &vocab, &lex)).collect();
        let labels: Vec<&str> = docs.iter().map(|(l, _)| *l).collect();
        let model = train(&features, &labels, &vocab, &TrainConfig::default()).unwrap();
        (model, vocab)
    }

    fn features_of(text: &str, vocab: &Vocabulary) -> FeatureVector {
        featurize(&tokenize(text), vocab, &Lexicon::starter())
    }

    fn likelihood(model: &NaiveBayesModel, vocab: &Vocabulary, class: &str, token: &str) -> f64 {
        let k = model.class_index(class).unwrap();
        model.log_likelihoods(k)[vocab.lookup(token).unwrap()].exp()
    }

    #[test]
    fn worked_example_tables() {
        let (model, vocab) = worked_example();
        assert_eq!(vocab.tokens(), ["bad", "chart", "good", "labels"]);
        assert!((model.priors()[0] - 2.0 / 3.0).abs() < 1e-15);
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(likelihood(&model, &vocab, "A", "good"), 3.0 / 8.0));
        assert!(close(likelihood(&model, &vocab, "A", "chart"), 2.0 / 8.0));
        assert!(close(likelihood(&model, &vocab, "A", "labels"), 2.0 / 8.0));
        assert!(close(likelihood(&model, &vocab, "A", "bad"), 1.0 / 8.0));
        assert!(close(likelihood(&model, &vocab, "B", "chart"), 2.0 / 6.0));
    }

    #[test]
    fn worked_example_scores_and_posterior() {
        let (model, vocab) = worked_example();
        let x = features_of("good chart", &vocab);
        let scores = model.log_posteriors(&x).unwrap();
        assert!((scores[0] - (1.0f64 / 16.0).ln()).abs() < 1e-12);
        assert!((scores[1] - (1.0f64 / 54.0).ln()).abs() < 1e-12);
        let post = model.posteriors(&x).unwrap();
        let expected = (1.0 / 16.0) / (1.0 / 16.0 + 1.0 / 54.0);
        assert!((post.get("A").unwrap() - expected).abs() < 1e-12);
        assert!((post.get("A").unwrap() - 0.771).abs() < 1e-3);
        assert_eq!(model.predict(&x).unwrap(), "A");
    }

    #[test]
    fn empty_input_scores_are_log_priors() {
        let (model, vocab) = worked_example();
        let x = features_of("", &vocab);
        assert_eq!(model.log_posteriors(&x).unwrap(), model.log_priors());
    }

    #[test]
    fn oov_only_input_falls_back_to_priors() {
        let (model, vocab) = worked_example();
        let x = features_of("zebra zebra giraffe", &vocab);
        assert_eq!(x.token_counts.oov, 3);
        let post = model.posteriors(&x).unwrap();
        assert!((post.get("A").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(model.predict(&x).unwrap(), "A");
    }

    #[test]
    fn doubling_counts_doubles_evidence() {
        let (model, vocab) = worked_example();
        let once = model.log_posteriors(&features_of("good chart", &vocab)).unwrap();
        let twice = model
            .log_posteriors(&features_of("good chart good chart", &vocab))
            .unwrap();
        for k in 0..2 {
            let evidence = once[k] - model.log_priors()[k];
            assert!((twice[k] - (model.log_priors()[k] + 2.0 * evidence)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_model() {
        let vocab = Vocabulary::from_tokens(["x", "y"]);
        let xs = vec![features_of("x y", &vocab), features_of("y", &vocab)];
        let model = train(&xs, &["only", "only"], &vocab, &TrainConfig::default()).unwrap();
        assert_eq!(model.priors(), vec![1.0]);
        assert_eq!(model.posteriors(&xs[0]).unwrap().probabilities, vec![1.0]);
    }

    #[test]
    fn symmetric_model_ties_to_smaller_label() {
        let vocab = Vocabulary::from_tokens(["x", "y"]);
        let xs = vec![features_of("x y", &vocab), features_of("x y", &vocab)];
        let model = train(&xs, &["zeta", "alpha"], &vocab, &TrainConfig::default()).unwrap();
        let post = model.posteriors(&features_of("x", &vocab)).unwrap();
        assert_eq!(post.probabilities, vec![0.5, 0.5]);
        assert_eq!(model.predict(&features_of("x", &vocab)).unwrap(), "alpha");
    }

    #[test]
    fn training_preconditions() {
        let vocab = Vocabulary::from_tokens(["x"]);
        let xs = vec![features_of("x", &vocab)];
        let zero = TrainConfig {
            alpha: 0.0,
            ..TrainConfig::default()
        };
        assert_eq!(
            train(&xs, &["a"], &vocab, &zero).unwrap_err(),
            BayesError::InvalidAlpha(0.0)
        );
        assert_eq!(
            train::<&str>(&[], &[], &vocab, &TrainConfig::default()).unwrap_err(),
            BayesError::EmptyTrainingSet
        );
        assert!(matches!(
            train(&xs, &["a", "b"], &vocab, &TrainConfig::default()),
            Err(BayesError::LengthMismatch { .. })
        ));
        let declared = TrainConfig {
            classes: Some(vec!["a".into(), "b".into()]),
            ..TrainConfig::default()
        };
        assert_eq!(
            train(&xs, &["a"], &vocab, &declared).unwrap_err(),
            BayesError::EmptyClass("b".into())
        );
        assert_eq!(
            train(&xs, &["c"], &vocab, &declared).unwrap_err(),
            BayesError::UnknownLabel("c".into())
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (model, _) = worked_example();
        let bigger = Vocabulary::from_tokens(["a", "b", "c", "d", "e", "f"]);
        let x = features_of("f", &bigger);
        assert!(matches!(
            model.log_posteriors(&x),
            Err(BayesError::DimensionMismatch { index: 5, size: 4 })
        ));
    }

    #[test]
    fn pos_profile_mode_learns_tag_patterns() {
        let lex = Lexicon::starter();
        let vocab = Vocabulary::default();
        let texts = [
            ("nouny", "chart legend axis title"),
            ("nouny", "map labels colors"),
            ("wordy", "very clearly really nicely"),
            ("wordy", "quite simply well"),
        ];
        let xs: Vec<_> = texts
            .iter()
            .map(|(_, t)| featurize(&tokenize(t), &vocab, &lex))
            .collect();
        let labels: Vec<_> = texts.iter().map(|(l, _)| *l).collect();
        let config = TrainConfig {
            feature_kind: FeatureKind::PosProfile,
            ..TrainConfig::default()
        };
        let model = train(&xs, &labels, &vocab, &config).unwrap();
        assert_eq!(model.vocabulary_size(), 40);
        assert_eq!(model.feature_kind(), FeatureKind::PosProfile);
        let probe = featurize(&tokenize("font grid"), &vocab, &lex);
        assert_eq!(model.predict(&probe).unwrap(), "nouny");
    }

    #[test]
    fn likelihood_tables_are_distributions() {
        let (model, _) = worked_example();
        for k in 0..model.class_labels().len() {
            let total: f64 = model.log_likelihoods(k).iter().map(|l| l.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        let priors: f64 = model.log_priors().iter().map(|l| l.exp()).sum();
        assert!((priors - 1.0).abs() < 1e-9);
    }

    fn arb_corpus() -> impl Strategy<Value = (Vec<(String, String)>, String)> {
        let doc = ("[abc]", "[pqrst ]{0,12}").prop_map(|(l, t)| (l, t));
        (prop::collection::vec(doc, 1..8), "[pqrstz ]{0,12}")
    }

    proptest! {
        #[test]
        fn posteriors_sum_to_one_and_are_order_free((docs, probe) in arb_corpus(), alpha in 0.1f64..3.0) {
            let tokens: Vec<Vec<String>> = docs.iter().map(|(_, t)| tokenize(t)).collect();
            let vocab = Vocabulary::from_documents(tokens.iter().map(Vec::as_slice), 1);
            let lex = Lexicon::new();
            let xs: Vec<_> = tokens.iter().map(|t| featurize(t, &vocab, &lex)).collect();
            let labels: Vec<&str> = docs.iter().map(|(l, _)| l.as_str()).collect();
            let config = TrainConfig { alpha, ..TrainConfig::default() };
            let model = train(&xs, &labels, &vocab, &config).unwrap();

            let mut probe_tokens = tokenize(&probe);
            let post = model.posteriors(&featurize(&probe_tokens, &vocab, &lex)).unwrap();
            prop_assert!((post.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let before = model.predict(&featurize(&probe_tokens, &vocab, &lex)).unwrap().to_string();
            probe_tokens.reverse();
            let after = model.predict(&featurize(&probe_tokens, &vocab, &lex)).unwrap().to_string();
            prop_assert_eq!(before, after);

            for (k, label) in model.class_labels().iter().enumerate() {
                let n = labels.iter().filter(|l| *l == label).count();
                prop_assert_eq!(model.priors()[k], n as f64 / labels.len() as f64);
            }
        }

        #[test]
        fn appending_a_token_shifts_log_odds_by_its_likelihood_ratio((docs, probe) in arb_corpus(), extra in "[pqrst]") {
            let tokens: Vec<Vec<String>> = docs.iter().map(|(_, t)| tokenize(t)).collect();
            let vocab = Vocabulary::from_documents(tokens.iter().map(Vec::as_slice), 1);
            let lex = Lexicon::new();
            let xs: Vec<_> = tokens.iter().map(|t| featurize(t, &vocab, &lex)).collect();
            let labels: Vec<&str> = docs.iter().map(|(l, _)| l.as_str()).collect();
            let model = train(&xs, &labels, &vocab, &TrainConfig::default()).unwrap();

            let mut probe_tokens = tokenize(&probe);
            let before = model.log_posteriors(&featurize(&probe_tokens, &vocab, &lex)).unwrap();
            probe_tokens.push(extra.clone());
            let after = model.log_posteriors(&featurize(&probe_tokens, &vocab, &lex)).unwrap();
            let ll = |k: usize| match vocab.lookup(&extra) {
                Some(i) => model.log_likelihoods(k)[i],
                None => model.oov_log_likelihood(),
            };
            for a in 0..before.len() {
                for b in 0..before.len() {
                    let shift = (after[a] - after[b]) - (before[a] - before[b]);
                    prop_assert!((shift - (ll(a) - ll(b))).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn relabelling_permutes_posteriors((docs, probe) in arb_corpus()) {
            let tokens: Vec<Vec<String>> = docs.iter().map(|(_, t)| tokenize(t)).collect();
            let vocab = Vocabulary::from_documents(tokens.iter().map(Vec::as_slice), 1);
            let lex = Lexicon::new();
            let xs: Vec<_> = tokens.iter().map(|t| featurize(t, &vocab, &lex)).collect();
            // a -> z, b -> y, c -> x reverses the lexicographic class order.
            let rename = |l: &str| match l { "a" => "z", "b" => "y", _ => "x" };
            let labels: Vec<&str> = docs.iter().map(|(l, _)| l.as_str()).collect();
            let renamed: Vec<&str> = labels.iter().map(|l| rename(l)).collect();
            let m1 = train(&xs, &labels, &vocab, &TrainConfig::default()).unwrap();
            let m2 = train(&xs, &renamed, &vocab, &TrainConfig::default()).unwrap();
            let x = featurize(&tokenize(&probe), &vocab, &lex);
            let (p1, p2) = (m1.posteriors(&x).unwrap(), m2.posteriors(&x).unwrap());
            for label in m1.class_labels() {
                let a = p1.get(label).unwrap();
                let b = p2.get(rename(label)).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

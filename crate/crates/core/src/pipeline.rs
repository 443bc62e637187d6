//! Task datasets and the fit/predict glue between text features and the
//! classifier.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bayes::{self, BayesError, FeatureKind, NaiveBayesModel, TrainConfig};
use crate::corpus::Corpus;
use crate::textproc::{
    pos_profile, sentiment_class, tokenize, vectorize, FeatureVector, Lexicon, PosProfile, PosTagger, TextprocError,
    Vocabulary, DEFAULT_SENTIMENT_EPSILON,
};

/// What a comment is classified into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Dominant part-of-speech tag of the comment.
    Pos,
    /// Rubric category the comment addresses.
    Rubric,
    /// Discretized sentiment score.
    Sentiment,
    /// Free-form ground-truth label, as written by the synthetic generator.
    Label,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Pos => "pos",
            Task::Rubric => "rubric",
            Task::Sentiment => "sentiment",
            Task::Label => "label",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pos" => Ok(Task::Pos),
            "rubric" => Ok(Task::Rubric),
            "sentiment" => Ok(Task::Sentiment),
            "label" => Ok(Task::Label),
            _ => Err(format!("unknown task `{s}`; expected pos, rubric, sentiment or label")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: Task,
    pub feature_kind: FeatureKind,
    pub alpha: f64,
    pub min_frequency: usize,
    pub sentiment_epsilon: f64,
}

impl PipelineConfig {
    pub fn new(task: Task) -> Self {
        PipelineConfig {
            task,
            feature_kind: FeatureKind::TokenCounts,
            alpha: 1.0,
            min_frequency: 1,
            sentiment_epsilon: DEFAULT_SENTIMENT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub comment_id: String,
    pub tokens: Vec<String>,
    pub pos_profile: PosProfile,
    pub label: String,
}

/// Labelled examples for one task. Comments without a label for the task
/// are counted in `skipped`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub examples: Vec<Example>,
    pub skipped: usize,
}

impl Dataset {
    pub fn from_corpus(
        corpus: &Corpus,
        config: &PipelineConfig,
        tagger: &impl PosTagger,
    ) -> Result<Self, TextprocError> {
        let mut examples = Vec::new();
        let mut skipped = 0;
        for (_, comment) in corpus.comments() {
            let tokens = tokenize(&comment.text);
            let profile = pos_profile(&tagger.tag_all(&tokens));
            let label = match config.task {
                Task::Pos => profile.dominant().map(|t| t.name().to_string()),
                Task::Rubric => comment.category.map(|c| c.name().to_string()),
                Task::Sentiment => match comment.sentiment {
                    Some(s) => Some(sentiment_class(s, config.sentiment_epsilon)?.name().to_string()),
                    None => None,
                },
                Task::Label => comment.label.clone(),
            };
            match label {
                Some(label) => examples.push(Example {
                    comment_id: comment.id.clone(),
                    tokens,
                    pos_profile: profile,
                    label,
                }),
                None => skipped += 1,
            }
        }
        Ok(Dataset {
            task: config.task,
            examples,
            skipped,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.examples.iter().map(|e| e.label.clone()).collect()
    }

    /// Distinct labels in sorted order.
    pub fn classes(&self) -> Vec<String> {
        let mut classes = self.labels();
        classes.sort_unstable();
        classes.dedup();
        classes
    }
}

/// A fitted vocabulary and model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub config: PipelineConfig,
    pub vocabulary: Vocabulary,
    pub model: NaiveBayesModel,
}

fn features(example: &Example, vocab: &Vocabulary) -> FeatureVector {
    FeatureVector {
        token_counts: vectorize(&example.tokens, vocab),
        pos_profile: example.pos_profile.clone(),
        length: example.tokens.len(),
    }
}

/// Builds the vocabulary from the selected examples only, then trains.
pub fn fit(dataset: &Dataset, indices: &[usize], config: &PipelineConfig) -> Result<TrainedPipeline, BayesError> {
    let selected: Vec<&Example> = indices.iter().map(|&i| &dataset.examples[i]).collect();
    let vocabulary = Vocabulary::from_documents(selected.iter().map(|e| e.tokens.as_slice()), config.min_frequency);
    let xs: Vec<FeatureVector> = selected.iter().map(|e| features(e, &vocabulary)).collect();
    let ys: Vec<&str> = selected.iter().map(|e| e.label.as_str()).collect();
    let model = bayes::train(
        &xs,
        &ys,
        &vocabulary,
        &TrainConfig {
            alpha: config.alpha,
            feature_kind: config.feature_kind,
            classes: None,
        },
    )?;
    Ok(TrainedPipeline {
        config: config.clone(),
        vocabulary,
        model,
    })
}

impl TrainedPipeline {
    pub fn predict_example(&self, example: &Example) -> Result<&str, BayesError> {
        self.model.predict(&features(example, &self.vocabulary))
    }

    pub fn featurize_text(&self, text: &str, lexicon: &Lexicon) -> FeatureVector {
        let tokens = tokenize(text);
        crate::textproc::featurize(&tokens, &self.vocabulary, lexicon)
    }

    pub fn predict_text(&self, text: &str, lexicon: &Lexicon) -> Result<&str, BayesError> {
        self.model.predict(&self.featurize_text(text, lexicon))
    }
}

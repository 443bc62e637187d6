//! Seeded synthetic corpora drawn from a known Naive Bayes generative model.
//!
//! Each comment picks a class from the priors, a length from a shifted
//! Poisson, and then independent tokens from that class's token
//! distribution. The length distribution is shared by all classes, so the
//! Bayes-optimal decision only depends on priors and token tables.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use super::{Comment, Corpus, CorpusError, Review, RubricCategory, RubricScore, Semester};
use crate::textproc::{tokenize, SentimentClass};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: String,
    pub prior: f64,
    /// Probability of each vocabulary token, aligned with `GenSpec::vocabulary`.
    pub token_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub vocabulary: Vec<String>,
    pub classes: Vec<ClassSpec>,
    /// Total number of comments to draw.
    pub comments: usize,
    pub mean_comment_length: f64,
    /// Reviews hold between 1 and this many comments.
    #[serde(default = "default_comments_per_review")]
    pub comments_per_review: usize,
    pub year_weights: BTreeMap<i32, f64>,
}

fn default_comments_per_review() -> usize {
    3
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| Err(CorpusError::DegenerateSpec(msg));
        if self.vocabulary.is_empty() {
            return bad("empty vocabulary".into());
        }
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        if self.comments == 0 {
            return bad("zero comments requested".into());
        }
        if !(self.mean_comment_length.is_finite() && self.mean_comment_length >= 1.0) {
            return bad(format!(
                "mean comment length {} must be at least 1",
                self.mean_comment_length
            ));
        }
        if self.comments_per_review == 0 {
            return bad("comments_per_review must be at least 1".into());
        }
        for word in &self.vocabulary {
            if tokenize(word) != [word.as_str()] {
                return bad(format!("vocabulary entry `{word}` is not a single lowercase token"));
            }
        }
        let mut labels: Vec<&str> = self.classes.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.classes.len() {
            return bad("class labels must be unique".into());
        }
        check_distribution("priors", self.classes.iter().map(|c| c.prior))?;
        for class in &self.classes {
            if class.token_probs.len() != self.vocabulary.len() {
                return bad(format!(
                    "class `{}` has {} token probabilities for {} vocabulary entries",
                    class.label,
                    class.token_probs.len(),
                    self.vocabulary.len()
                ));
            }
            check_distribution(&class.label, class.token_probs.iter().copied())?;
        }
        if self.year_weights.is_empty()
            || self.year_weights.values().any(|w| w.is_nan() || *w < 0.0)
            || self.year_weights.values().sum::<f64>() <= 0.0
        {
            return bad("year weights must be non-negative with a positive total".into());
        }
        Ok(())
    }

    /// Expected accuracy of the true generative classifier, estimated from
    /// `samples` fresh draws. Exact score ties count as a fractional hit.
    pub fn bayes_optimal_accuracy(&self, samples: usize, seed: u64) -> Result<f64, CorpusError> {
        self.validate()?;
        let sampler = Sampler::new(self)?;
        let log_priors: Vec<f64> = self.classes.iter().map(|c| c.prior.ln()).collect();
        let log_probs: Vec<Vec<f64>> = self
            .classes
            .iter()
            .map(|c| c.token_probs.iter().map(|p| p.ln()).collect())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0.0;
        for _ in 0..samples {
            let (class, tokens) = sampler.draw(&mut rng);
            let scores: Vec<f64> = (0..self.classes.len())
                .map(|k| log_priors[k] + tokens.iter().map(|&t| log_probs[k][t]).sum::<f64>())
                .collect();
            let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tied = scores.iter().filter(|&&s| s == best).count();
            if scores[class] == best {
                hits += 1.0 / tied as f64;
            }
        }
        Ok(hits / samples as f64)
    }

    /// Five rubric categories over a shared vocabulary. Each category
    /// favours its own keywords, with background words common to all.
    /// `separation` is the weight ratio of own keywords to background words.
    pub fn rubric_preset(comments: usize, separation: f64) -> GenSpec {
        const BACKGROUND: [&str; 12] = [
            "the", "chart", "is", "good", "nice", "looks", "very", "i", "like", "your", "work", "map",
        ];
        const KEYWORDS: [[&str; 6]; 5] = [
            ["label", "labels", "title", "legend", "axis", "units"],
            ["lie", "factor", "scale", "distorted", "exaggerated", "proportion"],
            ["ink", "ratio", "data", "minimal", "clean", "simple"],
            ["junk", "clutter", "decoration", "busy", "distracting", "effects"],
            ["gestalt", "proximity", "similarity", "grouping", "closure", "alignment"],
        ];
        let priors = [0.175, 0.3, 0.175, 0.175, 0.175];
        let mut vocabulary: Vec<String> = BACKGROUND.iter().map(|s| s.to_string()).collect();
        for group in KEYWORDS {
            vocabulary.extend(group.iter().map(|s| s.to_string()));
        }
        let classes = RubricCategory::ALL
            .into_iter()
            .enumerate()
            .map(|(k, category)| {
                let mut weights = vec![1.0; BACKGROUND.len()];
                for (j, words) in KEYWORDS.iter().enumerate() {
                    let w = if j == k { separation } else { 0.25 };
                    weights.extend(std::iter::repeat_n(w, words.len()));
                }
                let total: f64 = weights.iter().sum();
                ClassSpec {
                    label: category.name().to_string(),
                    prior: priors[k],
                    token_probs: weights.into_iter().map(|w| w / total).collect(),
                }
            })
            .collect();
        GenSpec {
            vocabulary,
            classes,
            comments,
            mean_comment_length: 6.0,
            comments_per_review: 3,
            year_weights: [
                (2017, 1.0),
                (2018, 1.2),
                (2019, 2.0),
                (2020, 1.1),
                (2021, 1.3),
                (2022, 2.1),
            ]
            .into_iter()
            .collect(),
        }
    }
}

fn check_distribution(name: &str, values: impl Iterator<Item = f64>) -> Result<(), CorpusError> {
    let mut total = 0.0;
    for v in values {
        if !(v.is_finite() && v >= 0.0) {
            return Err(CorpusError::DegenerateSpec(format!(
                "`{name}` has a negative or non-finite probability"
            )));
        }
        total += v;
    }
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(CorpusError::DegenerateSpec(format!(
            "`{name}` sums to {total}, expected 1"
        )));
    }
    Ok(())
}

struct Sampler {
    class: WeightedIndex<f64>,
    tokens: Vec<WeightedIndex<f64>>,
    length: Option<Poisson<f64>>,
}

impl Sampler {
    fn new(spec: &GenSpec) -> Result<Self, CorpusError> {
        let degenerate = |e: rand::distr::weighted::Error| CorpusError::DegenerateSpec(e.to_string());
        let class = WeightedIndex::new(spec.classes.iter().map(|c| c.prior)).map_err(degenerate)?;
        let tokens = spec
            .classes
            .iter()
            .map(|c| WeightedIndex::new(c.token_probs.iter().copied()).map_err(degenerate))
            .collect::<Result<_, _>>()?;
        let extra = spec.mean_comment_length - 1.0;
        let length = if extra > 0.0 {
            Some(Poisson::new(extra).map_err(|e| CorpusError::DegenerateSpec(e.to_string()))?)
        } else {
            None
        };
        Ok(Sampler { class, tokens, length })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> (usize, Vec<usize>) {
        let class = self.class.sample(rng);
        let len = 1 + self.length.map_or(0, |p| p.sample(rng) as usize);
        let tokens = (0..len).map(|_| self.tokens[class].sample(rng)).collect();
        (class, tokens)
    }
}

/// Draws a corpus from `spec`. Every comment records its ground-truth class
/// in `label`; class labels that name a rubric category also set
/// `category`, and labels naming a sentiment class set a sentiment score
/// inside that class's band.
pub fn synthesize(spec: &GenSpec, seed: u64) -> Result<Corpus, CorpusError> {
    spec.validate()?;
    let sampler = Sampler::new(spec)?;
    let years: Vec<i32> = spec.year_weights.keys().copied().collect();
    let year_dist = WeightedIndex::new(spec.year_weights.values().copied())
        .map_err(|e| CorpusError::DegenerateSpec(e.to_string()))?;
    let participants = (spec.comments / 4).max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut reviews = Vec::new();
    let mut drawn = 0;
    while drawn < spec.comments {
        let id = format!("r{:06}", reviews.len() + 1);
        let size = rng
            .random_range(1..=spec.comments_per_review)
            .min(spec.comments - drawn);
        let reviewer = rng.random_range(0..participants);
        let mut reviewee = rng.random_range(0..participants - 1);
        if reviewee >= reviewer {
            reviewee += 1;
        }
        let semester = if rng.random_bool(0.5) {
            Semester::Fall
        } else {
            Semester::Spring
        };
        let year = years[year_dist.sample(&mut rng)];
        let rubric_scores = RubricCategory::ALL
            .into_iter()
            .map(|category| RubricScore {
                category,
                score: rng.random_range(1..=5),
            })
            .collect();
        let mut comments = Vec::with_capacity(size);
        for n in 0..size {
            let (class, tokens) = sampler.draw(&mut rng);
            let label = &spec.classes[class].label;
            let text = tokens
                .iter()
                .map(|&t| spec.vocabulary[t].as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let sentiment = label.parse::<SentimentClass>().ok().map(|s| match s {
                SentimentClass::Negative => rng.random_range(-1.0..=-0.2),
                SentimentClass::Neutral => 0.0,
                SentimentClass::Positive => rng.random_range(0.2..=1.0),
            });
            comments.push(Comment {
                id: format!("{id}-c{}", n + 1),
                review_id: id.clone(),
                text,
                sentiment,
                category: label.parse().ok(),
                label: Some(label.clone()),
            });
        }
        drawn += size;
        reviews.push(Review {
            id,
            reviewer: format!("s{reviewer:05}"),
            reviewee: format!("s{reviewee:05}"),
            year,
            semester,
            rubric_scores,
            comments,
        });
    }
    let mut corpus = Corpus::new(reviews);
    corpus.year_span = Some((years[0], *years.last().expect("non-empty")));
    Ok(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate;

    fn two_class(prior_a: f64, comments: usize) -> GenSpec {
        GenSpec {
            vocabulary: ["good", "chart", "bad", "axis"].map(String::from).to_vec(),
            classes: vec![
                ClassSpec {
                    label: "A".into(),
                    prior: prior_a,
                    token_probs: vec![0.4, 0.3, 0.1, 0.2],
                },
                ClassSpec {
                    label: "B".into(),
                    prior: 1.0 - prior_a,
                    token_probs: vec![0.1, 0.3, 0.4, 0.2],
                },
            ],
            comments,
            mean_comment_length: 4.0,
            comments_per_review: 3,
            year_weights: [(2018, 1.0), (2019, 1.0)].into_iter().collect(),
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = two_class(0.5, 300);
        let a = synthesize(&spec, 42).unwrap();
        let b = synthesize(&spec, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synthesize(&spec, 43).unwrap());
        assert_eq!(a.comment_count(), 300);
        assert!(validate(&a).is_empty(), "{}", validate(&a));
    }

    #[test]
    fn class_frequencies_track_priors() {
        let corpus = synthesize(&two_class(0.5, 10_000), 7).unwrap();
        let a = corpus
            .comments()
            .filter(|(_, c)| c.label.as_deref() == Some("A"))
            .count();
        let freq = a as f64 / 10_000.0;
        assert!((freq - 0.5).abs() <= 0.02, "freq {freq}");
    }

    #[test]
    fn disjoint_vocabularies_identify_the_class() {
        let mut spec = two_class(0.5, 500);
        spec.classes[0].token_probs = vec![0.5, 0.5, 0.0, 0.0];
        spec.classes[1].token_probs = vec![0.0, 0.0, 0.5, 0.5];
        let corpus = synthesize(&spec, 1).unwrap();
        for (_, c) in corpus.comments() {
            let a_words = c.text.split(' ').all(|w| w == "good" || w == "chart");
            let b_words = c.text.split(' ').all(|w| w == "bad" || w == "axis");
            assert_eq!(c.label.as_deref() == Some("A"), a_words);
            assert_eq!(c.label.as_deref() == Some("B"), b_words);
        }
        assert_eq!(spec.bayes_optimal_accuracy(2_000, 3).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let mut spec = two_class(0.5, 10);
        spec.vocabulary.clear();
        assert!(matches!(synthesize(&spec, 0), Err(CorpusError::DegenerateSpec(_))));

        assert!(synthesize(&two_class(0.5, 0), 0).is_err());
        let mut spec = two_class(0.7, 10);
        spec.classes[1].prior = 0.5;
        assert!(synthesize(&spec, 0).is_err());

        let mut spec = two_class(0.5, 10);
        spec.vocabulary[0] = "two words".into();
        assert!(synthesize(&spec, 0).is_err());
    }

    #[test]
    fn rubric_labels_set_categories() {
        let corpus = synthesize(&GenSpec::rubric_preset(200, 4.0), 9).unwrap();
        for (_, c) in corpus.comments() {
            assert_eq!(c.category.map(|c| c.name().to_string()), c.label);
        }
    }

    #[test]
    fn sentiment_labels_set_scores() {
        let mut spec = two_class(0.5, 200);
        spec.classes[0].label = "negative".into();
        spec.classes[1].label = "positive".into();
        let corpus = synthesize(&spec, 5).unwrap();
        for (_, c) in corpus.comments() {
            let s = c.sentiment.unwrap();
            match c.label.as_deref() {
                Some("negative") => assert!(s <= -0.2),
                Some("positive") => assert!(s >= 0.2),
                other => panic!("unexpected label {other:?}"),
            }
        }
    }
}

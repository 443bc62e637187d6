use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tagger::{pos_profile, PosProfile, PosTagger};
use super::tokenize;
use crate::corpus::Corpus;

/// Sorted, deduplicated token list with a reverse index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Sorts and deduplicates `tokens`.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        tokens.sort_unstable();
        tokens.dedup();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    /// Tokens occurring at least `min_frequency` times across `documents`.
    /// A `min_frequency` of 0 behaves like 1.
    pub fn from_documents<'a, I>(documents: I, min_frequency: usize) -> Self
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for doc in documents {
            for token in doc {
                *freq.entry(token.as_str()).or_default() += 1;
            }
        }
        let min = min_frequency.max(1);
        Self::from_tokens(freq.into_iter().filter(|&(_, n)| n >= min).map(|(t, _)| t.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// First 8 bytes of SHA-256 over the newline-joined tokens.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Sha256::new();
        for token in &self.tokens {
            hasher.update(token.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    /// One token per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for token in &self.tokens {
            out.push_str(token);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_tokens(text.lines().filter(|l| !l.is_empty()))
    }
}

/// Counts every token occurring at least `min_frequency` times in the
/// corpus comments.
pub fn build_vocabulary(corpus: &Corpus, min_frequency: usize) -> Vocabulary {
    let docs: Vec<Vec<String>> = corpus.comments().map(|(_, c)| tokenize(&c.text)).collect();
    Vocabulary::from_documents(docs.iter().map(Vec::as_slice), min_frequency)
}

/// Sparse counts over a vocabulary, plus the out-of-vocabulary tally.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenCounts {
    pub counts: BTreeMap<usize, u32>,
    pub oov: u32,
}

impl TokenCounts {
    pub fn in_vocabulary(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn total(&self) -> u32 {
        self.in_vocabulary() + self.oov
    }
}

pub fn vectorize<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> TokenCounts {
    let mut out = TokenCounts::default();
    for token in tokens {
        match vocab.lookup(token.as_ref()) {
            Some(i) => *out.counts.entry(i).or_default() += 1,
            None => out.oov += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub token_counts: TokenCounts,
    pub pos_profile: PosProfile,
    pub length: usize,
}

pub fn featurize<S: AsRef<str>, T: PosTagger>(tokens: &[S], vocab: &Vocabulary, tagger: &T) -> FeatureVector {
    let tagged = tagger.tag_all(tokens);
    FeatureVector {
        token_counts: vectorize(tokens, vocab),
        pos_profile: pos_profile(&tagged),
        length: tokens.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::review;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(vec![review("r1", "a", "b", 2020, texts)])
    }

    #[test]
    fn vocabulary_examples() {
        let c = corpus(&["good chart", "good labels"]);
        assert_eq!(build_vocabulary(&c, 1).tokens(), ["chart", "good", "labels"]);
        assert_eq!(build_vocabulary(&c, 2).tokens(), ["good"]);
        assert!(build_vocabulary(&Corpus::default(), 1).is_empty());
    }

    #[test]
    fn lookup_is_dense() {
        let v = Vocabulary::from_tokens(["b", "a", "c", "a"]);
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.lookup(t), Some(i));
        }
        assert_eq!(Vocabulary::from_text(&v.to_text()), v);
        assert_ne!(v.fingerprint(), Vocabulary::from_tokens(["a", "b"]).fingerprint());
    }

    #[test]
    fn vectorize_examples() {
        let vocab = Vocabulary::from_tokens(["chart", "good", "labels"]);
        let v = vectorize(&["good", "chart", "good"], &vocab);
        assert_eq!(v.counts, BTreeMap::from([(0, 1), (1, 2)]));
        assert_eq!(v.oov, 0);

        let empty = vectorize::<&str>(&[], &vocab);
        assert!(empty.counts.is_empty());
        assert_eq!(empty.oov, 0);

        let small = Vocabulary::from_tokens(["chart", "good"]);
        let v = vectorize(&["zebra"], &small);
        assert!(v.counts.is_empty());
        assert_eq!(v.oov, 1);
    }

    proptest! {
        #[test]
        fn vectorize_conserves_mass(s in "[a-e ]{0,50}", vocab in prop::collection::vec("[a-e]{1,2}", 0..8)) {
            let tokens = tokenize(&s);
            let vocab = Vocabulary::from_tokens(vocab);
            let v = vectorize(&tokens, &vocab);
            prop_assert_eq!(v.total() as usize, tokens.len());
            prop_assert!(v.counts.keys().all(|&i| i < vocab.len()));
        }

        #[test]
        fn raising_min_frequency_never_adds(texts in prop::collection::vec("[a-d ]{0,20}", 0..6), lo in 1usize..4, bump in 0usize..3) {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let c = corpus(&refs);
            let low = build_vocabulary(&c, lo);
            let high = build_vocabulary(&c, lo + bump);
            prop_assert!(high.tokens().iter().all(|t| low.lookup(t).is_some()));
        }
    }
}

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TextprocError;

/// Bundled lexicon covering common peer-review vocabulary.
pub const STARTER_LEXICON: &str = include_str!("../../data/lexicon.tsv");

const SUFFIX_SECTION: &str = "#suffix";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Other,
}

impl PosTag {
    pub const ALL: [PosTag; 5] = [
        PosTag::Noun,
        PosTag::Verb,
        PosTag::Adjective,
        PosTag::Adverb,
        PosTag::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PosTag::Noun => "noun",
            PosTag::Verb => "verb",
            PosTag::Adjective => "adjective",
            PosTag::Adverb => "adverb",
            PosTag::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "noun" | "n" | "nn" => Ok(PosTag::Noun),
            "verb" | "v" | "vb" => Ok(PosTag::Verb),
            "adjective" | "adj" | "jj" => Ok(PosTag::Adjective),
            "adverb" | "adv" | "rb" => Ok(PosTag::Adverb),
            "other" | "x" => Ok(PosTag::Other),
            other => Err(format!(
                "unknown POS tag `{other}`; expected NOUN, VERB, ADJ, ADV or OTHER"
            )),
        }
    }
}

/// Anything that assigns a tag to a single lowercase token.
pub trait PosTagger {
    fn tag(&self, token: &str) -> PosTag;

    fn tag_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<(String, PosTag)>
    where
        Self: Sized,
    {
        tokens
            .iter()
            .map(|t| (t.as_ref().to_string(), self.tag(t.as_ref())))
            .collect()
    }
}

/// Exact-match word list, then ordered suffix rules, then `Noun`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    words: HashMap<String, PosTag>,
    suffix_rules: Vec<(String, PosTag)>,
}

impl Lexicon {
    pub const DEFAULT_TAG: PosTag = PosTag::Noun;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn starter() -> Self {
        Self::parse(STARTER_LEXICON).expect("bundled lexicon parses")
    }

    pub fn with_word(mut self, word: &str, tag: PosTag) -> Self {
        self.words.insert(word.to_lowercase(), tag);
        self
    }

    /// Appends a suffix rule; a leading `-` is ignored.
    pub fn with_suffix(mut self, suffix: &str, tag: PosTag) -> Self {
        let suffix = suffix.trim_start_matches('-').to_lowercase();
        self.suffix_rules.push((suffix, tag));
        self
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn suffix_rules(&self) -> &[(String, PosTag)] {
        &self.suffix_rules
    }

    /// Parses the `word<TAB>TAG` format. Lines after a `#suffix` line are
    /// suffix rules in priority order; other `#` lines and blanks are skipped.
    pub fn parse(text: &str) -> Result<Self, TextprocError> {
        let mut lexicon = Lexicon::new();
        let mut in_suffixes = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if line.trim() == SUFFIX_SECTION {
                in_suffixes = true;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let err = |message: String| TextprocError::Lexicon { line: i + 1, message };
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `word<TAB>TAG`".into()))?;
            let tag: PosTag = tag.parse().map_err(err)?;
            let word = word.trim();
            if word.is_empty() {
                return Err(err("empty word".into()));
            }
            lexicon = if in_suffixes {
                lexicon.with_suffix(word, tag)
            } else {
                lexicon.with_word(word, tag)
            };
        }
        Ok(lexicon)
    }
}

impl PosTagger for Lexicon {
    fn tag(&self, token: &str) -> PosTag {
        if let Some(&tag) = self.words.get(token) {
            return tag;
        }
        let len = token.chars().count();
        self.suffix_rules
            .iter()
            .find(|(suffix, _)| len > suffix.chars().count() && token.ends_with(suffix.as_str()))
            .map(|&(_, tag)| tag)
            .unwrap_or(Self::DEFAULT_TAG)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosProfile {
    pub counts: BTreeMap<PosTag, usize>,
    pub token_total: usize,
}

impl Default for PosProfile {
    fn default() -> Self {
        PosProfile {
            counts: PosTag::ALL.into_iter().map(|t| (t, 0)).collect(),
            token_total: 0,
        }
    }
}

impl PosProfile {
    pub fn count(&self, tag: PosTag) -> usize {
        self.counts.get(&tag).copied().unwrap_or(0)
    }

    pub fn add(&mut self, other: &PosProfile) {
        for (tag, n) in &other.counts {
            *self.counts.entry(*tag).or_default() += n;
        }
        self.token_total += other.token_total;
    }

    /// Most frequent tag; ties go to the earlier tag in [`PosTag::ALL`].
    pub fn dominant(&self) -> Option<PosTag> {
        if self.token_total == 0 {
            return None;
        }
        let mut best = PosTag::ALL[0];
        for tag in PosTag::ALL {
            if self.count(tag) > self.count(best) {
                best = tag;
            }
        }
        Some(best)
    }
}

pub fn pos_profile(tagged: &[(String, PosTag)]) -> PosProfile {
    let mut profile = PosProfile::default();
    for (_, tag) in tagged {
        *profile.counts.entry(*tag).or_default() += 1;
    }
    profile.token_total = tagged.len();
    profile
}

//! Word data backing the prompt transforms: stopwords, a small thesaurus,
//! and a unigram frequency table.
//!
//! The three tables ship as plain-text files under `data/` and are baked
//! into the binary, so no network or NLP toolkit is needed. File formats:
//!
//! - stopwords: one word per line
//! - thesaurus: `word<TAB>syn1,syn2,...`
//! - frequencies: `word<TAB>float` with the float in (0, 1]

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("stopword list is empty")]
    EmptyStopwords,
    #[error("cannot read lexicon file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    synonyms: HashMap<String, Vec<String>>,
    unigram_freq: HashMap<String, f64>,
}

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const BUNDLED_THESAURUS: &str = include_str!("../../data/thesaurus.tsv");
const BUNDLED_FREQUENCIES: &str = include_str!("../../data/unigram_freq.tsv");

impl Lexicon {
    pub fn parse(
        stopwords: &str,
        thesaurus: &str,
        frequencies: &str,
    ) -> Result<Self, LexiconError> {
        let stopwords = parse_stopwords(stopwords)?;
        let synonyms = parse_thesaurus(thesaurus)?;
        let unigram_freq = parse_frequencies(frequencies)?;
        Ok(Self {
            stopwords,
            synonyms,
            unigram_freq,
        })
    }

    pub fn from_files(
        stopwords: &Path,
        thesaurus: &Path,
        frequencies: &Path,
    ) -> Result<Self, LexiconError> {
        Self::parse(
            &fs::read_to_string(stopwords)?,
            &fs::read_to_string(thesaurus)?,
            &fs::read_to_string(frequencies)?,
        )
    }

    /// The lexicon compiled into the crate. Parsed once, shared read-only.
    pub fn bundled() -> &'static Lexicon {
        static BUNDLED: OnceLock<Lexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            Lexicon::parse(BUNDLED_STOPWORDS, BUNDLED_THESAURUS, BUNDLED_FREQUENCIES)
                .expect("bundled lexicon data is well-formed")
        })
    }

    /// Build a lexicon from in-memory parts, for tests and callers that
    /// already hold the tables.
    pub fn from_parts(
        stopwords: impl IntoIterator<Item = String>,
        synonyms: HashMap<String, Vec<String>>,
        unigram_freq: HashMap<String, f64>,
    ) -> Result<Self, LexiconError> {
        let stopwords: HashSet<String> = stopwords
            .into_iter()
            .map(|w| w.to_lowercase())
            .collect();
        if stopwords.is_empty() {
            return Err(LexiconError::EmptyStopwords);
        }
        Ok(Self {
            stopwords,
            synonyms,
            unigram_freq,
        })
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(word)
    }

    pub fn synonyms_of(&self, word: &str) -> Option<&[String]> {
        self.synonyms.get(word).map(Vec::as_slice)
    }

    pub fn frequency(&self, word: &str) -> Option<f64> {
        self.unigram_freq.get(word).copied()
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }
}

fn parse_stopwords(text: &str) -> Result<HashSet<String>, LexiconError> {
    let set: HashSet<String> = text
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(str::to_lowercase)
        .collect();
    if set.is_empty() {
        return Err(LexiconError::EmptyStopwords);
    }
    Ok(set)
}

fn parse_thesaurus(text: &str) -> Result<HashMap<String, Vec<String>>, LexiconError> {
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (word, rest) = line.split_once('\t').ok_or_else(|| LexiconError::Malformed {
            file: "thesaurus".into(),
            line: idx + 1,
            message: "expected word<TAB>synonyms".into(),
        })?;
        // Replacement is one word for one word; multi-word synonyms would
        // change the token count, so they are dropped here.
        let synonyms: Vec<String> = rest
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty() && !s.contains(char::is_whitespace))
            .map(str::to_lowercase)
            .collect();
        if !synonyms.is_empty() {
            map.insert(word.trim().to_lowercase(), synonyms);
        }
    }
    Ok(map)
}

fn parse_frequencies(text: &str) -> Result<HashMap<String, f64>, LexiconError> {
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| LexiconError::Malformed {
            file: "frequencies".into(),
            line: idx + 1,
            message,
        };
        let (word, value) = line
            .split_once('\t')
            .ok_or_else(|| malformed("expected word<TAB>float".into()))?;
        let freq: f64 = value
            .trim()
            .parse()
            .map_err(|e| malformed(format!("bad float: {e}")))?;
        if !(freq > 0.0 && freq <= 1.0) {
            return Err(malformed(format!("frequency {freq} outside (0, 1]")));
        }
        map.insert(word.trim().to_lowercase(), freq);
    }
    Ok(map)
}

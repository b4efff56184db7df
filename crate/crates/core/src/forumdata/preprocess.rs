//! Text normalization and corpus-wide vocabulary filtering.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("stopwords.txt");

/// Settings for turning raw post text into bag-of-words tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    /// Words with fewer total occurrences than this are dropped.
    pub min_count: u32,
    /// Words appearing in more than this fraction of threads are dropped.
    pub max_doc_frac: f64,
    pub lowercase: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: default_stopwords(),
            min_count: 10,
            max_doc_frac: 0.10,
            lowercase: true,
        }
    }
}

impl PreprocessConfig {
    /// No stopwords and no frequency filtering. Keeps every well-formed token.
    pub fn permissive() -> Self {
        Self {
            stopwords: HashSet::new(),
            min_count: 0,
            max_doc_frac: 1.0,
            lowercase: true,
        }
    }

    /// Replaces the stopword list with the words in `path`, one per line.
    pub fn with_stopword_file(mut self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.stopwords = parse_word_list(&text);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_doc_frac) {
            return Err(Error::Config(format!(
                "max_doc_frac must lie in [0, 1], got {}",
                self.max_doc_frac
            )));
        }
        Ok(())
    }

    /// Per-document tokenization: strips URLs, non-ascii characters,
    /// punctuation, words containing digits and stopwords.
    pub fn tokenize(&self, raw: &str) -> Vec<String> {
        let mut out = Vec::new();
        for chunk in raw.split_whitespace() {
            if is_url(chunk) {
                continue;
            }
            let ascii: String = chunk.chars().filter(char::is_ascii).collect();
            let ascii = if self.lowercase {
                ascii.to_ascii_lowercase()
            } else {
                ascii
            };
            for word in ascii.split(|c: char| !c.is_ascii_alphanumeric()) {
                if word.is_empty() || word.bytes().any(|b| b.is_ascii_digit()) {
                    continue;
                }
                if self.stopwords.contains(word) {
                    continue;
                }
                out.push(word.to_string());
            }
        }
        out
    }

    /// Tokenizes every document, then removes rare words and words with too
    /// high a document frequency. Each inner slice of `docs` is one thread;
    /// the thread is the unit for document frequency.
    pub fn preprocess_corpus(&self, docs: &[Vec<&str>]) -> Vec<Vec<Vec<String>>> {
        let tokenized: Vec<Vec<Vec<String>>> = docs
            .iter()
            .map(|thread| thread.iter().map(|t| self.tokenize(t)).collect())
            .collect();
        let keep = self.surviving_words(&tokenized);
        tokenized
            .into_iter()
            .map(|thread| {
                thread
                    .into_iter()
                    .map(|tokens| tokens.into_iter().filter(|w| keep.contains(w)).collect())
                    .collect()
            })
            .collect()
    }

    fn surviving_words(&self, tokenized: &[Vec<Vec<String>>]) -> HashSet<String> {
        let mut total: BTreeMap<&str, u64> = BTreeMap::new();
        let mut doc_freq: BTreeMap<&str, u64> = BTreeMap::new();
        for thread in tokenized {
            let mut seen = HashSet::new();
            for w in thread.iter().flatten() {
                *total.entry(w.as_str()).or_default() += 1;
                if seen.insert(w.as_str()) {
                    *doc_freq.entry(w.as_str()).or_default() += 1;
                }
            }
        }
        let n_docs = tokenized.len() as f64;
        total
            .into_iter()
            .filter(|(w, count)| {
                let df = doc_freq[w] as f64;
                *count >= u64::from(self.min_count) && df <= self.max_doc_frac * n_docs
            })
            .map(|(w, _)| w.to_string())
            .collect()
    }
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    lower.contains("://") || lower.starts_with("www.")
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_ascii_lowercase)
        .collect()
}

pub fn default_stopwords() -> HashSet<String> {
    parse_word_list(DEFAULT_STOPWORDS)
}

//! Word-level text normalisation shared by the scorers and classifiers.
//!
//! Tokens are lowercase, punctuation-stripped and whitespace-split. Apostrophes
//! inside a word are kept so that contractions ("can't", "i'm") stay one token.
//! Stems come from a small ordered suffix-rule table and stopwords from a fixed
//! list; both ship in `data/` and can be replaced at load time.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_STEM_RULES: &str = include_str!("../data/stem_rules.csv");

#[derive(Debug, Error)]
pub enum TextDataError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stem rule line {line}: {reason}")]
    BadRule { line: usize, reason: String },
}

/// Lowercases, strips punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        let ch = match ch {
            '\u{2019}' | '\u{2018}' | '`' => '\'',
            c => c,
        };
        if ch.is_alphanumeric() || ch == '\'' {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            push_token(&mut tokens, &mut current);
        }
    }
    if !current.is_empty() {
        push_token(&mut tokens, &mut current);
    }
    tokens
}

fn push_token(tokens: &mut Vec<String>, current: &mut String) {
    let trimmed = current.trim_matches('\'');
    if !trimmed.is_empty() {
        tokens.push(trimmed.to_string());
    }
    current.clear();
}

/// Trim plus Unicode NFC; the identity used for deduplicating utterances.
pub fn canonical(text: &str) -> String {
    text.trim().nfc().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct StemRule {
    suffix: String,
    replacement: String,
    min_stem: usize,
    undouble: bool,
}

/// Ordered suffix-stripping stemmer.
#[derive(Debug, Clone)]
pub struct Stemmer {
    rules: Vec<StemRule>,
}

impl Stemmer {
    pub fn parse(source: &str) -> Result<Self, TextDataError> {
        let mut rules = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                saw_header = true;
                if line.starts_with("suffix") {
                    continue;
                }
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(TextDataError::BadRule {
                    line: idx + 1,
                    reason: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let min_stem = fields[2].parse().map_err(|_| TextDataError::BadRule {
                line: idx + 1,
                reason: format!("min_stem {:?} is not an integer", fields[2]),
            })?;
            let undouble = match fields[3] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(TextDataError::BadRule {
                        line: idx + 1,
                        reason: format!("undouble must be 0 or 1, got {other:?}"),
                    })
                }
            };
            if fields[0].is_empty() {
                return Err(TextDataError::BadRule {
                    line: idx + 1,
                    reason: "empty suffix".into(),
                });
            }
            rules.push(StemRule {
                suffix: fields[0].to_string(),
                replacement: fields[1].to_string(),
                min_stem,
                undouble,
            });
        }
        Ok(Self { rules })
    }

    pub fn from_file(path: &Path) -> Result<Self, TextDataError> {
        Self::parse(&read(path)?)
    }

    pub fn stem(&self, word: &str) -> String {
        for rule in &self.rules {
            let Some(stem) = word.strip_suffix(rule.suffix.as_str()) else {
                continue;
            };
            if stem.chars().count() < rule.min_stem {
                continue;
            }
            let mut out = format!("{stem}{}", rule.replacement);
            if rule.undouble {
                undouble(&mut out);
            }
            return out;
        }
        word.to_string()
    }
}

impl Default for Stemmer {
    fn default() -> Self {
        Self::parse(DEFAULT_STEM_RULES).expect("bundled stem rules are valid")
    }
}

fn undouble(word: &mut String) {
    let mut tail = word.chars().rev();
    if let (Some(a), Some(b)) = (tail.next(), tail.next()) {
        if a == b && a.is_ascii_alphabetic() && !"aeiouylsz".contains(a) {
            word.pop();
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn parse(source: &str) -> Self {
        Self(
            source
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self, TextDataError> {
        Ok(Self::parse(&read(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

/// Tokenizer + stemmer + stopword list bundled together.
#[derive(Debug, Clone, Default)]
pub struct Normalizer {
    pub stemmer: Arc<Stemmer>,
    pub stopwords: Arc<Stopwords>,
}

impl Normalizer {
    pub fn new(stemmer: Stemmer, stopwords: Stopwords) -> Self {
        Self {
            stemmer: Arc::new(stemmer),
            stopwords: Arc::new(stopwords),
        }
    }

    pub fn stems(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .iter()
            .map(|t| self.stemmer.stem(t))
            .collect()
    }

    /// Stems of the non-stopword tokens.
    pub fn content_stems(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .iter()
            .filter(|t| !self.stopwords.contains(t))
            .map(|t| self.stemmer.stem(t))
            .collect()
    }
}

/// Start positions where `phrase` occurs contiguously in `tokens`.
pub fn phrase_positions(tokens: &[String], phrase: &[String]) -> Vec<usize> {
    if phrase.is_empty() || phrase.len() > tokens.len() {
        return Vec::new();
    }
    tokens
        .windows(phrase.len())
        .enumerate()
        .filter(|(_, w)| *w == phrase)
        .map(|(i, _)| i)
        .collect()
}

fn read(path: &Path) -> Result<String, TextDataError> {
    std::fs::read_to_string(path).map_err(|source| TextDataError::Io {
        path: path.display().to_string(),
        source,
    })
}

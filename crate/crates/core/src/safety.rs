//! Risk-phrase screening of user free text.

use std::io::Read;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::text::{phrase_positions, tokenize, Normalizer};

const DEFAULT_RISK_LEXICON: &str = include_str!("../data/risk_lexicon.csv");

#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("risk lexicon row {row}: {message}")]
    Lexicon { row: usize, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyEvent {
    pub matched_phrase: String,
}

#[derive(Debug, Clone)]
pub struct RiskLexicon {
    phrases: Vec<(String, Vec<String>)>,
    normalizer: Normalizer,
}

impl RiskLexicon {
    /// One-column CSV with header `phrase`.
    pub fn from_reader<R: Read>(reader: R, normalizer: Normalizer) -> Result<Self, SafetyError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut phrases = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let row = idx + 1;
            let rec = rec.map_err(|e| SafetyError::Lexicon {
                row,
                message: e.to_string(),
            })?;
            let phrase = rec.get(0).unwrap_or_default().to_string();
            let stems = normalizer.stems(&phrase);
            if stems.is_empty() {
                return Err(SafetyError::Lexicon {
                    row,
                    message: format!("phrase {phrase:?} has no word tokens"),
                });
            }
            phrases.push((phrase, stems));
        }
        Ok(Self {
            phrases,
            normalizer,
        })
    }

    pub fn from_file(path: &Path, normalizer: Normalizer) -> Result<Self, SafetyError> {
        let file = std::fs::File::open(path).map_err(|e| SafetyError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_reader(file, normalizer)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// First lexicon phrase occurring as a contiguous stem sequence in `text`.
    pub fn check(&self, text: &str) -> Option<SafetyEvent> {
        let stems: Vec<String> = tokenize(text)
            .iter()
            .map(|t| self.normalizer.stemmer.stem(t))
            .collect();
        self.phrases
            .iter()
            .find(|(_, p)| !phrase_positions(&stems, p).is_empty())
            .map(|(phrase, _)| SafetyEvent {
                matched_phrase: phrase.clone(),
            })
    }
}

impl Default for RiskLexicon {
    fn default() -> Self {
        Self::from_reader(DEFAULT_RISK_LEXICON.as_bytes(), Normalizer::default())
            .expect("bundled risk lexicon is valid")
    }
}

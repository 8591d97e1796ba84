//! Emotion recognition over the user's free-text answer.
//!
//! The default classifier scores each of the four contexts by weighted hits
//! of a keyword lexicon on stemmed tokens. Other classifiers plug in through
//! [`EmotionClassifier`].

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::EmotionContext;
use crate::eval::{ConfusionMatrix, EvalReport};
use crate::text::{canonical, phrase_positions, Normalizer};

const DEFAULT_LEXICON: &str = include_str!("../data/emotion_lexicon.csv");
const DEFAULT_EXAMPLES: &str = include_str!("../data/emotion_examples.csv");

const NEGATORS: [&str; 10] = [
    "not", "no", "never", "don't", "didn't", "isn't", "wasn't", "aren't", "hardly", "dont",
];
const LINKING: [&str; 5] = ["feel", "am", "be", "is", "was"];

#[derive(Debug, Error)]
pub enum EmotionError {
    #[error("cannot classify empty text")]
    EmptyText,
    #[error("lexicon row {row}: {message}")]
    Lexicon { row: usize, message: String },
    #[error("labelled set row {row}: {message}")]
    LabelledSet { row: usize, message: String },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("classifier failed on {text:?}: {message}")]
    Classifier { text: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmotionPrediction {
    pub context: EmotionContext,
    /// Set when no keyword matched or the top contexts tied.
    pub low_confidence: bool,
}

pub trait EmotionClassifier: Send + Sync {
    fn classify(&self, text: &str) -> Result<EmotionPrediction, EmotionError>;
}

#[derive(Debug, Clone)]
struct LexiconEntry {
    context: EmotionContext,
    stems: Vec<String>,
    weight: f64,
}

#[derive(Debug, Deserialize)]
struct LexiconRecord {
    context: String,
    keyword: String,
    weight: f64,
}

#[derive(Debug, Clone)]
pub struct KeywordClassifier {
    entries: Vec<LexiconEntry>,
    normalizer: Normalizer,
    fallback: EmotionContext,
}

impl KeywordClassifier {
    pub fn from_reader<R: Read>(
        reader: R,
        normalizer: Normalizer,
        fallback: EmotionContext,
    ) -> Result<Self, EmotionError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries = Vec::new();
        for (idx, rec) in rdr.deserialize::<LexiconRecord>().enumerate() {
            let row = idx + 1;
            let rec = rec.map_err(|e| EmotionError::Lexicon {
                row,
                message: e.to_string(),
            })?;
            let context = rec
                .context
                .parse()
                .map_err(|message| EmotionError::Lexicon { row, message })?;
            let stems = normalizer.stems(&rec.keyword);
            if stems.is_empty() {
                return Err(EmotionError::Lexicon {
                    row,
                    message: format!("keyword {:?} has no word tokens", rec.keyword),
                });
            }
            if !(rec.weight > 0.0 && rec.weight.is_finite()) {
                return Err(EmotionError::Lexicon {
                    row,
                    message: format!("weight must be positive, got {}", rec.weight),
                });
            }
            entries.push(LexiconEntry {
                context,
                stems,
                weight: rec.weight,
            });
        }
        Ok(Self {
            entries,
            normalizer,
            fallback,
        })
    }

    pub fn from_file(
        path: &Path,
        normalizer: Normalizer,
        fallback: EmotionContext,
    ) -> Result<Self, EmotionError> {
        let file = std::fs::File::open(path).map_err(|e| EmotionError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_reader(file, normalizer, fallback)
    }

    pub fn fallback(&self) -> EmotionContext {
        self.fallback
    }

    pub fn with_fallback(mut self, fallback: EmotionContext) -> Self {
        self.fallback = fallback;
        self
    }

    /// Weighted keyword hits per context, indexed like `EmotionContext::ALL`.
    pub fn scores(&self, text: &str) -> [f64; 4] {
        let tokens = crate::text::tokenize(text);
        let stems: Vec<String> = tokens.iter().map(|t| self.normalizer.stemmer.stem(t)).collect();
        let mut scores = [0.0; 4];
        for entry in &self.entries {
            for pos in phrase_positions(&stems, &entry.stems) {
                if !negated(&tokens, pos) {
                    scores[entry.context.index()] += entry.weight;
                }
            }
        }
        scores
    }
}

impl Default for KeywordClassifier {
    fn default() -> Self {
        Self::from_reader(
            DEFAULT_LEXICON.as_bytes(),
            Normalizer::default(),
            EmotionContext::Sadness,
        )
        .expect("bundled lexicon is valid")
    }
}

/// "not happy", "don't feel happy".
fn negated(tokens: &[String], pos: usize) -> bool {
    let prev = |back: usize| pos.checked_sub(back).map(|i| tokens[i].as_str());
    match (prev(1), prev(2)) {
        (Some(p), _) if NEGATORS.contains(&p) => true,
        (Some(p), Some(pp)) => LINKING.contains(&p) && NEGATORS.contains(&pp),
        _ => false,
    }
}

impl EmotionClassifier for KeywordClassifier {
    fn classify(&self, text: &str) -> Result<EmotionPrediction, EmotionError> {
        if text.trim().is_empty() {
            return Err(EmotionError::EmptyText);
        }
        let scores = self.scores(text);
        let top = scores.iter().copied().fold(0.0_f64, f64::max);
        let leaders: Vec<usize> = (0..4).filter(|&i| scores[i] == top).collect();
        if top <= 0.0 || leaders.len() > 1 {
            return Ok(EmotionPrediction {
                context: self.fallback,
                low_confidence: true,
            });
        }
        Ok(EmotionPrediction {
            context: EmotionContext::ALL[leaders[0]],
            low_confidence: false,
        })
    }
}

/// Labels produced by an external model, keyed by canonicalised text.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedEmotions {
    labels: HashMap<String, EmotionContext>,
}

impl PrecomputedEmotions {
    pub fn new(set: &[LabelledText]) -> Self {
        Self {
            labels: set
                .iter()
                .map(|l| (canonical(&l.text), l.label))
                .collect(),
        }
    }
}

impl EmotionClassifier for PrecomputedEmotions {
    fn classify(&self, text: &str) -> Result<EmotionPrediction, EmotionError> {
        self.labels
            .get(&canonical(text))
            .map(|&context| EmotionPrediction {
                context,
                low_confidence: false,
            })
            .ok_or_else(|| EmotionError::Classifier {
                text: text.to_string(),
                message: "no precomputed label".into(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelledText {
    pub text: String,
    pub label: EmotionContext,
}

#[derive(Deserialize)]
struct LabelledRecord {
    text: String,
    label: String,
}

/// CSV with columns `text,label`.
pub fn read_labelled<R: Read>(reader: R) -> Result<Vec<LabelledText>, EmotionError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.deserialize::<LabelledRecord>().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| EmotionError::LabelledSet {
            row,
            message: e.to_string(),
        })?;
        let label = rec
            .label
            .parse()
            .map_err(|message| EmotionError::LabelledSet { row, message })?;
        out.push(LabelledText {
            text: rec.text,
            label,
        });
    }
    Ok(out)
}

pub fn load_labelled(path: &Path) -> Result<Vec<LabelledText>, EmotionError> {
    let file = std::fs::File::open(path).map_err(|e| EmotionError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_labelled(file)
}

/// The canonical example sentences shipped with the default lexicon.
pub fn canonical_examples() -> Vec<LabelledText> {
    read_labelled(DEFAULT_EXAMPLES.as_bytes()).expect("bundled examples are valid")
}

pub fn context_labels() -> Vec<String> {
    EmotionContext::ALL.iter().map(|c| c.as_str().to_string()).collect()
}

pub fn evaluate(
    classifier: &dyn EmotionClassifier,
    test_set: &[LabelledText],
) -> Result<EvalReport, EmotionError> {
    let mut confusion = ConfusionMatrix::new(4);
    for item in test_set {
        let predicted = classifier.classify(&item.text)?.context;
        confusion.record(item.label.index(), predicted.index());
    }
    Ok(EvalReport::from_confusion(context_labels(), confusion))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(text: &str) -> EmotionPrediction {
        KeywordClassifier::default().classify(text).unwrap()
    }

    #[test]
    fn spec_examples() {
        assert_eq!(classify("I can't stop crying").context, EmotionContext::Sadness);
        assert_eq!(classify("I feel great today").context, EmotionContext::HappinessContent);
        assert_eq!(classify("I'm furious at my brother").context, EmotionContext::Anger);
        assert!(matches!(
            KeywordClassifier::default().classify(""),
            Err(EmotionError::EmptyText)
        ));
    }

    #[test]
    fn case_and_whitespace_insensitive() {
        let a = classify("I feel GREAT   today");
        let b = classify("i feel great today");
        assert_eq!(a, b);
    }

    #[test]
    fn no_hits_is_low_confidence_fallback() {
        let c = KeywordClassifier::default().with_fallback(EmotionContext::AnxietyFear);
        let p = c.classify("the weather is weather").unwrap();
        assert_eq!(p.context, EmotionContext::AnxietyFear);
        assert!(p.low_confidence);
    }

    #[test]
    fn tie_is_low_confidence() {
        let lex = "context,keyword,weight\nsadness,blue,1\nanger,red,1\n";
        let c = KeywordClassifier::from_reader(lex.as_bytes(), Normalizer::default(), EmotionContext::Anger)
            .unwrap();
        let p = c.classify("blue and red").unwrap();
        assert!(p.low_confidence);
        assert_eq!(p.context, EmotionContext::Anger);
    }

    #[test]
    fn negation_suppresses_hits() {
        let p = classify("I am not happy");
        assert!(p.low_confidence);
        let p = classify("I don't feel happy, I feel sad");
        assert_eq!(p.context, EmotionContext::Sadness);
        assert!(!p.low_confidence);
    }

    #[test]
    fn bad_lexicon_rows() {
        let lex = "context,keyword,weight\njoy,happy,1\n";
        assert!(matches!(
            KeywordClassifier::from_reader(lex.as_bytes(), Normalizer::default(), EmotionContext::Sadness),
            Err(EmotionError::Lexicon { row: 1, .. })
        ));
        let lex = "context,keyword,weight\nsadness,sad,-1\n";
        assert!(KeywordClassifier::from_reader(lex.as_bytes(), Normalizer::default(), EmotionContext::Sadness)
            .is_err());
    }

    #[test]
    fn perfect_and_constant_classifiers() {
        let set: Vec<LabelledText> = EmotionContext::ALL
            .iter()
            .flat_map(|&c| {
                (0..3).map(move |i| LabelledText {
                    text: format!("{c} {i}"),
                    label: c,
                })
            })
            .collect();
        let perfect = PrecomputedEmotions::new(&set);
        let r = evaluate(&perfect, &set).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);

        struct Constant;
        impl EmotionClassifier for Constant {
            fn classify(&self, _: &str) -> Result<EmotionPrediction, EmotionError> {
                Ok(EmotionPrediction {
                    context: EmotionContext::Anger,
                    low_confidence: false,
                })
            }
        }
        let r = evaluate(&Constant, &set).unwrap();
        assert_eq!(r.accuracy, 0.25);
    }

    #[test]
    fn canonical_examples_cover_all_contexts() {
        let ex = canonical_examples();
        for c in EmotionContext::ALL {
            assert!(ex.iter().filter(|e| e.label == c).count() >= 5);
        }
    }
}

//! Empathy scorers: a multinomial naive Bayes model over stemmed bags of words,
//! and a lookup adapter for labels produced elsewhere.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::corpus::{EmpathyAnnotation, EmpathyLabel};
use crate::eval::{ConfusionMatrix, EvalReport};
use crate::scoring::{EmpathyScorer, ScoringError};
use crate::text::{canonical, Normalizer};

const CLASSES: usize = 3;

#[derive(Debug, Clone)]
pub struct NaiveBayesEmpathy {
    normalizer: Normalizer,
    log_prior: [f64; CLASSES],
    /// Per-stem log likelihood for each class.
    log_likelihood: HashMap<String, [f64; CLASSES]>,
}

impl NaiveBayesEmpathy {
    /// `alpha` is the additive (Lidstone) smoothing constant.
    pub fn train(
        examples: &[EmpathyAnnotation],
        alpha: f64,
        normalizer: Normalizer,
    ) -> Result<Self, ScoringError> {
        if examples.is_empty() {
            return Err(ScoringError::Config("empathy training set is empty".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ScoringError::Config(format!("smoothing must be positive, got {alpha}")));
        }
        let mut doc_counts = [0usize; CLASSES];
        let mut token_totals = [0u64; CLASSES];
        let mut counts: HashMap<String, [u64; CLASSES]> = HashMap::new();
        for ex in examples {
            let c = ex.resolved.value() as usize;
            doc_counts[c] += 1;
            for stem in normalizer.stems(&ex.utterance) {
                counts.entry(stem).or_default()[c] += 1;
                token_totals[c] += 1;
            }
        }
        let n_docs = examples.len() as f64;
        let vocab = counts.len() as f64;
        let log_prior = std::array::from_fn(|c| {
            ((doc_counts[c] as f64 + alpha) / (n_docs + alpha * CLASSES as f64)).ln()
        });
        let log_likelihood = counts
            .into_iter()
            .map(|(stem, per_class)| {
                let ll = std::array::from_fn(|c| {
                    ((per_class[c] as f64 + alpha) / (token_totals[c] as f64 + alpha * vocab)).ln()
                });
                (stem, ll)
            })
            .collect();
        Ok(Self {
            normalizer,
            log_prior,
            log_likelihood,
        })
    }

    /// Unnormalised log posterior per class. Stems unseen in training are skipped.
    pub fn log_scores(&self, text: &str) -> [f64; CLASSES] {
        let mut scores = self.log_prior;
        for stem in self.normalizer.stems(text) {
            if let Some(ll) = self.log_likelihood.get(&stem) {
                for c in 0..CLASSES {
                    scores[c] += ll[c];
                }
            }
        }
        scores
    }
}

impl EmpathyScorer for NaiveBayesEmpathy {
    fn classify(&self, text: &str) -> Result<EmpathyLabel, ScoringError> {
        if text.trim().is_empty() {
            return Err(ScoringError::EmptyText);
        }
        let scores = self.log_scores(text);
        // strict comparison: ties resolve to the lower label
        let mut best = 0;
        for c in 1..CLASSES {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        Ok(EmpathyLabel::new(best as u8).expect("class index below 3"))
    }
}

/// Labels keyed by canonicalised utterance text.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedEmpathy {
    labels: HashMap<String, EmpathyLabel>,
}

#[derive(Deserialize)]
struct LabelRecord {
    text: String,
    label: EmpathyLabel,
}

impl PrecomputedEmpathy {
    pub fn new(labels: impl IntoIterator<Item = (String, EmpathyLabel)>) -> Self {
        Self {
            labels: labels
                .into_iter()
                .map(|(t, l)| (canonical(&t), l))
                .collect(),
        }
    }

    /// CSV with columns `text,label`.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, ScoringError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut labels = Vec::new();
        for rec in rdr.deserialize::<LabelRecord>() {
            let rec = rec.map_err(|e| ScoringError::Config(format!("label file: {e}")))?;
            labels.push((rec.text, rec.label));
        }
        Ok(Self::new(labels))
    }

    pub fn from_file(path: &Path) -> Result<Self, ScoringError> {
        let file = std::fs::File::open(path)
            .map_err(|e| ScoringError::Config(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }
}

impl EmpathyScorer for PrecomputedEmpathy {
    fn classify(&self, text: &str) -> Result<EmpathyLabel, ScoringError> {
        self.labels
            .get(&canonical(text))
            .copied()
            .ok_or_else(|| ScoringError::Scorer {
                text: text.to_string(),
                message: "no precomputed empathy label".into(),
            })
    }
}

/// Scores `scorer` against the resolved labels of `test_set`.
pub fn evaluate(
    scorer: &dyn EmpathyScorer,
    test_set: &[EmpathyAnnotation],
) -> Result<EvalReport, ScoringError> {
    let mut confusion = ConfusionMatrix::new(CLASSES);
    for item in test_set {
        let predicted = scorer.classify(&item.utterance)?;
        confusion.record(item.resolved.value() as usize, predicted.value() as usize);
    }
    let labels = (0..CLASSES).map(|c| c.to_string()).collect();
    Ok(EvalReport::from_confusion(labels, confusion))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::resolve_empathy;

    fn ann(text: &str, label: u8) -> EmpathyAnnotation {
        let l = EmpathyLabel::new(label).unwrap();
        EmpathyAnnotation {
            utterance: text.into(),
            labels: [l; 3],
            resolved: resolve_empathy([label; 3]).unwrap(),
        }
    }

    fn training() -> Vec<EmpathyAnnotation> {
        vec![
            ann("Describe the event.", 0),
            ann("State what happened.", 0),
            ann("Okay. What happened?", 1),
            ann("Can you tell me what happened?", 1),
            ann("I'm so sorry you are going through this. I am here for you.", 2),
            ann("I'm truly sorry. You are not alone, I am here for you.", 2),
        ]
    }

    #[test]
    fn learns_separable_labels() {
        let nb = NaiveBayesEmpathy::train(&training(), 1.0, Normalizer::default()).unwrap();
        assert_eq!(nb.classify("I am so sorry, I am here for you.").unwrap().value(), 2);
        assert_eq!(nb.classify("Describe the event").unwrap().value(), 0);
        assert!(nb.classify("   ").is_err());
    }

    #[test]
    fn unseen_words_fall_back_to_prior() {
        let data = vec![ann("a", 1), ann("b", 1), ann("c", 0)];
        let nb = NaiveBayesEmpathy::train(&data, 1.0, Normalizer::default()).unwrap();
        assert_eq!(nb.classify("zebra quantum").unwrap().value(), 1);
    }

    #[test]
    fn rejects_bad_training_setup() {
        assert!(NaiveBayesEmpathy::train(&[], 1.0, Normalizer::default()).is_err());
        assert!(NaiveBayesEmpathy::train(&training(), 0.0, Normalizer::default()).is_err());
    }

    #[test]
    fn lookup_adapter() {
        let data = "text,label\n\"Hello, friend.\",2\nOk.,0\n";
        let lookup = PrecomputedEmpathy::from_reader(data.as_bytes()).unwrap();
        assert_eq!(lookup.classify(" Hello, friend. ").unwrap().value(), 2);
        assert!(matches!(lookup.classify("missing"), Err(ScoringError::Scorer { .. })));
    }
}

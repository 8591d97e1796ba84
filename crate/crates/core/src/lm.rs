//! Interpolated word trigram model with add-k smoothing.
//!
//! Used as the default perplexity source for the fluency score. Each level
//! (unigram, bigram, trigram) is add-k smoothed over the same vocabulary and
//! the three estimates are linearly interpolated, so every conditional
//! distribution sums to one and perplexity is always at least 1.

use std::collections::HashMap;

use thiserror::Error;

use crate::scoring::{PerplexityProvider, ScoringError};
use crate::text::tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum LmError {
    #[error("smoothing constant must be positive, got {0}")]
    BadSmoothing(f64),
    #[error("interpolation weights must be non-negative and sum to 1, got {0:?}")]
    BadLambdas([f64; 3]),
    #[error("training corpus has no tokens")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigramConfig {
    /// Add-k constant applied at every order.
    pub k: f64,
    /// Weights for the unigram, bigram and trigram estimates.
    pub lambdas: [f64; 3],
}

impl Default for TrigramConfig {
    fn default() -> Self {
        Self {
            k: 0.01,
            lambdas: [0.1, 0.3, 0.6],
        }
    }
}

impl TrigramConfig {
    fn validate(&self) -> Result<(), LmError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(LmError::BadSmoothing(self.k));
        }
        let sum: f64 = self.lambdas.iter().sum();
        if self.lambdas.iter().any(|l| *l < 0.0 || !l.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(LmError::BadLambdas(self.lambdas));
        }
        Ok(())
    }
}

type WordId = u32;

const BOS: WordId = 0;
const EOS: WordId = 1;
const UNK: WordId = 2;

#[derive(Debug, Clone)]
pub struct TrigramModel {
    cfg: TrigramConfig,
    vocab: HashMap<String, WordId>,
    unigrams: Vec<u64>,
    unigram_total: u64,
    bigrams: HashMap<(WordId, WordId), u64>,
    bigram_ctx: HashMap<WordId, u64>,
    trigrams: HashMap<(WordId, WordId, WordId), u64>,
    trigram_ctx: HashMap<(WordId, WordId), u64>,
}

impl TrigramModel {
    pub fn train<'a, I>(texts: I, cfg: TrigramConfig) -> Result<Self, LmError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        cfg.validate()?;
        let mut vocab: HashMap<String, WordId> = HashMap::new();
        vocab.insert("<s>".into(), BOS);
        vocab.insert("</s>".into(), EOS);
        vocab.insert("<unk>".into(), UNK);
        let mut model = Self {
            cfg,
            vocab,
            unigrams: vec![0; 3],
            unigram_total: 0,
            bigrams: HashMap::new(),
            bigram_ctx: HashMap::new(),
            trigrams: HashMap::new(),
            trigram_ctx: HashMap::new(),
        };
        let mut saw_word = false;
        for text in texts {
            let mut ids = vec![BOS, BOS];
            for tok in tokenize(text) {
                saw_word = true;
                let next = model.vocab.len() as WordId;
                let id = *model.vocab.entry(tok).or_insert(next);
                if id as usize == model.unigrams.len() {
                    model.unigrams.push(0);
                }
                ids.push(id);
            }
            ids.push(EOS);
            for w in ids.windows(3) {
                let (u, v, x) = (w[0], w[1], w[2]);
                model.unigrams[x as usize] += 1;
                model.unigram_total += 1;
                *model.bigrams.entry((v, x)).or_default() += 1;
                *model.bigram_ctx.entry(v).or_default() += 1;
                *model.trigrams.entry((u, v, x)).or_default() += 1;
                *model.trigram_ctx.entry((u, v)).or_default() += 1;
            }
        }
        if !saw_word {
            return Err(LmError::EmptyCorpus);
        }
        Ok(model)
    }

    /// Number of predictable types: every word plus `</s>` and `<unk>`.
    fn predictable(&self) -> f64 {
        (self.vocab.len() - 1) as f64
    }

    fn id(&self, word: &str) -> WordId {
        self.vocab.get(word).copied().unwrap_or(UNK)
    }

    fn prob_ids(&self, u: WordId, v: WordId, w: WordId) -> f64 {
        let k = self.cfg.k;
        let kv = k * self.predictable();
        let uni = (self.unigrams.get(w as usize).copied().unwrap_or(0) as f64 + k)
            / (self.unigram_total as f64 + kv);
        let bi = (self.bigrams.get(&(v, w)).copied().unwrap_or(0) as f64 + k)
            / (self.bigram_ctx.get(&v).copied().unwrap_or(0) as f64 + kv);
        let tri = (self.trigrams.get(&(u, v, w)).copied().unwrap_or(0) as f64 + k)
            / (self.trigram_ctx.get(&(u, v)).copied().unwrap_or(0) as f64 + kv);
        let [l1, l2, l3] = self.cfg.lambdas;
        l1 * uni + l2 * bi + l3 * tri
    }

    /// P(word | prev2 prev1). `None` context positions mean sentence start;
    /// `None` word means end of sentence.
    pub fn prob(&self, prev2: Option<&str>, prev1: Option<&str>, word: Option<&str>) -> f64 {
        let ctx = |w: Option<&str>| w.map_or(BOS, |w| self.id(w));
        self.prob_ids(ctx(prev2), ctx(prev1), word.map_or(EOS, |w| self.id(w)))
    }

    /// Words seen in training (excluding the sentence markers).
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vocab
            .iter()
            .filter(|(_, id)| **id > UNK)
            .map(|(w, _)| w.as_str())
    }

    pub fn perplexity_of(&self, text: &str) -> f64 {
        let mut ids = vec![BOS, BOS];
        ids.extend(tokenize(text).iter().map(|t| self.id(t)));
        ids.push(EOS);
        let log_sum: f64 = ids
            .windows(3)
            .map(|w| self.prob_ids(w[0], w[1], w[2]).ln())
            .sum();
        let m = (ids.len() - 2) as f64;
        (-log_sum / m).exp().max(1.0)
    }
}

impl PerplexityProvider for TrigramModel {
    fn perplexity(&self, text: &str) -> Result<f64, ScoringError> {
        Ok(self.perplexity_of(text))
    }
}

//! The three normalised component scores used by retrieval.
//!
//! * empathy: classifier label in {0, 1, 2} divided by 2;
//! * fluency: `1/ppl(u) - RP(u)`, floored at 0, divided by `max_fluency` and
//!   capped at 1, where `RP` charges `repeat_penalty` for every repeated
//!   non-stopword stem;
//! * novelty: mean weighted n-gram overlap distance to the bot's remembered
//!   utterances.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmentation::AugmentedPool;
use crate::corpus::EmpathyLabel;
use crate::pool_file::AnnotatedUtterance;
use crate::text::{tokenize, Normalizer};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("cannot score empty text")]
    EmptyText,
    #[error("scorer failed on {text:?}: {message}")]
    Scorer { text: String, message: String },
    #[error("perplexity must be finite and >= 1, got {0}")]
    InvalidPerplexity(f64),
    #[error("invalid scoring configuration: {0}")]
    Config(String),
}

pub trait EmpathyScorer: Send + Sync {
    fn classify(&self, text: &str) -> Result<EmpathyLabel, ScoringError>;
}

pub trait PerplexityProvider: Send + Sync {
    fn perplexity(&self, text: &str) -> Result<f64, ScoringError>;
}

#[derive(Debug, Clone)]
pub struct FluencyConfig {
    pub repeat_penalty: f64,
    pub max_fluency: f64,
    pub normalizer: Normalizer,
}

impl Default for FluencyConfig {
    fn default() -> Self {
        Self {
            repeat_penalty: 0.01,
            max_fluency: 0.16,
            normalizer: Normalizer::default(),
        }
    }
}

impl FluencyConfig {
    pub fn validate(&self) -> Result<(), ScoringError> {
        if !(self.repeat_penalty > 0.0 && self.repeat_penalty.is_finite()) {
            return Err(ScoringError::Config(format!(
                "repeat_penalty must be > 0, got {}",
                self.repeat_penalty
            )));
        }
        if !(self.max_fluency > 0.0 && self.max_fluency.is_finite()) {
            return Err(ScoringError::Config(format!(
                "max_fluency must be > 0, got {}",
                self.max_fluency
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub empathy_norm: f64,
    pub fluency_norm: f64,
    pub novelty_norm: f64,
}

pub fn empathy_norm_from_label(label: EmpathyLabel) -> f64 {
    label.value() as f64 / EmpathyLabel::MAX as f64
}

pub fn empathy_norm(u: &str, scorer: &dyn EmpathyScorer) -> Result<f64, ScoringError> {
    if u.trim().is_empty() {
        return Err(ScoringError::EmptyText);
    }
    Ok(empathy_norm_from_label(scorer.classify(u)?))
}

/// Occurrences of each non-stopword stem beyond its first.
pub fn repeated_stems(u: &str, normalizer: &Normalizer) -> usize {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for stem in normalizer.content_stems(u) {
        *counts.entry(stem).or_default() += 1;
    }
    counts.values().map(|c| c - 1).sum()
}

pub fn repeat_penalty(u: &str, cfg: &FluencyConfig) -> f64 {
    cfg.repeat_penalty * repeated_stems(u, &cfg.normalizer) as f64
}

/// Unnormalised fluency `1/ppl - RP`; negative when the penalty dominates.
pub fn fluency_raw(
    u: &str,
    provider: &dyn PerplexityProvider,
    cfg: &FluencyConfig,
) -> Result<f64, ScoringError> {
    if u.trim().is_empty() {
        return Err(ScoringError::EmptyText);
    }
    let ppl = provider.perplexity(u)?;
    if !(ppl >= 1.0 && ppl.is_finite()) {
        return Err(ScoringError::InvalidPerplexity(ppl));
    }
    Ok(1.0 / ppl - repeat_penalty(u, cfg))
}

pub fn fluency_norm_from_raw(raw: f64, cfg: &FluencyConfig) -> f64 {
    (raw.max(0.0) / cfg.max_fluency).min(1.0)
}

pub fn fluency_norm(
    u: &str,
    provider: &dyn PerplexityProvider,
    cfg: &FluencyConfig,
) -> Result<f64, ScoringError> {
    Ok(fluency_norm_from_raw(fluency_raw(u, provider, cfg)?, cfg))
}

/// Word tokens of an utterance with a per-token hash for cheap comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    words: Vec<String>,
    hashes: Vec<u64>,
}

impl TokenSeq {
    pub fn new(text: &str) -> Self {
        Self::from_words(tokenize(text))
    }

    pub fn from_words(words: Vec<String>) -> Self {
        let hashes = words
            .iter()
            .map(|w| {
                let mut h = DefaultHasher::new();
                w.hash(&mut h);
                h.finish()
            })
            .collect();
        Self { words, hashes }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    #[inline]
    fn same(&self, i: usize, other: &TokenSeq, j: usize) -> bool {
        self.hashes[i] == other.hashes[j] && self.words[i] == other.words[j]
    }
}

/// Weighted n-gram overlap distance between two utterances, in [0, 1].
///
/// `N` is the word length of the shorter utterance. For each `n` in `1..=N`
/// the term is `(1 - |A_n ∩ B_n| / min(|A_n|, |B_n|))^n` over the *sets* of
/// word n-grams, and the distance is the mean of the terms. Two texts without
/// any word tokens are at distance 0; one empty and one non-empty at 1.
pub fn overlap_distance(u1: &str, u2: &str) -> f64 {
    overlap_distance_tokens(&TokenSeq::new(u1), &TokenSeq::new(u2))
}

pub fn overlap_distance_tokens(a: &TokenSeq, b: &TokenSeq) -> f64 {
    let (la, lb) = (a.len(), b.len());
    let n_max = la.min(lb);
    if n_max == 0 {
        return if la == lb { 0.0 } else { 1.0 };
    }

    // reach[i]: longest n such that the n-gram of `a` ending at i occurs in `b`.
    let mut reach = vec![0usize; la];
    let mut prev = vec![0usize; lb + 1];
    let mut row = vec![0usize; lb + 1];
    for i in 0..la {
        for j in 0..lb {
            row[j + 1] = if a.same(i, b, j) { prev[j] + 1 } else { 0 };
            reach[i] = reach[i].max(row[j + 1]);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    let repeat_a = earlier_repeat(a);
    let repeat_b = earlier_repeat(b);

    let mut sum = 0.0;
    for n in 1..=n_max {
        let mut distinct_a = 0usize;
        let mut shared = 0usize;
        for i in (n - 1)..la {
            if repeat_a[i] < n {
                distinct_a += 1;
                if reach[i] >= n {
                    shared += 1;
                }
            }
        }
        let distinct_b = ((n - 1)..lb).filter(|&j| repeat_b[j] < n).count();
        let ratio = shared as f64 / distinct_a.min(distinct_b) as f64;
        sum += (1.0 - ratio).powi(n as i32);
    }
    sum / n_max as f64
}

/// For each end position i, the longest n such that the n-gram ending at i
/// also ends at some earlier position (so it is not a first occurrence).
fn earlier_repeat(s: &TokenSeq) -> Vec<usize> {
    let len = s.len();
    let mut best = vec![0usize; len];
    // run[j] holds the common-suffix length of s[..=i-1] and s[..=j-1] from the previous row.
    let mut prev = vec![0usize; len + 1];
    let mut row = vec![0usize; len + 1];
    for i in 0..len {
        for j in 0..i {
            row[j + 1] = if s.same(i, s, j) { prev[j] + 1 } else { 0 };
            best[i] = best[i].max(row[j + 1]);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    best
}

/// Mean overlap distance from `u` to each remembered utterance; 1.0 for an
/// empty memory.
pub fn novelty_norm<S: AsRef<str>>(u: &str, memory: &[S]) -> f64 {
    let u = TokenSeq::new(u);
    let memory: Vec<TokenSeq> = memory.iter().map(|m| TokenSeq::new(m.as_ref())).collect();
    novelty_norm_tokens(&u, memory.iter())
}

pub fn novelty_norm_tokens<'a, I>(u: &TokenSeq, memory: I) -> f64
where
    I: IntoIterator<Item = &'a TokenSeq>,
{
    let mut distances: Vec<f64> = memory
        .into_iter()
        .map(|m| overlap_distance_tokens(u, m))
        .collect();
    if distances.is_empty() {
        return 1.0;
    }
    // summing in sorted order makes the mean independent of memory order
    distances.sort_by(f64::total_cmp);
    distances.iter().sum::<f64>() / distances.len() as f64
}

/// Annotates every utterance of `pool` with its empathy label and raw fluency.
/// Fails on the first utterance either scorer rejects.
pub fn precompute_scores(
    pool: &AugmentedPool,
    scorer: &dyn EmpathyScorer,
    provider: &dyn PerplexityProvider,
    cfg: &FluencyConfig,
) -> Result<Vec<AnnotatedUtterance>, ScoringError> {
    cfg.validate()?;
    pool.utterances
        .iter()
        .map(|text| {
            let wrap = |e: ScoringError| match e {
                ScoringError::Scorer { .. } => e,
                other => ScoringError::Scorer {
                    text: text.clone(),
                    message: other.to_string(),
                },
            };
            let label = scorer.classify(text).map_err(wrap)?;
            let raw = fluency_raw(text, provider, cfg).map_err(wrap)?;
            Ok(AnnotatedUtterance {
                pool_id: pool.pool_id.clone(),
                persona: pool.persona,
                text: text.clone(),
                empathy_label: Some(label),
                fluency_raw: Some(raw),
            })
        })
        .collect()
}

/// Largest raw fluency over a set of annotated utterances, for calibrating
/// `max_fluency` against a given model and corpus.
pub fn max_raw_fluency<'a, I>(rows: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a AnnotatedUtterance>,
{
    rows.into_iter()
        .filter_map(|r| r.fluency_raw)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Persona;

    struct FixedPpl(f64);

    impl PerplexityProvider for FixedPpl {
        fn perplexity(&self, _: &str) -> Result<f64, ScoringError> {
            Ok(self.0)
        }
    }

    struct FixedLabel(u8);

    impl EmpathyScorer for FixedLabel {
        fn classify(&self, _: &str) -> Result<EmpathyLabel, ScoringError> {
            EmpathyLabel::new(self.0).map_err(|e| ScoringError::Config(e.to_string()))
        }
    }

    #[test]
    fn empathy_normalisation() {
        assert_eq!(empathy_norm("hi", &FixedLabel(2)).unwrap(), 1.0);
        assert_eq!(empathy_norm("hi", &FixedLabel(1)).unwrap(), 0.5);
        assert_eq!(empathy_norm("hi", &FixedLabel(0)).unwrap(), 0.0);
        assert!(matches!(empathy_norm(" ", &FixedLabel(0)), Err(ScoringError::EmptyText)));
    }

    #[test]
    fn repeat_penalty_hand_cases() {
        let cfg = FluencyConfig::default();
        assert_eq!(repeat_penalty("happy to see you happy", &cfg), 0.01);
        assert_eq!(repeat_penalty("you are not alone", &cfg), 0.0);
        assert_eq!(repeat_penalty("try, try, try again", &cfg), 0.02);
        // stems collapse inflections
        assert_eq!(repeat_penalty("Crying helps. I cried.", &cfg), 0.01);
    }

    #[test]
    fn fluency_hand_cases() {
        let cfg = FluencyConfig::default();
        assert_eq!(fluency_norm("you are not alone", &FixedPpl(10.0), &cfg).unwrap(), 0.625);
        assert_eq!(fluency_norm("try, try, try again", &FixedPpl(100.0), &cfg).unwrap(), 0.0);
        assert_eq!(fluency_norm("you are not alone", &FixedPpl(6.25), &cfg).unwrap(), 1.0);
        assert_eq!(fluency_norm("you are not alone", &FixedPpl(1.0), &cfg).unwrap(), 1.0);
        assert!((fluency_raw("try, try, try again", &FixedPpl(100.0), &cfg).unwrap() + 0.01).abs() < 1e-15);
    }

    #[test]
    fn fluency_rejects_invalid_perplexity() {
        let cfg = FluencyConfig::default();
        assert!(matches!(
            fluency_norm("a b", &FixedPpl(0.5), &cfg),
            Err(ScoringError::InvalidPerplexity(_))
        ));
        assert!(matches!(
            fluency_norm("a b", &FixedPpl(f64::NAN), &cfg),
            Err(ScoringError::InvalidPerplexity(_))
        ));
    }

    #[test]
    fn fluency_config_validation() {
        let cfg = FluencyConfig {
            max_fluency: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = FluencyConfig {
            repeat_penalty: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overlap_distance_hand_cases() {
        assert_eq!(overlap_distance("I am happy today", "I am happy today"), 0.0);
        assert_eq!(overlap_distance("good morning", "terrible evening friend"), 1.0);
        let d = overlap_distance("i am happy today", "i am sad");
        assert!((d - 19.0 / 36.0).abs() < 1e-12, "{d}");
        assert_eq!(overlap_distance("...", "?!"), 0.0);
        assert_eq!(overlap_distance("...", "hello"), 1.0);
    }

    #[test]
    fn overlap_uses_sets_not_multisets() {
        // A_1 = {a}, B_1 = {a, b}: ratio 1/1 -> term 0; N = 2 (shorter has 2 tokens)
        // A_2 = {a a}, B_2 = {a b}: ratio 0 -> term 1; d = (0 + 1) / 2
        assert_eq!(overlap_distance("a a", "a b"), 0.5);
    }

    #[test]
    fn novelty_cases() {
        let u = "i am here for you";
        assert_eq!(novelty_norm::<&str>(u, &[]), 1.0);
        assert_eq!(novelty_norm(u, &[u]), 0.0);
        assert_eq!(novelty_norm(u, &[u, "completely different words"]), 0.5);
    }

    #[test]
    fn precompute_annotates_and_reports_failures() {
        let pool = AugmentedPool {
            pool_id: "p".into(),
            persona: Persona::Kai,
            utterances: vec!["One.".into(), "Two.".into()],
        };
        let cfg = FluencyConfig::default();
        let rows = precompute_scores(&pool, &FixedLabel(2), &FixedPpl(10.0), &cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].empathy_label.unwrap().value(), 2);
        assert_eq!(rows[0].fluency_raw, Some(0.1));
        assert_eq!(max_raw_fluency(&rows), Some(0.1));

        let err = precompute_scores(&pool, &FixedLabel(2), &FixedPpl(0.2), &cfg).unwrap_err();
        match err {
            ScoringError::Scorer { text, .. } => assert_eq!(text, "One."),
            other => panic!("unexpected {other:?}"),
        }
    }
}

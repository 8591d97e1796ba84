//! Utterance retrieval by weighted multi-objective score.
//!
//! `R(u) = w_e·E_norm(u) + w_f·F_norm(u) + w_d·D_norm(u)` is evaluated on a
//! uniformly sampled subset of the pool and the best candidate is returned and
//! remembered.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use zeroize::Zeroize;

use crate::corpus::EmpathyLabel;
use crate::pool_file::AnnotatedUtterance;
use crate::scoring::{
    empathy_norm_from_label, fluency_norm_from_raw, fluency_raw, novelty_norm_tokens,
    EmpathyScorer, FluencyConfig, PerplexityProvider, ScoreBreakdown, ScoringError, TokenSeq,
};

pub const MEMORY_CAPACITY: usize = 50;
pub const DEFAULT_SUBSET_SIZE: usize = 15;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot retrieve from an empty pool")]
    EmptyPool,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWeights {
    pub empathy: f64,
    pub fluency: f64,
    pub novelty: f64,
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        Self {
            empathy: 1.0,
            fluency: 0.75,
            novelty: 2.0,
        }
    }
}

impl RetrievalWeights {
    pub fn new(empathy: f64, fluency: f64, novelty: f64) -> Result<Self, RetrievalError> {
        let w = Self {
            empathy,
            fluency,
            novelty,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RetrievalError> {
        for (name, v) in [
            ("empathy", self.empathy),
            ("fluency", self.fluency),
            ("novelty", self.novelty),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RetrievalError::Config(format!(
                    "{name} weight must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn combine(&self, b: &ScoreBreakdown) -> f64 {
        self.empathy * b.empathy_norm + self.fluency * b.fluency_norm + self.novelty * b.novelty_norm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Candidates scored per retrieval.
    pub subset_size: usize,
    pub rng_seed: Option<u64>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            subset_size: DEFAULT_SUBSET_SIZE,
            rng_seed: None,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.subset_size == 0 {
            return Err(RetrievalError::Config("subset size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Remembered {
    text: String,
    tokens: TokenSeq,
}

/// The bot's most recent utterances, oldest evicted first.
#[derive(Debug, Clone)]
pub struct UtteranceMemory {
    entries: VecDeque<Remembered>,
    capacity: usize,
}

impl Default for UtteranceMemory {
    fn default() -> Self {
        Self::with_capacity(MEMORY_CAPACITY)
    }
}

impl UtteranceMemory {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, text: impl Into<String>) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            if let Some(mut old) = self.entries.pop_front() {
                old.text.zeroize();
            }
        }
        let text = text.into();
        let tokens = TokenSeq::new(&text);
        self.entries.push_back(Remembered { text, tokens });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Oldest first.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.text.as_str())
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.iter().any(|e| e.text == text)
    }

    fn tokens(&self) -> impl Iterator<Item = &TokenSeq> {
        self.entries.iter().map(|e| &e.tokens)
    }

    /// Overwrites and drops every remembered utterance.
    pub fn wipe(&mut self) {
        for e in self.entries.iter_mut() {
            e.text.zeroize();
        }
        self.entries.clear();
    }
}

/// A pool entry with whatever scores were precomputed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub text: String,
    pub empathy_label: Option<EmpathyLabel>,
    pub fluency_raw: Option<f64>,
}

impl ScoredUtterance {
    pub fn new(text: impl Into<String>, empathy_label: Option<EmpathyLabel>, fluency_raw: Option<f64>) -> Self {
        Self {
            text: text.into(),
            empathy_label,
            fluency_raw,
        }
    }
}

impl From<AnnotatedUtterance> for ScoredUtterance {
    fn from(a: AnnotatedUtterance) -> Self {
        Self {
            text: a.text,
            empathy_label: a.empathy_label,
            fluency_raw: a.fluency_raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved {
    pub text: String,
    /// Index of the winner in the pool.
    pub index: usize,
    pub score: f64,
    pub breakdown: ScoreBreakdown,
    /// Pool indices in sampled order.
    pub sampled: Vec<usize>,
}

/// Weights, sampling config and the (optional) live scorers used when a pool
/// entry lacks precomputed values. Cheap to clone and shareable across sessions.
#[derive(Clone)]
pub struct Retriever {
    pub weights: RetrievalWeights,
    pub config: RetrievalConfig,
    pub fluency: FluencyConfig,
    pub empathy_scorer: Option<Arc<dyn EmpathyScorer>>,
    pub perplexity: Option<Arc<dyn PerplexityProvider>>,
}

impl std::fmt::Debug for Retriever {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Retriever")
            .field("weights", &self.weights)
            .field("config", &self.config)
            .field("empathy_scorer", &self.empathy_scorer.is_some())
            .field("perplexity", &self.perplexity.is_some())
            .finish()
    }
}

impl Retriever {
    pub fn new(weights: RetrievalWeights, config: RetrievalConfig) -> Result<Self, RetrievalError> {
        weights.validate()?;
        config.validate()?;
        Ok(Self {
            weights,
            config,
            fluency: FluencyConfig::default(),
            empathy_scorer: None,
            perplexity: None,
        })
    }

    pub fn with_fluency(mut self, fluency: FluencyConfig) -> Self {
        self.fluency = fluency;
        self
    }

    pub fn with_scorers(
        mut self,
        empathy: Option<Arc<dyn EmpathyScorer>>,
        perplexity: Option<Arc<dyn PerplexityProvider>>,
    ) -> Self {
        self.empathy_scorer = empathy;
        self.perplexity = perplexity;
        self
    }

    /// Normalised components of `u` against the current memory.
    pub fn breakdown(
        &self,
        u: &ScoredUtterance,
        tokens: &TokenSeq,
        memory: &UtteranceMemory,
    ) -> Result<ScoreBreakdown, RetrievalError> {
        let empathy_norm = match (u.empathy_label, &self.empathy_scorer) {
            (Some(label), _) => empathy_norm_from_label(label),
            (None, Some(scorer)) => empathy_norm_from_label(scorer.classify(&u.text)?),
            (None, None) => {
                return Err(RetrievalError::Config(format!(
                    "no empathy label for {:?} and no empathy scorer attached",
                    u.text
                )))
            }
        };
        let raw = match (u.fluency_raw, &self.perplexity) {
            (Some(raw), _) => raw,
            (None, Some(p)) => fluency_raw(&u.text, p.as_ref(), &self.fluency)?,
            (None, None) => {
                return Err(RetrievalError::Config(format!(
                    "no fluency score for {:?} and no perplexity provider attached",
                    u.text
                )))
            }
        };
        Ok(ScoreBreakdown {
            empathy_norm,
            fluency_norm: fluency_norm_from_raw(raw, &self.fluency),
            novelty_norm: novelty_norm_tokens(tokens, memory.tokens()),
        })
    }

    pub fn score(
        &self,
        u: &ScoredUtterance,
        memory: &UtteranceMemory,
    ) -> Result<(f64, ScoreBreakdown), RetrievalError> {
        let b = self.breakdown(u, &TokenSeq::new(&u.text), memory)?;
        Ok((self.weights.combine(&b), b))
    }

    /// Scores a uniform sample of `min(k, |pool|)` distinct candidates and
    /// returns the best, remembering it. Ties go to the earliest sampled.
    pub fn retrieve<R: Rng + ?Sized>(
        &self,
        pool: &[ScoredUtterance],
        memory: &mut UtteranceMemory,
        rng: &mut R,
    ) -> Result<Retrieved, RetrievalError> {
        if pool.is_empty() {
            return Err(RetrievalError::EmptyPool);
        }
        let sampled = sample_candidates(pool.len(), self.config.subset_size, rng);
        let mut best: Option<(usize, f64, ScoreBreakdown)> = None;
        for &idx in &sampled {
            let cand = &pool[idx];
            let b = self.breakdown(cand, &TokenSeq::new(&cand.text), memory)?;
            let r = self.weights.combine(&b);
            if best.as_ref().is_none_or(|(_, s, _)| r > *s) {
                best = Some((idx, r, b));
            }
        }
        let (index, score, breakdown) = best.expect("sample is non-empty");
        let text = pool[index].text.clone();
        memory.push(text.clone());
        Ok(Retrieved {
            text,
            index,
            score,
            breakdown,
            sampled,
        })
    }
}

/// `min(k, len)` distinct indices in random order.
pub fn sample_candidates<R: Rng + ?Sized>(len: usize, k: usize, rng: &mut R) -> Vec<usize> {
    index::sample(rng, len, k.min(len)).into_vec()
}

/// Predicted n-gram set comparisons for one candidate against `p` remembered
/// utterances when the shorter side has `n` words: `p·n·(n+1)/2`.
pub fn comparison_count(p: u64, n: u64) -> u64 {
    p * n * (n + 1) / 2
}

/// Per-candidate comparison estimate against the actual memory contents,
/// using the shorter length of each pair.
pub fn estimate_cost(candidate: &str, memory: &UtteranceMemory) -> u64 {
    let n = TokenSeq::new(candidate).len() as u64;
    memory
        .tokens()
        .map(|m| comparison_count(1, n.min(m.len() as u64)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn label(v: u8) -> Option<EmpathyLabel> {
        Some(EmpathyLabel::new(v).unwrap())
    }

    fn retriever(weights: RetrievalWeights) -> Retriever {
        Retriever::new(weights, RetrievalConfig::default()).unwrap()
    }

    #[test]
    fn weighted_sum_examples() {
        let w = RetrievalWeights::default();
        let b = ScoreBreakdown {
            empathy_norm: 1.0,
            fluency_norm: 0.5,
            novelty_norm: 0.8,
        };
        assert!((w.combine(&b) - 2.975).abs() < 1e-12);
        let zero = ScoreBreakdown {
            empathy_norm: 0.0,
            fluency_norm: 0.0,
            novelty_norm: 0.0,
        };
        assert_eq!(w.combine(&zero), 0.0);
        let proj = RetrievalWeights::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(
            proj.combine(&ScoreBreakdown {
                novelty_norm: 0.3,
                ..b
            }),
            0.3
        );
    }

    #[test]
    fn score_uses_precomputed_values() {
        let r = retriever(RetrievalWeights::default());
        // fluency_raw 0.08 -> 0.5 after normalisation; empty memory -> novelty 1
        let u = ScoredUtterance::new("You are not alone.", label(2), Some(0.08));
        let (s, b) = r.score(&u, &UtteranceMemory::default()).unwrap();
        assert_eq!(b.fluency_norm, 0.5);
        assert!((s - (1.0 + 0.375 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn missing_scores_without_scorers_is_config_error() {
        let r = retriever(RetrievalWeights::default());
        let u = ScoredUtterance::new("Hi.", None, Some(0.1));
        assert!(matches!(
            r.score(&u, &UtteranceMemory::default()),
            Err(RetrievalError::Config(_))
        ));
    }

    #[test]
    fn weights_reject_negative() {
        assert!(RetrievalWeights::new(-1.0, 0.0, 0.0).is_err());
        assert!(RetrievalWeights::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(Retriever::new(
            RetrievalWeights::default(),
            RetrievalConfig {
                subset_size: 0,
                rng_seed: None
            }
        )
        .is_err());
    }

    #[test]
    fn pool_of_one_is_forced() {
        let r = retriever(RetrievalWeights::default());
        let pool = vec![ScoredUtterance::new("Only option.", label(0), Some(0.0))];
        let mut mem = UtteranceMemory::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = r.retrieve(&pool, &mut mem, &mut rng).unwrap();
        assert_eq!(got.text, "Only option.");
        assert_eq!(mem.len(), 1);
        assert!(matches!(
            r.retrieve(&[], &mut mem, &mut rng),
            Err(RetrievalError::EmptyPool)
        ));
    }

    #[test]
    fn dominant_candidate_wins_for_any_seed() {
        let r = retriever(RetrievalWeights::default());
        let mut pool: Vec<ScoredUtterance> = (0..10)
            .map(|i| ScoredUtterance::new(format!("filler number {i} here."), label(0), Some(0.0)))
            .collect();
        pool.push(ScoredUtterance::new("Completely fresh words appear.", label(2), Some(0.2)));
        for seed in 0..20 {
            let mut mem = UtteranceMemory::default();
            mem.push("filler number here.");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let got = r.retrieve(&pool, &mut mem, &mut rng).unwrap();
            assert_eq!(got.text, "Completely fresh words appear.");
        }
    }

    #[test]
    fn ties_go_to_earliest_sampled() {
        let r = retriever(RetrievalWeights::default());
        let pool: Vec<ScoredUtterance> = (0..5)
            .map(|i| ScoredUtterance::new(format!("word{i}"), label(1), Some(0.1)))
            .collect();
        let mut mem = UtteranceMemory::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let got = r.retrieve(&pool, &mut mem, &mut rng).unwrap();
        assert_eq!(got.index, got.sampled[0]);
    }

    #[test]
    fn memory_evicts_oldest() {
        let mut mem = UtteranceMemory::default();
        for i in 0..60 {
            mem.push(format!("utterance {i}"));
        }
        assert_eq!(mem.len(), MEMORY_CAPACITY);
        assert!(!mem.contains("utterance 9"));
        assert!(mem.contains("utterance 10"));
        assert_eq!(mem.texts().next(), Some("utterance 10"));
        mem.wipe();
        assert!(mem.is_empty());
    }

    #[test]
    fn cost_formula() {
        assert_eq!(comparison_count(50, 10), 2750);
        assert_eq!(comparison_count(0, 10), 0);
        assert_eq!(comparison_count(1, 1), 1);
        let mut mem = UtteranceMemory::default();
        assert_eq!(estimate_cost("a b c", &mem), 0);
        mem.push("x y");
        mem.push("x y z w");
        // min(3,2)=2 -> 3 ; min(3,4)=3 -> 6
        assert_eq!(estimate_cost("a b c", &mem), 9);
    }

    #[test]
    fn sampling_without_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_candidates(100, 15, &mut rng);
        assert_eq!(s.len(), 15);
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 15);
        assert_eq!(sample_candidates(4, 15, &mut rng).len(), 4);
    }
}

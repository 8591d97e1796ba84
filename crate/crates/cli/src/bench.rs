//! Retrieval latency sweep.

use std::io::Write;
use std::time::Instant;

use anyhow::{ensure, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satbot_core::assets::{demo_store, load_pool_dir};
use satbot_core::corpus::{EmpathyLabel, Persona};
use satbot_core::retrieval::{
    estimate_cost, RetrievalConfig, RetrievalWeights, Retriever, ScoredUtterance, UtteranceMemory,
};
use serde::Serialize;

use crate::BenchArgs;

const SYNTHETIC_POOL: usize = 1000;
const SYNTHETIC_VOCAB: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub k: usize,
    pub p: usize,
    pub trials: usize,
    pub candidates: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub mean_score: f64,
    /// Mean over sampled candidates of `estimate_cost` against the memory.
    pub predicted_comparisons_per_candidate: f64,
    /// Mean over trials of the summed estimate for all sampled candidates.
    pub predicted_comparisons_per_retrieve: f64,
}

/// `size` utterances of exactly `words` words, with random precomputed scores.
pub fn synthetic_pool(size: usize, words: usize, rng: &mut impl Rng) -> Vec<ScoredUtterance> {
    (0..size)
        .map(|_| {
            let text: Vec<String> = (0..words)
                .map(|_| format!("w{}", rng.random_range(0..SYNTHETIC_VOCAB)))
                .collect();
            ScoredUtterance::new(
                text.join(" "),
                Some(EmpathyLabel::new(rng.random_range(0..=EmpathyLabel::MAX)).expect("in range")),
                Some(rng.random_range(0.0..0.16)),
            )
        })
        .collect()
}

/// Times `trials` retrievals for each (k, p); memory is refilled with `p`
/// random pool utterances before every trial.
pub fn sweep(
    pool: &[ScoredUtterance],
    ks: &[usize],
    ps: &[usize],
    trials: usize,
    weights: RetrievalWeights,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    ensure!(!pool.is_empty(), "bench pool is empty");
    ensure!(trials > 0, "trials must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for &k in ks {
        let retriever = Retriever::new(weights, RetrievalConfig { subset_size: k, rng_seed: Some(seed) })?;
        for &p in ps {
            let mut times = Vec::with_capacity(trials);
            let mut score_sum = 0.0;
            let mut cost_sum = 0.0;
            let mut candidate_total = 0usize;
            for _ in 0..trials {
                let mut memory = UtteranceMemory::with_capacity(p);
                for _ in 0..p {
                    memory.push(pool[rng.random_range(0..pool.len())].text.clone());
                }
                let baseline = memory.clone();
                let start = Instant::now();
                let r = retriever.retrieve(pool, &mut memory, &mut rng)?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
                score_sum += r.score;
                candidate_total += r.sampled.len();
                cost_sum += r
                    .sampled
                    .iter()
                    .map(|&i| estimate_cost(&pool[i].text, &baseline) as f64)
                    .sum::<f64>();
            }
            times.sort_by(f64::total_cmp);
            let n = trials as f64;
            rows.push(BenchRow {
                k,
                p,
                trials,
                candidates: candidate_total / trials,
                median_ms: median(&times),
                mean_ms: times.iter().sum::<f64>() / n,
                p95_ms: times[((times.len() as f64 * 0.95).ceil() as usize).clamp(1, times.len()) - 1],
                mean_score: score_sum / n,
                predicted_comparisons_per_candidate: cost_sum / candidate_total as f64,
                predicted_comparisons_per_retrieve: cost_sum / n,
            });
        }
    }
    Ok(rows)
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[m - 1] + sorted[m]) / 2.0
    } else {
        sorted[m]
    }
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(a: BenchArgs, seed: u64) -> Result<()> {
    let pool = match (a.synthetic_words, &a.pools) {
        (Some(words), _) => {
            ensure!(words > 0, "--synthetic-words must be at least 1");
            synthetic_pool(SYNTHETIC_POOL, words, &mut ChaCha8Rng::seed_from_u64(seed))
        }
        (None, pools) => {
            let persona: Persona = a.persona.parse().map_err(anyhow::Error::msg)?;
            let store = match pools {
                Some(dir) => std::sync::Arc::new(load_pool_dir(dir)?),
                None => demo_store()?,
            };
            store
                .pool_ids(persona)
                .into_iter()
                .flat_map(|id| store.get(persona, id.as_str()).unwrap_or_default().to_vec())
                .collect()
        }
    };
    let rows = sweep(&pool, &a.k, &a.p, a.trials, RetrievalWeights::default(), seed)?;
    match &a.out {
        Some(path) => write_csv(crate::commands::create(path)?, &rows),
        None => write_csv(std::io::stdout().lock(), &rows),
    }
}

//! Bundled demo data and the pipeline that turns a dataset into scored,
//! persona-conditioned pools ready for the dialogue engine.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::augmentation::{augment, AugmentError, AugmentedPool};
use crate::corpus::{
    parse_annotations, parse_dataset, partition_all, CorpusError, Dataset, EmpathyAnnotation,
    LoadOptions, PartitionConfig, Persona,
};
use crate::dialogue::{DialogueEngine, Flow, PoolStore};
use crate::emotion::KeywordClassifier;
use crate::protocols::ProtocolCatalog;
use crate::retrieval::Retriever;
use crate::safety::RiskLexicon;
use crate::empathy::NaiveBayesEmpathy;
use crate::lm::{LmError, TrigramConfig, TrigramModel};
use crate::pool_file::{read_pool_file, AnnotatedUtterance, PoolFileError};
use crate::retrieval::ScoredUtterance;
use crate::scoring::{precompute_scores, FluencyConfig, ScoringError};
use crate::text::Normalizer;

const DEMO_CORPUS: &str = include_str!("../data/demo_corpus.csv");
const DEMO_EMPATHY: &str = include_str!("../data/demo_empathy.csv");

pub const DEFAULT_NB_SMOOTHING: f64 = 1.0;

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    PoolFile(#[from] PoolFileError),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub fn demo_dataset() -> Dataset {
    parse_dataset(DEMO_CORPUS.as_bytes(), &LoadOptions::default()).expect("bundled corpus is valid")
}

pub fn demo_annotations() -> Vec<EmpathyAnnotation> {
    parse_annotations(DEMO_EMPATHY.as_bytes()).expect("bundled annotations are valid")
}

/// Augmented pools for one persona, skipping base utterances the persona's
/// respondents left entirely blank.
pub fn augment_persona(
    dataset: &Dataset,
    persona: Persona,
    cfg: &PartitionConfig,
) -> Result<Vec<AugmentedPool>, AugmentError> {
    partition_all(dataset, persona, cfg)
        .iter()
        .filter(|p| !p.utterances.is_empty())
        .map(augment)
        .collect()
}

/// Trigram model over every raw rewriting the persona's respondents wrote.
pub fn persona_language_model(
    dataset: &Dataset,
    persona: Persona,
    partition: &PartitionConfig,
    cfg: TrigramConfig,
) -> Result<TrigramModel, LmError> {
    let pools = partition_all(dataset, persona, partition);
    TrigramModel::train(
        pools.iter().flat_map(|p| p.utterances.iter().map(String::as_str)),
        cfg,
    )
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub partition: PartitionConfig,
    pub lm: TrigramConfig,
    pub fluency: FluencyConfig,
}

/// Partition, augment and score every pool for every persona.
pub fn build_annotated(
    dataset: &Dataset,
    annotations: &[EmpathyAnnotation],
    opts: &BuildOptions,
) -> Result<Vec<AnnotatedUtterance>, BuildError> {
    let scorer = NaiveBayesEmpathy::train(annotations, DEFAULT_NB_SMOOTHING, Normalizer::default())?;
    let mut out = Vec::new();
    for persona in Persona::ALL {
        let lm = persona_language_model(dataset, persona, &opts.partition, opts.lm)?;
        for pool in augment_persona(dataset, persona, &opts.partition)? {
            out.extend(precompute_scores(&pool, &scorer, &lm, &opts.fluency)?);
        }
    }
    Ok(out)
}

pub fn store_from_rows(rows: Vec<AnnotatedUtterance>) -> PoolStore {
    let mut grouped: BTreeMap<_, Vec<ScoredUtterance>> = BTreeMap::new();
    for row in rows {
        grouped
            .entry((row.persona, row.pool_id.clone()))
            .or_default()
            .push(row.into());
    }
    let mut store = PoolStore::new();
    for ((persona, pool_id), utterances) in grouped {
        store.insert(persona, pool_id, utterances);
    }
    store
}

/// Reads every `*.csv` pool file in `dir` (sorted by name).
pub fn load_pool_dir(dir: &Path) -> Result<PoolStore, BuildError> {
    let io = |e: std::io::Error| BuildError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    let mut rows = Vec::new();
    for p in paths {
        rows.extend(read_pool_file(&p)?);
    }
    Ok(store_from_rows(rows))
}

/// Scored pools for the bundled demo corpus.
pub fn demo_store() -> Result<Arc<PoolStore>, BuildError> {
    let rows = build_annotated(&demo_dataset(), &demo_annotations(), &BuildOptions::default())?;
    Ok(Arc::new(store_from_rows(rows)))
}

/// Engine over `pools` with the bundled flow, catalog, lexicons and classifier.
pub fn default_engine(pools: Arc<PoolStore>, retriever: Retriever) -> DialogueEngine {
    DialogueEngine {
        flow: Arc::new(Flow::default()),
        catalog: Arc::new(ProtocolCatalog::default()),
        emotion: Arc::new(KeywordClassifier::default()),
        risk: Arc::new(RiskLexicon::default()),
        pools,
        retriever,
    }
}

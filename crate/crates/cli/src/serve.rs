use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use satbot_core::assets::{default_engine, demo_store, load_pool_dir};
use satbot_core::corpus::{EmotionContext, Persona};
use satbot_core::dialogue::Flow;
use satbot_core::emotion::KeywordClassifier;
use satbot_core::protocols::ProtocolCatalog;
use satbot_core::retrieval::{RetrievalConfig, RetrievalWeights, Retriever};
use satbot_core::safety::RiskLexicon;
use satbot_core::text::Normalizer;
use satbot_service::{router, spawn_reaper, ChatService, Credentials, ServiceConfig};

use crate::ServeArgs;

pub fn parse_weights(s: &str) -> Result<RetrievalWeights> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("weights {s:?}"))?;
    let [e, f, d] = parts[..] else {
        bail!("weights need three comma-separated values, got {s:?}");
    };
    Ok(RetrievalWeights::new(e, f, d)?)
}

pub fn run(a: ServeArgs, seed: u64) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let weights = parse_weights(&a.weights)?;
    let retriever = Retriever::new(
        weights,
        RetrievalConfig {
            subset_size: a.k,
            rng_seed: Some(seed),
        },
    )?;
    let dir = a.data_dir.as_deref();
    let pools = match dir.map(|d| d.join("pools")) {
        Some(p) if p.is_dir() => Arc::new(load_pool_dir(&p)?),
        Some(p) => bail!("{} is not a directory", p.display()),
        None => demo_store()?,
    };
    let mut engine = default_engine(pools, retriever);
    if let Some(dir) = dir {
        let catalog = match existing(dir, "protocols.csv") {
            Some(p) => ProtocolCatalog::from_file(&p)?,
            None => ProtocolCatalog::default(),
        };
        if let Some(p) = existing(dir, "flow.json") {
            engine.flow = Arc::new(Flow::load(&p, &catalog)?);
        }
        if let Some(p) = existing(dir, "risk_lexicon.csv") {
            engine.risk = Arc::new(RiskLexicon::from_file(&p, Normalizer::default())?);
        }
        if let Some(p) = existing(dir, "emotion_lexicon.csv") {
            engine.emotion = Arc::new(KeywordClassifier::from_file(
                &p,
                Normalizer::default(),
                EmotionContext::Sadness,
            )?);
        }
        engine.catalog = Arc::new(catalog);
    }
    for persona in Persona::ALL {
        let missing = engine.missing_pools(persona);
        if !missing.is_empty() {
            tracing::warn!(%persona, ?missing, "pools missing; fallback text will be used where the flow has it");
        }
    }
    let cred_path = a
        .credentials
        .clone()
        .or_else(|| dir.and_then(|d| existing(d, "credentials.csv")))
        .context("no credentials file: pass --credentials or put credentials.csv in --data-dir")?;
    let credentials = Credentials::from_file(&cred_path)?;
    let config = ServiceConfig {
        idle_timeout: Duration::from_secs(a.idle_timeout_mins.max(1) * 60),
        seed: Some(seed),
    };
    let service = Arc::new(ChatService::new(engine, credentials, config));

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let _reaper = spawn_reaper(service.clone());
        let addr = format!("{}:{}", a.bind, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!(seed, "listening on {}", listener.local_addr()?);
        axum::serve(listener, router(service))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn existing(dir: &Path, name: &str) -> Option<std::path::PathBuf> {
    let p = dir.join(name);
    p.is_file().then_some(p)
}

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};
use std::time::Duration;

use satbot_core::assets::{default_engine, demo_store};
use satbot_core::dialogue::PoolStore;
use satbot_core::retrieval::{RetrievalConfig, RetrievalWeights, Retriever};
use satbot_service::{ChatService, Credentials, ServiceConfig};

pub fn pools() -> Arc<PoolStore> {
    static POOLS: OnceLock<Arc<PoolStore>> = OnceLock::new();
    POOLS.get_or_init(|| demo_store().unwrap()).clone()
}

pub fn service_with(idle: Duration) -> Arc<ChatService> {
    let retriever = Retriever::new(RetrievalWeights::default(), RetrievalConfig::default()).unwrap();
    let mut creds = Credentials::default();
    creds.insert("alice", "wonderland");
    creds.insert("bob", "builder");
    Arc::new(ChatService::new(
        default_engine(pools(), retriever),
        creds,
        ServiceConfig {
            idle_timeout: idle,
            seed: Some(42),
        },
    ))
}

pub fn service() -> Arc<ChatService> {
    service_with(Duration::from_secs(3600))
}

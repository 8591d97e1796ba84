//! Session-scoped chat service over the dialogue engine.
//!
//! Sessions live only in process memory. Ending a session, whether by the
//! client, by the flow reaching its end, or by idling out, wipes its state.
//! Nothing about the client connection (address, user agent) is read.

mod auth;
mod http;
mod store;

pub use auth::{hash_password, hash_password_hex, Credentials};
pub use http::{
    router, ErrorBody, LoginRequest, LoginResponse, MessageRequest, PersonaInfoBody, PersonaRequest,
    SuggestionsResponse,
};
pub use store::{spawn_reaper, ChatService, PersonaInfo, ServiceConfig, DEFAULT_IDLE_TIMEOUT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid credentials")]
    Unauthorized,
    #[error("no such session")]
    NotFound,
    #[error("session has ended")]
    Gone,
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown persona {0:?}")]
    UnknownPersona(String),
    #[error("{message}")]
    InvalidInput {
        message: String,
        remaining_attempts: u32,
        choices: Vec<String>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal error: {0}")]
    Internal(String),
}

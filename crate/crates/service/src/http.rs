//! JSON-over-HTTP transport. Handlers see only paths and bodies.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use satbot_core::dialogue::{Turn, UserInput};
use satbot_core::protocols::ProtocolRef;
use serde::{Deserialize, Serialize};

use crate::store::{ChatService, PersonaInfo};
use crate::ServiceError;

#[derive(Debug, Deserialize)]
pub struct LoginRequest {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LoginResponse {
    pub session_id: String,
    pub personas: Vec<PersonaInfoBody>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PersonaInfoBody {
    pub id: String,
    pub name: String,
    pub description: String,
}

impl From<PersonaInfo> for PersonaInfoBody {
    fn from(p: PersonaInfo) -> Self {
        Self {
            id: p.id.into(),
            name: p.name.into(),
            description: p.description.into(),
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct PersonaRequest {
    pub persona: String,
}

/// Exactly one of `text` or `choice`.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct MessageRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SuggestionsResponse {
    pub suggestions: Vec<ProtocolRef>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remaining_attempts: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<String>>,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized"),
            ServiceError::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            ServiceError::Gone => (StatusCode::GONE, "session_ended"),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ServiceError::UnknownPersona(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_persona"),
            ServiceError::InvalidInput { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_input"),
            ServiceError::Config(_) | ServiceError::Internal(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        let (remaining_attempts, choices) = match &self {
            ServiceError::InvalidInput {
                remaining_attempts,
                choices,
                ..
            } => (Some(*remaining_attempts), Some(choices.clone())),
            _ => (None, None),
        };
        let body = ErrorBody {
            error: code.into(),
            message: self.to_string(),
            remaining_attempts,
            choices,
        };
        (status, Json(body)).into_response()
    }
}

pub fn router(service: Arc<ChatService>) -> Router {
    Router::new()
        .route("/sessions", post(login))
        .route("/personas", get(personas))
        .route("/sessions/{id}", delete(end_session))
        .route("/sessions/{id}/persona", post(select_persona))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/suggestions", get(suggestions))
        .with_state(service)
}

async fn login(
    State(svc): State<Arc<ChatService>>,
    Json(req): Json<LoginRequest>,
) -> Result<(StatusCode, Json<LoginResponse>), ServiceError> {
    let (session_id, personas) = svc.create_session(&req.username, &req.password)?;
    Ok((
        StatusCode::CREATED,
        Json(LoginResponse {
            session_id,
            personas: personas.into_iter().map(Into::into).collect(),
        }),
    ))
}

async fn personas(State(svc): State<Arc<ChatService>>) -> Json<Vec<PersonaInfoBody>> {
    Json(svc.personas().into_iter().map(Into::into).collect())
}

async fn select_persona(
    State(svc): State<Arc<ChatService>>,
    Path(id): Path<String>,
    Json(req): Json<PersonaRequest>,
) -> Result<Json<Turn>, ServiceError> {
    svc.select_persona(&id, &req.persona).await.map(Json)
}

async fn post_message(
    State(svc): State<Arc<ChatService>>,
    Path(id): Path<String>,
    Json(req): Json<MessageRequest>,
) -> Result<Json<Turn>, ServiceError> {
    let input = match (req.text, req.choice) {
        (Some(t), None) => UserInput::Text(t),
        (None, Some(c)) => UserInput::Choice(c),
        _ => {
            return Err(ServiceError::BadRequest(
                "send exactly one of \"text\" or \"choice\"".into(),
            ))
        }
    };
    svc.post_message(&id, input).await.map(Json)
}

async fn suggestions(
    State(svc): State<Arc<ChatService>>,
    Path(id): Path<String>,
) -> Result<Json<SuggestionsResponse>, ServiceError> {
    let suggestions = svc.suggestions(&id).await?;
    Ok(Json(SuggestionsResponse { suggestions }))
}

async fn end_session(
    State(svc): State<Arc<ChatService>>,
    Path(id): Path<String>,
) -> Result<StatusCode, ServiceError> {
    svc.end_session(&id).await?;
    Ok(StatusCode::NO_CONTENT)
}

use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use crate::{ServeError, SuggestService, DEFAULT_K};

#[derive(Debug, Deserialize)]
struct SuggestParams {
    #[serde(default)]
    prefix: String,
    session_id: Option<String>,
    k: Option<usize>,
    ranker: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Submission {
    session_id: String,
    query: String,
}

#[derive(Debug, Serialize)]
struct Health<'a> {
    status: &'static str,
    model_version: &'a str,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ServeError {
    fn into_response(self) -> Response {
        let status = match self {
            ServeError::UnknownRanker(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

async fn suggest(
    State(svc): State<Arc<SuggestService>>,
    Query(p): Query<SuggestParams>,
) -> Result<Json<crate::SuggestResponse>, ServeError> {
    svc.suggest(
        &p.prefix,
        p.session_id.as_deref(),
        p.k.unwrap_or(DEFAULT_K),
        p.ranker.as_deref(),
    )
    .map(Json)
}

async fn submit(State(svc): State<Arc<SuggestService>>, Json(s): Json<Submission>) -> StatusCode {
    svc.record_submission(&s.session_id, &s.query);
    StatusCode::NO_CONTENT
}

async fn rankers(State(svc): State<Arc<SuggestService>>) -> Json<Vec<String>> {
    Json(svc.ranker_ids())
}

async fn health(State(svc): State<Arc<SuggestService>>) -> Response {
    Json(Health {
        status: "ok",
        model_version: svc.model_version(),
    })
    .into_response()
}

pub fn router(service: Arc<SuggestService>) -> Router {
    Router::new()
        .route("/suggest", get(suggest))
        .route("/submit", post(submit))
        .route("/rankers", get(rankers))
        .route("/health", get(health))
        .with_state(service)
}

/// Serves until ctrl-c.
pub async fn serve(listener: TcpListener, service: Arc<SuggestService>) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

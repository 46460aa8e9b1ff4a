//! REST API over the job store.

use std::sync::Arc;

use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use crate::config::ServiceConfig;
use crate::fixture;
use crate::job::{JobError, JobStore, NewJob, ReviewInput, Stage};

pub type AppState = Arc<JobStore>;

pub struct ApiError(StatusCode, String);

impl From<JobError> for ApiError {
    fn from(e: JobError) -> Self {
        let status = match &e {
            JobError::NotFound(_) => StatusCode::NOT_FOUND,
            JobError::Conflict(_) => StatusCode::CONFLICT,
            JobError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            JobError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn unprocessable(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, msg.into())
}

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/run", post(run_stage))
        .route("/jobs/{id}/steps", get(list_steps))
        .route("/jobs/{id}/steps/{sid}/review", post(review_step))
        .route("/jobs/{id}/metrics", get(metrics))
        .route("/jobs/{id}/artifacts/{name}", get(artifact))
        .with_state(store)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, JobError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

fn json_part<T: serde::de::DeserializeOwned>(name: &str, bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| unprocessable(format!("{name}: {e}")))
}

/// Multipart fields: `page` (repeated PNG files, in page order), or
/// `corpus` (a fixture spec rendered on the server, which also supplies
/// template, mock answers and ground truth); optional `drawing_id`,
/// `template`, `mock`, `truth`, `config` and `seed`.
async fn create_job(State(store): State<AppState>, mut form: Multipart) -> Result<impl IntoResponse, ApiError> {
    let mut new = NewJob::default();
    let mut corpus: Option<Option<aibat_fixtures::CorpusSpec>> = None;
    let mut seed = 0u64;
    let mut drawing_id: Option<String> = None;
    while let Some(field) = form.next_field().await.map_err(|e| bad_request(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| bad_request(e.to_string()))?;
        match name.as_str() {
            "page" => new.pages.push(bytes.to_vec()),
            "template" => new.template = Some(json_part(&name, &bytes)?),
            "mock" => new.mock = Some(json_part(&name, &bytes)?),
            "truth" => new.truth = Some(json_part(&name, &bytes)?),
            "config" => new.config = Some(json_part::<ServiceConfig>(&name, &bytes)?),
            "corpus" if bytes.iter().all(u8::is_ascii_whitespace) => corpus = Some(None),
            "corpus" => corpus = Some(Some(json_part(&name, &bytes)?)),
            "seed" => {
                seed = std::str::from_utf8(&bytes)
                    .ok()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| unprocessable("seed must be an unsigned integer"))?
            }
            "drawing_id" => drawing_id = Some(String::from_utf8_lossy(&bytes).trim().to_string()),
            other => return Err(bad_request(format!("unknown field {other:?}"))),
        }
    }
    if let Some(spec) = corpus {
        if !new.pages.is_empty() {
            return Err(unprocessable("give either pages or a corpus, not both"));
        }
        let legend = new.config.as_ref().map_or_else(|| ServiceConfig::default().legend, |c| c.legend.clone());
        let bundle = fixture::build(spec, seed, &legend).map_err(|e| unprocessable(e.to_string()))?;
        for page in &bundle.pages {
            new.pages.push(png_bytes(page)?);
        }
        drawing_id.get_or_insert(bundle.manifest.drawing_id.clone());
        new.template.get_or_insert(bundle.template);
        new.mock.get_or_insert(bundle.sidecar);
        new.truth.get_or_insert(bundle.manifest);
    }
    new.drawing_id = drawing_id.unwrap_or_else(|| "drawing".into());
    let job = blocking(move || store.create(new)).await?;
    Ok((StatusCode::CREATED, Json(job)))
}

fn png_bytes(page: &aibat_core::PageImage) -> Result<Vec<u8>, ApiError> {
    aibat_extraction::io::encode_png(page).map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

async fn get_job(State(store): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || store.get(&id)).await?))
}

#[derive(Deserialize)]
struct RunQuery {
    stage: String,
}

async fn run_stage(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RunQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let stage = Stage::parse(&q.stage)
        .ok_or_else(|| bad_request(format!("unknown stage {:?}; expected extract, parse, generate or evaluate", q.stage)))?;
    Ok(Json(blocking(move || store.run(&id, stage)).await?))
}

async fn list_steps(State(store): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || store.steps(&id)).await?))
}

async fn review_step(
    State(store): State<AppState>,
    Path((id, sid)): Path<(String, String)>,
    Json(input): Json<ReviewInput>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || store.review(&id, &sid, input)).await?))
}

async fn metrics(State(store): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || store.metrics(&id)).await?))
}

async fn artifact(
    State(store): State<AppState>,
    Path((id, name)): Path<(String, String)>,
) -> Result<impl IntoResponse, ApiError> {
    let bytes = blocking(move || store.artifact(&id, &name)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes))
}

pub async fn serve(store: AppState, addr: std::net::SocketAddr) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await?;
    Ok(())
}

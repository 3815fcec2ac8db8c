use std::future::Future;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::api::{self, ApiError, SearchRequest, ServiceState};

/// Shared handle to the service state; empty while the index is loading.
#[derive(Clone, Default)]
pub struct AppHandle {
    inner: Arc<RwLock<Option<Arc<ServiceState>>>>,
}

impl AppHandle {
    /// A handle that answers 503 until [`AppHandle::set_ready`] is called.
    pub fn loading() -> Self {
        Self::default()
    }

    pub fn ready(state: ServiceState) -> Self {
        let handle = Self::default();
        handle.set_ready(state);
        handle
    }

    pub fn set_ready(&self, state: ServiceState) {
        *self.inner.write().expect("state lock poisoned") = Some(Arc::new(state));
    }

    pub fn current(&self) -> Option<Arc<ServiceState>> {
        self.inner.read().expect("state lock poisoned").clone()
    }

    fn require(&self) -> Result<Arc<ServiceState>, ApiError> {
        self.current().ok_or(ApiError::NotReady)
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

async fn health(State(app): State<AppHandle>) -> impl IntoResponse {
    Json(api::health(app.current().as_deref()))
}

async fn word(State(app): State<AppHandle>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let state = app.require()?;
    let id: u64 = id
        .parse()
        .map_err(|_| ApiError::BadRequest(format!("word id {id:?} is not an unsigned integer")))?;
    api::handle_word(&state, id).map(Json)
}

async fn search(
    State(app): State<AppHandle>,
    body: Result<Json<SearchRequest>, JsonRejection>,
) -> Result<impl IntoResponse, ApiError> {
    let state = app.require()?;
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let response = tokio::task::spawn_blocking(move || api::handle_search(&state, &req))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response))
}

/// CORS policy for the browser client: any origin unless one is given.
pub fn cors(origin: Option<&str>) -> CorsLayer {
    let allow = match origin.and_then(|o| o.parse().ok()) {
        Some(value) => AllowOrigin::exact(value),
        None => AllowOrigin::any(),
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
}

pub fn router(app: AppHandle) -> Router {
    router_with_cors(app, None)
}

pub fn router_with_cors(app: AppHandle, origin: Option<&str>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/words/{id}", get(word))
        .route("/api/search", post(search))
        .layer(cors(origin))
        .with_state(app)
}

/// Serves `app` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    app: AppHandle,
    origin: Option<&str>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router_with_cors(app, origin))
        .with_graceful_shutdown(shutdown)
        .await
}

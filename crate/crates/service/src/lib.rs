//! HTTP front end of the reverse dictionary.
//!
//! Routes:
//!
//! - `GET /api/health`: `{"status":"ok","points":N,"dim":D}` once loaded,
//!   `{"status":"loading"}` before.
//! - `GET /api/words/{id}`: word record with definitions and synonyms.
//! - `POST /api/search`: [`SearchRequest`] in, [`SearchResponse`] out.
//!
//! Errors are `{"error": "..."}` with status 400 (bad request), 404 (unknown
//! word), 422 (query cannot be embedded) or 503 (still loading).

pub mod api;
mod http;

pub use api::{
    handle_search, handle_word, ApiError, Health, SearchHitView, SearchRequest, SearchResponse, ServiceState,
    WordDetail, DEFAULT_LIMIT,
};
pub use http::{cors, router, router_with_cors, serve, AppHandle};

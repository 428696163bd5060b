//! HTTP service: job submission and monitoring, artifact serving and
//! simulation, backed by the filesystem artifact store.
//!
//! Routes (all JSON unless noted):
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/jobs` | `{owner, name}` → 202 `{jobId}` |
//! | GET | `/api/jobs` | job summaries |
//! | GET | `/api/jobs/{id}/log?from=N` | log lines with index ≥ N |
//! | GET | `/api/repos` | analyzed repositories with root bus factor |
//! | GET | `/api/repos/{owner}/{name}/tree` | `tree.json` bytes |
//! | GET | `/api/repos/{owner}/{name}/export.csv` | `tree.csv` bytes, `text/csv` |
//! | POST | `/api/repos/{owner}/{name}/simulate` | `{excluded}` → deltas |
//! | GET | `/api/search?q=&limit=` | provider search |
//!
//! Everything else is served from the UI bundle directory.

pub mod api;
pub mod config;
pub mod jobs;
pub mod worker;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::Router;
use busfactor_core::store::{ArtifactStore, StoreError};
use busfactor_github::RepoProvider;
use tower_http::services::ServeDir;

pub use config::ServiceConfig;

pub struct AppState {
    pub config: ServiceConfig,
    pub store: ArtifactStore,
    pub jobs: jobs::Jobs,
    pub provider: Arc<dyn RepoProvider>,
    sim_cache: Mutex<HashMap<String, (String, Arc<api::Loaded>)>>,
}

impl AppState {
    /// Opens (and recovers) the artifact store.
    pub fn new(config: ServiceConfig, provider: Arc<dyn RepoProvider>) -> Result<Arc<Self>, StoreError> {
        let store = ArtifactStore::open(&config.workdir)?;
        Ok(Arc::new(Self {
            jobs: jobs::Jobs::new(config.queue_cap),
            config,
            store,
            provider,
            sim_cache: Mutex::new(HashMap::new()),
        }))
    }
}

/// The full application: API plus static UI.
pub fn app(state: Arc<AppState>) -> Router {
    let ui = ServeDir::new(&state.config.static_dir).append_index_html_on_directories(true);
    Router::new()
        .nest("/api", api::router(state))
        .fallback_service(ui)
}

/// Spawns the worker pool on the current runtime.
pub fn spawn_workers(state: &Arc<AppState>) -> Vec<tokio::task::JoinHandle<()>> {
    (0..state.config.workers.max(1))
        .map(|_| tokio::spawn(worker::run(state.clone())))
        .collect()
}

//! Job execution: clone, mine, bot lookup, analysis, publish.

use std::sync::Arc;
use std::time::Instant;

use busfactor_core::pipeline::{self, StageLog};
use busfactor_core::store::ArtifactDir;
use busfactor_core::{miner, BotHints, BusFactor, RepoCoordinates};
use busfactor_github::ProviderError;
use tracing::{info, warn};

use crate::AppState;

/// Appends to the in-memory job log and to the repository's `job.log`.
#[derive(Clone)]
struct JobLog {
    state: Arc<AppState>,
    id: String,
    dir: ArtifactDir,
}

impl StageLog for JobLog {
    fn line(&mut self, text: &str) {
        self.state.jobs.log(&self.id, text);
        let stamped = format!("[{:.3}] {text}", crate::jobs::now_secs());
        if let Err(e) = self.dir.append_log(&stamped) {
            warn!(job = %self.id, error = %e, "cannot write job.log");
        }
    }
}

async fn blocking<T, F>(f: F) -> Result<T, String>
where
    F: FnOnce() -> Result<T, String> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| format!("worker task failed: {e}"))?
}

/// Worker loop; runs until the runtime shuts down.
pub async fn run(state: Arc<AppState>) {
    loop {
        let (id, coords) = state.jobs.next().await;
        info!(job = %id, repo = %coords.slug(), "job started");
        let outcome = run_job(state.clone(), &id, coords.clone()).await;
        match &outcome {
            Ok(bf) => info!(job = %id, repo = %coords.slug(), bus_factor = %bf, "job done"),
            Err(e) => warn!(job = %id, repo = %coords.slug(), error = %e, "job failed"),
        }
        state.jobs.finish(&id, outcome.err());
    }
}

pub async fn run_job(state: Arc<AppState>, id: &str, coords: RepoCoordinates) -> Result<BusFactor, String> {
    let dir = state.store.repo(&coords);
    let _ = dir.reset_log();
    let mut log = JobLog {
        state: state.clone(),
        id: id.to_string(),
        dir: dir.clone(),
    };
    log.line(&format!("analyzing {} from {}", coords.slug(), coords.clone_url));

    let result = execute(&state, &coords, &dir, &mut log).await;
    match &result {
        Ok(bf) => log.line(&format!("job done, root bus factor: {bf}")),
        Err(e) => log.line(&format!("job failed: {e}")),
    }
    result
}

async fn execute(
    state: &Arc<AppState>,
    coords: &RepoCoordinates,
    dir: &ArtifactDir,
    log: &mut JobLog,
) -> Result<BusFactor, String> {
    let window_days = state.config.window_days;

    let start = Instant::now();
    let clone_dir = dir.clone_dir();
    let url = coords.clone_url.clone();
    let handle = blocking(move || miner::clone_or_open(&clone_dir, &url).map_err(|e| e.to_string())).await;
    log.line(&format!(
        "clone {} in {} ms",
        if handle.is_ok() { "done" } else { "failed" },
        start.elapsed().as_millis()
    ));
    let handle = handle?;

    let mut l = log.clone();
    let mining = blocking(move || pipeline::mine(&handle, window_days, &mut l).map_err(|e| e.to_string())).await?;

    let start = Instant::now();
    let hints = match state.provider.list_bots(coords).await {
        Ok(hints) => {
            log.line(&format!(
                "list_bots done in {} ms: {} bot account(s)",
                start.elapsed().as_millis(),
                hints.logins.len()
            ));
            hints
        }
        Err(e @ ProviderError::NotFound(_)) => return Err(e.to_string()),
        Err(e) => {
            log.line(&format!("warning: bot list unavailable ({e}); continuing without bot exclusion"));
            BotHints::default()
        }
    };

    let mut l = log.clone();
    let (owner, name) = (coords.owner.clone(), coords.name.clone());
    let analysis = blocking(move || {
        pipeline::analyze_mining(&mining, &owner, &name, window_days, &hints, &mut l)
            .map_err(|e| e.to_string())
    })
    .await?;

    let start = Instant::now();
    let target = dir.clone();
    let artifacts = analysis.artifacts;
    let published = blocking(move || target.publish(&artifacts).map_err(|e| e.to_string())).await;
    log.line(&format!(
        "publish {} in {} ms",
        if published.is_ok() { "done" } else { "failed" },
        start.elapsed().as_millis()
    ));
    published?;
    Ok(analysis.tree.root.bus_factor)
}

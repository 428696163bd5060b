use std::net::SocketAddr;
use std::process::ExitCode;
use std::sync::Arc;

use busfactor_github::GitHubClient;
use busfactor_service::{app, spawn_workers, AppState, ServiceConfig};
use tracing::{error, info};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();

    let config = match ServiceConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(2);
        }
    };
    let client = GitHubClient::from_env();
    if !client.has_token() {
        info!("GH_TOKEN not set, using anonymous provider access");
    }
    let state = match AppState::new(config, Arc::new(client)) {
        Ok(s) => s,
        Err(e) => {
            error!("cannot open artifact store: {e}");
            return ExitCode::from(2);
        }
    };
    spawn_workers(&state);

    let addr = SocketAddr::from(([0, 0, 0, 0], state.config.port));
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            error!("cannot bind {addr}: {e}");
            return ExitCode::from(4);
        }
    };
    info!(
        %addr,
        workdir = %state.config.workdir.display(),
        workers = state.config.workers,
        "busfactor service listening"
    );
    let served = axum::serve(listener, app(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    match served {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("server error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;

use busfactor_core::miner::DEFAULT_WINDOW_DAYS;
use thiserror::Error;

pub const DEFAULT_CLONE_URL_TEMPLATE: &str = "https://github.com/{owner}/{name}.git";
pub const DEFAULT_QUEUE_CAP: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid value for {var}: {value:?}")]
pub struct ConfigError {
    pub var: &'static str,
    pub value: String,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Artifact store root (`BF_WORKDIR`).
    pub workdir: PathBuf,
    /// Listen port (`BF_PORT`).
    pub port: u16,
    /// Clone URL with `{owner}` and `{name}` placeholders (`BF_CLONE_URL_TEMPLATE`).
    pub clone_url_template: String,
    pub window_days: u32,
    pub workers: usize,
    pub queue_cap: usize,
    /// UI bundle served at `/` (`BF_STATIC_DIR`).
    pub static_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
        Self {
            workdir: PathBuf::from("./data"),
            port: 8080,
            clone_url_template: DEFAULT_CLONE_URL_TEMPLATE.to_string(),
            window_days: DEFAULT_WINDOW_DAYS,
            workers: cores.min(4),
            queue_cap: DEFAULT_QUEUE_CAP,
            static_dir: PathBuf::from("./web/dist"),
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let get = |k: &str| get(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        if let Some(dir) = get("BF_WORKDIR") {
            cfg.workdir = dir.into();
        }
        if let Some(port) = get("BF_PORT") {
            cfg.port = port.parse().map_err(|_| ConfigError { var: "BF_PORT", value: port })?;
        }
        if let Some(t) = get("BF_CLONE_URL_TEMPLATE") {
            cfg.clone_url_template = t;
        }
        if let Some(w) = get("BF_WINDOW_DAYS") {
            cfg.window_days = match w.parse() {
                Ok(days) if days > 0 => days,
                _ => return Err(ConfigError { var: "BF_WINDOW_DAYS", value: w }),
            };
        }
        if let Some(dir) = get("BF_STATIC_DIR") {
            cfg.static_dir = dir.into();
        }
        Ok(cfg)
    }

    pub fn clone_url(&self, owner: &str, name: &str) -> String {
        self.clone_url_template
            .replace("{owner}", owner)
            .replace("{name}", name)
    }
}

//! Hosting-provider access: bot accounts and repository search.
//!
//! Everything the analysis needs from the provider sits behind
//! [`RepoProvider`]. [`GitHubClient`] talks to the v3 REST API and
//! [`FakeProvider`] answers from memory for tests.

use std::collections::HashMap;
use std::time::Duration;

use async_trait::async_trait;
use busfactor_core::{BotHints, RepoCoordinates};
use reqwest::header::{HeaderMap, ACCEPT, AUTHORIZATION, LINK, RETRY_AFTER, USER_AGENT};
use reqwest::{Client, StatusCode};
use serde::Deserialize;
use thiserror::Error;
use tokio::sync::Mutex;
use tracing::{debug, warn};

pub const DEFAULT_API_URL: &str = "https://api.github.com";
pub const TOKEN_ENV: &str = "GH_TOKEN";
pub const PER_PAGE: usize = 100;
pub const MAX_SEARCH_LIMIT: usize = 50;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("repository not found: {0}")]
    NotFound(String),
    #[error("rate limited by provider{}", retry_hint(.retry_after))]
    RateLimited { retry_after: Option<Duration>, message: String },
    #[error("provider unreachable: {0}")]
    Offline(String),
    #[error("provider rejected credentials: {0}")]
    Auth(String),
    #[error("invalid request: {0}")]
    InvalidInput(String),
    #[error("provider returned {status}: {message}")]
    Http { status: u16, message: String },
    #[error("unexpected provider response: {0}")]
    Decode(String),
}

fn retry_hint(after: &Option<Duration>) -> String {
    match after {
        Some(d) => format!(", retry after {}s", d.as_secs()),
        None => String::new(),
    }
}

#[async_trait]
pub trait RepoProvider: Send + Sync {
    /// Identity hints for every contributor whose account type is Bot.
    ///
    /// An unreachable provider yields empty hints and a warning so the
    /// analysis can proceed; other failures are returned.
    async fn list_bots(&self, coords: &RepoCoordinates) -> Result<BotHints, ProviderError>;

    /// Repository search, provider order preserved. `limit` must be in 1..=50.
    async fn search_repos(&self, query: &str, limit: usize) -> Result<Vec<RepoCoordinates>, ProviderError>;
}

/// Reads `GH_TOKEN`, trimmed; unset or blank means anonymous access.
pub fn auth_token() -> Option<String> {
    token_from(std::env::var(TOKEN_ENV).ok())
}

fn token_from(raw: Option<String>) -> Option<String> {
    raw.map(|t| t.trim().to_string()).filter(|t| !t.is_empty())
}

fn validate_search(query: &str, limit: usize) -> Result<&str, ProviderError> {
    let query = query.trim();
    if query.is_empty() {
        return Err(ProviderError::InvalidInput("search query is empty".into()));
    }
    if !(1..=MAX_SEARCH_LIMIT).contains(&limit) {
        return Err(ProviderError::InvalidInput(format!(
            "limit must be between 1 and {MAX_SEARCH_LIMIT}, got {limit}"
        )));
    }
    Ok(query)
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    /// Upper bound on any single wait, including server-provided ones.
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(60),
        }
    }
}

/// GitHub v3 REST client. Cheap to share behind an `Arc`; requests are
/// issued one at a time.
pub struct GitHubClient {
    http: Client,
    base_url: String,
    token: Option<String>,
    retry: RetryPolicy,
    gate: Mutex<()>,
}

#[derive(Deserialize)]
struct Contributor {
    login: Option<String>,
    id: Option<u64>,
    #[serde(rename = "type")]
    kind: Option<String>,
}

#[derive(Deserialize)]
struct SearchResponse {
    items: Vec<SearchItem>,
}

#[derive(Deserialize)]
struct SearchItem {
    name: String,
    owner: SearchOwner,
    clone_url: String,
    default_branch: Option<String>,
}

#[derive(Deserialize)]
struct SearchOwner {
    login: String,
}

struct Page {
    body: Vec<u8>,
    next: Option<String>,
}

impl GitHubClient {
    pub fn new(token: Option<String>) -> Self {
        Self::with_base_url(DEFAULT_API_URL, token)
    }

    /// Client reading its token from the environment.
    pub fn from_env() -> Self {
        Self::new(auth_token())
    }

    pub fn with_base_url(base_url: &str, token: Option<String>) -> Self {
        let http = Client::builder()
            .connect_timeout(Duration::from_secs(10))
            .timeout(Duration::from_secs(30))
            .build()
            .expect("http client");
        Self {
            http,
            base_url: base_url.trim_end_matches('/').to_string(),
            token: token_from(token),
            retry: RetryPolicy::default(),
            gate: Mutex::new(()),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn has_token(&self) -> bool {
        self.token.is_some()
    }

    async fn get(&self, url: &str) -> Result<Page, ProviderError> {
        let _turn = self.gate.lock().await;
        let mut attempt = 0;
        loop {
            let mut req = self
                .http
                .get(url)
                .header(USER_AGENT, "busfactor")
                .header(ACCEPT, "application/vnd.github+json")
                .header("X-GitHub-Api-Version", "2022-11-28");
            if let Some(token) = &self.token {
                req = req.header(AUTHORIZATION, format!("Bearer {token}"));
            }
            debug!(url, attempt, "provider request");
            let resp = req.send().await.map_err(|e| {
                if e.is_connect() || e.is_timeout() {
                    ProviderError::Offline(e.to_string())
                } else {
                    ProviderError::Http {
                        status: 0,
                        message: e.to_string(),
                    }
                }
            })?;
            let status = resp.status();
            let headers = resp.headers().clone();
            let body = resp
                .bytes()
                .await
                .map_err(|e| ProviderError::Offline(e.to_string()))?
                .to_vec();
            if status.is_success() {
                return Ok(Page {
                    next: next_link(&headers),
                    body,
                });
            }
            let message = provider_message(&body);
            match classify(status, &headers, &message) {
                Failure::Retry(server_wait) if attempt < self.retry.max_retries => {
                    let backoff = self.retry.base_delay * 2u32.pow(attempt);
                    let wait = server_wait.unwrap_or(backoff).max(backoff).min(self.retry.max_delay);
                    warn!(url, status = status.as_u16(), ?wait, "secondary rate limit, backing off");
                    tokio::time::sleep(wait).await;
                    attempt += 1;
                }
                Failure::Retry(retry_after) | Failure::Exhausted(retry_after) => {
                    return Err(ProviderError::RateLimited { retry_after, message });
                }
                Failure::Fatal(err) => return Err(err),
            }
        }
    }
}

enum Failure {
    /// Secondary limit: worth retrying after the given wait.
    Retry(Option<Duration>),
    /// Primary quota used up; retrying before reset is pointless.
    Exhausted(Option<Duration>),
    Fatal(ProviderError),
}

fn header_u64(headers: &HeaderMap, name: &str) -> Option<u64> {
    headers.get(name)?.to_str().ok()?.trim().parse().ok()
}

fn classify(status: StatusCode, headers: &HeaderMap, message: &str) -> Failure {
    let retry_after = header_u64(headers, RETRY_AFTER.as_str()).map(Duration::from_secs);
    match status {
        StatusCode::FORBIDDEN | StatusCode::TOO_MANY_REQUESTS => {
            if header_u64(headers, "x-ratelimit-remaining") == Some(0) {
                let now = std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map_or(0, |d| d.as_secs());
                let reset = header_u64(headers, "x-ratelimit-reset")
                    .map(|r| Duration::from_secs(r.saturating_sub(now)));
                return Failure::Exhausted(retry_after.or(reset));
            }
            if status == StatusCode::TOO_MANY_REQUESTS
                || retry_after.is_some()
                || message.to_lowercase().contains("rate limit")
            {
                return Failure::Retry(retry_after);
            }
            Failure::Fatal(ProviderError::Auth(message.to_string()))
        }
        StatusCode::UNAUTHORIZED => Failure::Fatal(ProviderError::Auth(message.to_string())),
        StatusCode::NOT_FOUND => Failure::Fatal(ProviderError::NotFound(message.to_string())),
        StatusCode::UNPROCESSABLE_ENTITY => {
            Failure::Fatal(ProviderError::InvalidInput(message.to_string()))
        }
        _ => Failure::Fatal(ProviderError::Http {
            status: status.as_u16(),
            message: message.to_string(),
        }),
    }
}

fn provider_message(body: &[u8]) -> String {
    #[derive(Deserialize)]
    struct Msg {
        message: String,
    }
    serde_json::from_slice::<Msg>(body)
        .map(|m| m.message)
        .unwrap_or_else(|_| String::from_utf8_lossy(body).trim().to_string())
}

/// The `rel="next"` target of a Link header.
fn next_link(headers: &HeaderMap) -> Option<String> {
    let link = headers.get(LINK)?.to_str().ok()?;
    link.split(',').find_map(|part| {
        let (url, params) = part.split_once(';')?;
        let is_next = params
            .split(';')
            .any(|p| p.trim().replace(' ', "") == "rel=\"next\"");
        is_next.then(|| url.trim().trim_start_matches('<').trim_end_matches('>').to_string())
    })
}

fn encode_query(q: &str) -> String {
    let mut out = String::with_capacity(q.len());
    for b in q.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            b' ' => out.push('+'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[async_trait]
impl RepoProvider for GitHubClient {
    async fn list_bots(&self, coords: &RepoCoordinates) -> Result<BotHints, ProviderError> {
        let mut hints = BotHints::default();
        let mut url = Some(format!(
            "{}/repos/{}/{}/contributors?per_page={PER_PAGE}&anon=0",
            self.base_url, coords.owner, coords.name
        ));
        while let Some(current) = url.take() {
            let page = match self.get(&current).await {
                Ok(page) => page,
                Err(ProviderError::Offline(msg)) => {
                    warn!(repo = %coords.slug(), "provider offline, continuing without bot exclusion: {msg}");
                    return Ok(BotHints::default());
                }
                Err(ProviderError::NotFound(_)) => {
                    return Err(ProviderError::NotFound(coords.slug()));
                }
                Err(e) => return Err(e),
            };
            // An empty repository answers 204 with no body.
            if !page.body.is_empty() {
                let contributors: Vec<Contributor> = serde_json::from_slice(&page.body)
                    .map_err(|e| ProviderError::Decode(e.to_string()))?;
                for c in contributors {
                    if let (Some(login), Some("Bot")) = (c.login.as_deref(), c.kind.as_deref()) {
                        hints.add_login(login, c.id);
                    }
                }
            }
            url = page.next;
        }
        Ok(hints)
    }

    async fn search_repos(&self, query: &str, limit: usize) -> Result<Vec<RepoCoordinates>, ProviderError> {
        let query = validate_search(query, limit)?;
        let url = format!(
            "{}/search/repositories?q={}&per_page={limit}",
            self.base_url,
            encode_query(query)
        );
        let page = self.get(&url).await?;
        let resp: SearchResponse =
            serde_json::from_slice(&page.body).map_err(|e| ProviderError::Decode(e.to_string()))?;
        resp.items
            .into_iter()
            .take(limit)
            .map(|item| {
                let mut coords = RepoCoordinates::new(&item.owner.login, &item.name, item.clone_url)
                    .map_err(|e| ProviderError::Decode(e.to_string()))?;
                coords.default_branch = item.default_branch;
                Ok(coords)
            })
            .collect()
    }
}

/// In-memory provider for tests and offline runs.
#[derive(Debug, Default, Clone)]
pub struct FakeProvider {
    /// Bot hints keyed by `owner/name`; unknown repos have no bots.
    pub bots: HashMap<String, BotHints>,
    /// Repos `list_bots` reports as missing.
    pub missing: Vec<String>,
    pub repos: Vec<RepoCoordinates>,
    /// When set, every call fails with this error.
    pub failure: Option<ProviderError>,
}

impl FakeProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bot(mut self, slug: &str, login: &str, id: Option<u64>) -> Self {
        self.bots.entry(slug.to_string()).or_default().add_login(login, id);
        self
    }

    pub fn with_repo(mut self, coords: RepoCoordinates) -> Self {
        self.repos.push(coords);
        self
    }

    pub fn failing(mut self, err: ProviderError) -> Self {
        self.failure = Some(err);
        self
    }
}

#[async_trait]
impl RepoProvider for FakeProvider {
    async fn list_bots(&self, coords: &RepoCoordinates) -> Result<BotHints, ProviderError> {
        let slug = coords.slug();
        match &self.failure {
            Some(ProviderError::Offline(msg)) => {
                warn!(repo = %slug, "provider offline, continuing without bot exclusion: {msg}");
                return Ok(BotHints::default());
            }
            Some(err) => return Err(err.clone()),
            None => {}
        }
        if self.missing.contains(&slug) {
            return Err(ProviderError::NotFound(slug));
        }
        Ok(self.bots.get(&slug).cloned().unwrap_or_default())
    }

    async fn search_repos(&self, query: &str, limit: usize) -> Result<Vec<RepoCoordinates>, ProviderError> {
        let query = validate_search(query, limit)?.to_lowercase();
        if let Some(err) = &self.failure {
            return Err(err.clone());
        }
        Ok(self
            .repos
            .iter()
            .filter(|r| r.slug().to_lowercase().contains(&query))
            .take(limit)
            .cloned()
            .collect())
    }
}

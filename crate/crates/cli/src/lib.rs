//! Headless entry points: `analyze`, `simulate` and `bench`.

pub mod bench;
pub mod stats;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use busfactor_core::engine::{self, EngineError};
use busfactor_core::knowledge::KnowledgeMatrix;
use busfactor_core::miner::{self, MineError};
use busfactor_core::pipeline::{self, PipelineError, StageLog};
use busfactor_core::store::{ArtifactDir, StoreError, MATRIX_JSON, TREE_JSON};
use busfactor_core::{export, BotHints, BusFactor, RepoCoordinates, SimulationDelta};
use busfactor_github::{GitHubClient, ProviderError, RepoProvider};

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or unusable input paths (exit 2).
    Input(String),
    /// The input is valid but cannot be analyzed as asked (exit 3).
    Domain(String),
    /// Network or provider failure (exit 4).
    Network(String),
    /// Local i/o failure (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Network(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Domain(m) | CliError::Network(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<MineError> for CliError {
    fn from(e: MineError) -> Self {
        let msg = e.to_string();
        match e {
            MineError::NotARepository(_) => CliError::Input(msg),
            MineError::Network(_) | MineError::Auth(_) => CliError::Network(msg),
            _ => CliError::Domain(msg),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Mine(m) => m.into(),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Where the repository comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Local(PathBuf),
    Remote { url: String, owner: String, name: String },
}

/// Local directory, or a URL (`scheme://…` or `git@host:owner/name`).
pub fn parse_source(arg: &str) -> Result<Source, CliError> {
    let arg = arg.trim();
    if arg.is_empty() {
        return Err(CliError::Input("repository argument is empty".into()));
    }
    let remote_path = if let Some((_, rest)) = arg.split_once("://") {
        Some(rest.split_once('/').map_or("", |(_, p)| p))
    } else if let Some(rest) = arg.strip_prefix("git@") {
        Some(rest.split_once(':').map_or("", |(_, p)| p))
    } else {
        None
    };
    match remote_path {
        Some(path) => {
            let segments: Vec<&str> = path.trim_end_matches('/').split('/').filter(|s| !s.is_empty()).collect();
            let [.., owner, name] = segments.as_slice() else {
                return Err(CliError::Input(format!("cannot find owner/name in {arg}")));
            };
            Ok(Source::Remote {
                url: arg.to_string(),
                owner: owner.to_string(),
                name: name.trim_end_matches(".git").to_string(),
            })
        }
        None => {
            let path = PathBuf::from(arg);
            if !path.is_dir() {
                return Err(CliError::Input(format!("no such directory: {arg}")));
            }
            Ok(Source::Local(path))
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub source: Source,
    pub out: PathBuf,
    pub window_days: u32,
    pub owner: Option<String>,
    pub name: Option<String>,
    /// Skip the provider bot lookup.
    pub no_bots: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzeOutcome {
    pub owner: String,
    pub name: String,
    pub bus_factor: BusFactor,
    pub bots: BTreeSet<String>,
}

fn fetch_bots(coords: &RepoCoordinates, log: &mut dyn StageLog) -> Result<BotHints, CliError> {
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let client = GitHubClient::from_env();
    match runtime.block_on(client.list_bots(coords)) {
        Ok(hints) => {
            log.line(&format!("provider reports {} bot account(s)", hints.logins.len()));
            Ok(hints)
        }
        Err(e @ ProviderError::NotFound(_)) => Err(CliError::Domain(e.to_string())),
        Err(e) => {
            log.line(&format!("warning: bot list unavailable ({e}); continuing without bot exclusion"));
            Ok(BotHints::default())
        }
    }
}

/// Runs the full pipeline and publishes the artifacts into `opts.out`.
pub fn analyze(opts: &AnalyzeOptions, log: &mut dyn StageLog) -> Result<AnalyzeOutcome, CliError> {
    fs::create_dir_all(&opts.out).map_err(|e| CliError::Io(format!("{}: {e}", opts.out.display())))?;
    let dir = ArtifactDir::new(&opts.out);
    dir.recover()?;

    let (handle, owner, name, remote) = match &opts.source {
        Source::Local(path) => {
            let handle = miner::open(path)?;
            let base = fs::canonicalize(path)
                .ok()
                .and_then(|p| p.file_name().map(|n| n.to_string_lossy().to_string()))
                .unwrap_or_else(|| "repo".into());
            (handle, "local".to_string(), base, None)
        }
        Source::Remote { url, owner, name } => {
            log.line(&format!("cloning {url}"));
            let handle = miner::clone_or_open(&dir.clone_dir(), url)?;
            (handle, owner.clone(), name.clone(), Some(url.clone()))
        }
    };
    let owner = opts.owner.clone().unwrap_or(owner);
    let name = opts.name.clone().unwrap_or(name);
    let coords = RepoCoordinates::new(&owner, &name, remote.clone().unwrap_or_default())
        .map_err(|e| CliError::Input(e.to_string()))?;

    let hints = match remote {
        Some(url) if !opts.no_bots && url.contains("github.com") => fetch_bots(&coords, log)?,
        _ => BotHints::default(),
    };
    let analysis = pipeline::analyze(&handle, &owner, &name, opts.window_days, &hints, log)?;
    dir.publish(&analysis.artifacts)?;
    log.line(&format!("artifacts written to {}", opts.out.display()));
    Ok(AnalyzeOutcome {
        owner,
        name,
        bus_factor: analysis.tree.root.bus_factor,
        bots: analysis.bots,
    })
}

/// Splits a comma-separated author list; blanks are ignored.
pub fn parse_exclude(raw: &str) -> BTreeSet<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Simulation over a published artifact directory.
pub fn simulate(dir: &Path, excluded: &BTreeSet<String>) -> Result<Vec<SimulationDelta>, CliError> {
    let artifacts = ArtifactDir::new(dir);
    if !dir.is_dir() {
        return Err(CliError::Input(format!("no such directory: {}", dir.display())));
    }
    artifacts.recover()?;
    artifacts
        .verify()
        .map_err(|e| CliError::Input(format!("{} holds no complete analysis: {e}", dir.display())))?;
    let matrix: KnowledgeMatrix<f64> = serde_json::from_slice(&artifacts.read(MATRIX_JSON)?)
        .map_err(|e| CliError::Domain(format!("{MATRIX_JSON}: {e}")))?;
    let tree = export::from_json(&artifacts.read(TREE_JSON)?)
        .map_err(|e| CliError::Domain(format!("{TREE_JSON}: {e}")))?;
    engine::simulate(&matrix, &tree, excluded)
        .map_err(|EngineError::UnknownAuthors(unknown)| CliError::Domain(format!("unknown authors: {}", unknown.join(", "))))
}

/// `path,original_bf,simulated_bf,delta`; a bus factor that does not apply is empty.
pub fn deltas_csv(deltas: &[SimulationDelta]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let bf = |b: BusFactor| b.value().map(|v| v.to_string()).unwrap_or_default();
    w.write_record(["path", "original_bf", "simulated_bf", "delta"]).expect("in-memory write");
    for d in deltas {
        w.write_record([d.path.clone(), bf(d.original_bf), bf(d.simulated_bf), d.delta.to_string()])
            .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

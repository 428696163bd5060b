//! End-to-end analysis of one repository.

use std::collections::BTreeSet;
use std::time::Instant;

use thiserror::Error;

use crate::bots::BotHints;
use crate::engine::Engine;
use crate::export;
use crate::knowledge::KnowledgeMatrix;
use crate::miner::{self, MineError, MiningResult, RepoHandle};
use crate::store::{ArtifactMeta, ArtifactSet};
use crate::tree::{RepoTree, TreeError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Everything one analysis produces.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub matrix: KnowledgeMatrix<f64>,
    pub tree: RepoTree<f64>,
    pub bots: BTreeSet<String>,
    pub artifacts: ArtifactSet,
}

/// Receives one human-readable line per pipeline stage.
pub trait StageLog {
    fn line(&mut self, text: &str);
}

impl<F: FnMut(&str)> StageLog for F {
    fn line(&mut self, text: &str) {
        self(text)
    }
}

fn timed<T, E>(log: &mut dyn StageLog, stage: &str, f: impl FnOnce() -> Result<T, E>) -> Result<T, E> {
    let start = Instant::now();
    let out = f();
    let status = if out.is_ok() { "done" } else { "failed" };
    log.line(&format!("{stage} {status} in {} ms", start.elapsed().as_millis()));
    out
}

/// Mines `handle` and builds the artifacts. Clone/fetch is the caller's job.
pub fn analyze(
    handle: &RepoHandle,
    owner: &str,
    name: &str,
    window_days: u32,
    bot_hints: &BotHints,
    log: &mut dyn StageLog,
) -> Result<Analysis, PipelineError> {
    let mining = mine(handle, window_days, log)?;
    analyze_mining(&mining, owner, name, window_days, bot_hints, log)
}

/// The mining stage alone, logged like the others.
pub fn mine(handle: &RepoHandle, window_days: u32, log: &mut dyn StageLog) -> Result<MiningResult, MineError> {
    let mining = timed(log, "mine", || miner::mine(handle, window_days))?;
    log.line(&format!(
        "scanned {} commits, {} in window, {} events, {} files at head",
        mining.commit_count_scanned,
        mining.commit_count_in_window,
        mining.events.len(),
        mining.files.len()
    ));
    Ok(mining)
}

/// The offline part of [`analyze`], starting from a mining result.
pub fn analyze_mining(
    mining: &MiningResult,
    owner: &str,
    name: &str,
    window_days: u32,
    bot_hints: &BotHints,
    log: &mut dyn StageLog,
) -> Result<Analysis, PipelineError> {
    let authors: BTreeSet<&str> = mining.events.iter().map(|e| e.author_id.as_str()).collect();
    let bots = bot_hints.resolve(authors);
    if !bots.is_empty() {
        log.line(&format!(
            "excluding {} bot author(s): {}",
            bots.len(),
            bots.iter().cloned().collect::<Vec<_>>().join(", ")
        ));
    }

    let matrix = timed(log, "build_matrix", || {
        Ok::<_, PipelineError>(KnowledgeMatrix::<f64>::build(mining, &bots))
    })?;
    let skeleton = timed(log, "build_tree", || RepoTree::<f64>::from_head_files(&mining.files))?;
    let tree = timed(log, "enrich", || {
        Ok::<_, PipelineError>(skeleton.enrich(&Engine::new(&matrix)))
    })?;
    let artifacts = timed(log, "export", || {
        Ok::<_, PipelineError>(
            ArtifactSet {
                tree_json: export::to_json(&tree),
                tree_csv: export::to_csv(&tree),
                matrix_json: serde_json::to_vec(&matrix).expect("matrix serializes"),
                meta: ArtifactMeta {
                    owner: owner.to_string(),
                    name: name.to_string(),
                    root_bus_factor: tree.root.bus_factor.value(),
                    reference_time: mining.reference_time,
                    window_days,
                    commits_scanned: mining.commit_count_scanned,
                    commits_in_window: mining.commit_count_in_window,
                    node_count: tree.node_count(),
                    sha256: Default::default(),
                },
            }
            .seal(),
        )
    })?;
    log.line(&format!("root bus factor: {}", tree.root.bus_factor));
    Ok(Analysis {
        matrix,
        tree,
        bots,
        artifacts,
    })
}

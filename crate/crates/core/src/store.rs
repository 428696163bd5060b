//! On-disk artifact store.
//!
//! Layout per repository: `{root}/{owner}__{name}/` holding `clone/`,
//! `tree.json`, `tree.csv`, `matrix.json`, `meta.json` and `job.log`.
//!
//! A publish stages the complete artifact set in `.staging/`, then writes the
//! `.publish` journal, then renames the staged files into place with
//! `meta.json` last. [`ArtifactDir::recover`] rolls a journaled publish
//! forward and discards an unjournaled staging area, so after recovery the
//! directory holds either no artifacts or one complete set whose hashes match
//! `meta.json`.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::warn;

use crate::coords::RepoCoordinates;

pub const TREE_JSON: &str = "tree.json";
pub const TREE_CSV: &str = "tree.csv";
pub const MATRIX_JSON: &str = "matrix.json";
pub const META_JSON: &str = "meta.json";
pub const JOB_LOG: &str = "job.log";
pub const CLONE_DIR: &str = "clone";
const STAGING_DIR: &str = ".staging";
const JOURNAL: &str = ".publish";
/// Artifacts in publish order; `meta.json` commits the set.
pub const ARTIFACTS: [&str; 4] = [TREE_JSON, TREE_CSV, MATRIX_JSON, META_JSON];

/// Fault-injection knob: milliseconds to sleep between publish steps.
pub const PUBLISH_DELAY_ENV: &str = "BF_FAULT_PUBLISH_DELAY_MS";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt metadata in {0}: {1}")]
    Meta(PathBuf, serde_json::Error),
    #[error("artifact {0} is missing or does not match meta.json")]
    Incomplete(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Summary persisted next to the artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ArtifactMeta {
    pub owner: String,
    pub name: String,
    pub root_bus_factor: Option<u32>,
    pub reference_time: i64,
    pub window_days: u32,
    pub commits_scanned: usize,
    pub commits_in_window: usize,
    pub node_count: usize,
    /// SHA-256 of tree.json, tree.csv and matrix.json.
    pub sha256: std::collections::BTreeMap<String, String>,
}

/// Serialized artifacts ready to publish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactSet {
    pub tree_json: Vec<u8>,
    pub tree_csv: Vec<u8>,
    pub matrix_json: Vec<u8>,
    pub meta: ArtifactMeta,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ArtifactSet {
    /// Fills `meta.sha256` from the payloads.
    pub fn seal(mut self) -> Self {
        self.meta.sha256 = [
            (TREE_JSON, &self.tree_json),
            (TREE_CSV, &self.tree_csv),
            (MATRIX_JSON, &self.matrix_json),
        ]
        .into_iter()
        .map(|(name, bytes)| (name.to_string(), sha256_hex(bytes)))
        .collect();
        self
    }

    fn meta_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(&self.meta).expect("meta serializes");
        bytes.push(b'\n');
        bytes
    }

    fn payload(&self, name: &str) -> Vec<u8> {
        match name {
            TREE_JSON => self.tree_json.clone(),
            TREE_CSV => self.tree_csv.clone(),
            MATRIX_JSON => self.matrix_json.clone(),
            META_JSON => self.meta_bytes(),
            other => unreachable!("unknown artifact {other}"),
        }
    }
}

/// One repository's artifact directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactDir {
    path: PathBuf,
}

fn fault_delay() {
    if let Some(ms) = std::env::var(PUBLISH_DELAY_ENV)
        .ok()
        .and_then(|v| v.parse::<u64>().ok())
    {
        std::thread::sleep(Duration::from_millis(ms));
    }
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut file = File::create(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))?;
    file.sync_all().map_err(io_err(path))
}

fn sync_dir(path: &Path) {
    if let Ok(dir) = File::open(path) {
        let _ = dir.sync_all();
    }
}

impl ArtifactDir {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn clone_dir(&self) -> PathBuf {
        self.path.join(CLONE_DIR)
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Atomically replaces the artifact set.
    pub fn publish(&self, set: &ArtifactSet) -> Result<(), StoreError> {
        self.recover()?;
        let staging = self.path.join(STAGING_DIR);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        fs::create_dir_all(&staging).map_err(io_err(&staging))?;
        for name in ARTIFACTS {
            write_synced(&staging.join(name), &set.payload(name))?;
            fault_delay();
        }
        sync_dir(&staging);

        let journal = self.path.join(JOURNAL);
        let journal_tmp = self.path.join(".publish.tmp");
        write_synced(&journal_tmp, ARTIFACTS.join("\n").as_bytes())?;
        fs::rename(&journal_tmp, &journal).map_err(io_err(&journal))?;
        sync_dir(&self.path);
        fault_delay();

        self.roll_forward()
    }

    fn roll_forward(&self) -> Result<(), StoreError> {
        let staging = self.path.join(STAGING_DIR);
        for name in ARTIFACTS {
            let staged = staging.join(name);
            if staged.exists() {
                let target = self.path.join(name);
                fs::rename(&staged, &target).map_err(io_err(&target))?;
                fault_delay();
            }
        }
        sync_dir(&self.path);
        let journal = self.path.join(JOURNAL);
        fs::remove_file(&journal).map_err(io_err(&journal))?;
        let _ = fs::remove_dir_all(&staging);
        sync_dir(&self.path);
        Ok(())
    }

    /// Completes or discards an interrupted publish.
    pub fn recover(&self) -> Result<(), StoreError> {
        if self.path.join(JOURNAL).exists() {
            warn!(dir = %self.path.display(), "completing interrupted publish");
            return self.roll_forward();
        }
        let _ = fs::remove_file(self.path.join(".publish.tmp"));
        let staging = self.path.join(STAGING_DIR);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
        }
        Ok(())
    }

    /// Metadata of the published set, or `None` when nothing is published.
    pub fn meta(&self) -> Result<Option<ArtifactMeta>, StoreError> {
        let path = self.path.join(META_JSON);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| StoreError::Meta(path, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    pub fn read(&self, name: &str) -> Result<Vec<u8>, StoreError> {
        let path = self.path.join(name);
        fs::read(&path).map_err(io_err(&path))
    }

    /// Checks that every artifact exists and matches the hashes in meta.json.
    pub fn verify(&self) -> Result<ArtifactMeta, StoreError> {
        let meta = self
            .meta()?
            .ok_or_else(|| StoreError::Incomplete(self.path.join(META_JSON)))?;
        for name in [TREE_JSON, TREE_CSV, MATRIX_JSON] {
            let path = self.path.join(name);
            let bytes = fs::read(&path).map_err(|_| StoreError::Incomplete(path.clone()))?;
            if meta.sha256.get(name) != Some(&sha256_hex(&bytes)) {
                return Err(StoreError::Incomplete(path));
            }
        }
        Ok(meta)
    }

    /// Whether no artifact file is present.
    pub fn is_empty(&self) -> bool {
        ARTIFACTS.iter().all(|name| !self.path.join(name).exists())
    }

    pub fn append_log(&self, line: &str) -> Result<(), StoreError> {
        fs::create_dir_all(&self.path).map_err(io_err(&self.path))?;
        let path = self.path.join(JOB_LOG);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        writeln!(file, "{line}").map_err(io_err(&path))
    }

    pub fn reset_log(&self) -> Result<(), StoreError> {
        let path = self.path.join(JOB_LOG);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(io_err(&path)(e)),
            _ => Ok(()),
        }
    }
}

/// Root of the artifact store.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    /// Opens the store, recovering any interrupted publishes.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let store = Self { root: root.into() };
        fs::create_dir_all(&store.root).map_err(io_err(&store.root))?;
        for dir in store.repo_dirs()? {
            if let Err(e) = dir.recover() {
                warn!(dir = %dir.path().display(), error = %e, "recovery failed");
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn repo(&self, coords: &RepoCoordinates) -> ArtifactDir {
        self.repo_by_name(&coords.owner, &coords.name)
    }

    pub fn repo_by_name(&self, owner: &str, name: &str) -> ArtifactDir {
        ArtifactDir::new(self.root.join(format!("{owner}__{name}")))
    }

    fn repo_dirs(&self) -> Result<Vec<ArtifactDir>, StoreError> {
        let mut dirs: Vec<ArtifactDir> = fs::read_dir(&self.root)
            .map_err(io_err(&self.root))?
            .filter_map(Result::ok)
            .filter(|e| e.path().is_dir() && e.file_name().to_string_lossy().contains("__"))
            .map(|e| ArtifactDir::new(e.path()))
            .collect();
        dirs.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(dirs)
    }

    /// Every repository with a complete published artifact set.
    pub fn list(&self) -> Result<Vec<ArtifactMeta>, StoreError> {
        Ok(self
            .repo_dirs()?
            .into_iter()
            .filter_map(|dir| dir.verify().ok())
            .collect())
    }
}

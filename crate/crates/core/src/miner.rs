//! Main-branch history mining through the `git` command line.
//!
//! A single `git log` invocation streams every non-merge commit of the
//! selected branch together with its name-status diff against the first
//! parent (root commits against the empty tree). Rename detection is on, and
//! renamed paths are re-keyed so that older events follow the file to its
//! current name.

use std::collections::HashMap;
use std::ffi::OsStr;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, info};

/// Default active window: 1.5 years of 365.25 days, rounded.
pub const DEFAULT_WINDOW_DAYS: u32 = 548;
pub const SECONDS_PER_DAY: i64 = 86_400;
/// Author id used when a commit carries neither name nor email.
pub const UNKNOWN_AUTHOR: &str = "unknown";

#[derive(Debug, Error)]
pub enum MineError {
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("not a git repository: {0}")]
    NotARepository(String),
    #[error("no commits")]
    NoCommits,
    #[error("cannot resolve main branch; candidates: [{}]", .candidates.join(", "))]
    BranchNotFound { candidates: Vec<String> },
    #[error("git {command} failed: {message}")]
    Git { command: String, message: String },
    #[error("unexpected git output: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl MineError {
    /// Network failures may succeed on a later attempt; everything else is terminal.
    pub fn is_retryable(&self) -> bool {
        matches!(self, MineError::Network(_))
    }
}

/// One (commit, file, author) change record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributionEvent {
    pub author_id: String,
    pub path: String,
    pub commit_id: String,
    pub timestamp_utc: i64,
}

/// A blob present at the head of the mined branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadFile {
    pub path: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningResult {
    pub events: Vec<ContributionEvent>,
    pub reference_time: i64,
    pub files: Vec<HeadFile>,
    pub commit_count_scanned: usize,
    pub commit_count_in_window: usize,
}

/// A local repository ready to be mined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoHandle {
    path: PathBuf,
}

impl RepoHandle {
    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Canonical author key: trimmed lowercase email, else trimmed lowercase name.
pub fn canonical_author(name: &str, email: &str) -> String {
    let email = email.trim();
    if !email.is_empty() {
        return email.to_lowercase();
    }
    let name = name.trim();
    if !name.is_empty() {
        return name.to_lowercase();
    }
    UNKNOWN_AUTHOR.to_string()
}

fn git<I, S>(dir: Option<&Path>, args: I) -> std::io::Result<Output>
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    let mut cmd = Command::new("git");
    if let Some(dir) = dir {
        cmd.arg("-C").arg(dir);
    }
    cmd.args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .env("LC_ALL", "C")
        .output()
}

fn git_checked<I, S>(dir: &Path, args: I) -> Result<Vec<u8>, MineError>
where
    I: IntoIterator<Item = S> + Clone,
    S: AsRef<OsStr>,
{
    let out = git(Some(dir), args.clone())?;
    if out.status.success() {
        return Ok(out.stdout);
    }
    let command = args
        .into_iter()
        .next()
        .map(|a| a.as_ref().to_string_lossy().into_owned())
        .unwrap_or_default();
    Err(classify_failure(&command, &String::from_utf8_lossy(&out.stderr)))
}

/// Maps git's stderr onto the error taxonomy.
fn classify_failure(command: &str, stderr: &str) -> MineError {
    let message = stderr.trim().to_string();
    let lower = message.to_lowercase();
    const NETWORK: &[&str] = &[
        "could not resolve host",
        "connection refused",
        "connection timed out",
        "network is unreachable",
        "failed to connect",
        "operation timed out",
        "unable to access",
        "couldn't connect",
        "the remote end hung up",
        "early eof",
    ];
    const AUTH: &[&str] = &[
        "authentication failed",
        "could not read username",
        "could not read password",
        "permission denied",
        "403",
    ];
    const NOT_REPO: &[&str] = &[
        "not a git repository",
        "does not appear to be a git repository",
        "repository not found",
        "does not exist",
    ];
    if AUTH.iter().any(|p| lower.contains(p)) {
        MineError::Auth(message)
    } else if NOT_REPO.iter().any(|p| lower.contains(p)) {
        MineError::NotARepository(message)
    } else if NETWORK.iter().any(|p| lower.contains(p)) {
        MineError::Network(message)
    } else {
        MineError::Git {
            command: command.to_string(),
            message,
        }
    }
}

/// Opens an existing local repository (working tree or bare).
pub fn open(path: &Path) -> Result<RepoHandle, MineError> {
    if !path.is_dir() {
        return Err(MineError::NotARepository(format!(
            "{} is not a directory",
            path.display()
        )));
    }
    let out = git(Some(path), ["rev-parse", "--git-dir"])?;
    if !out.status.success() {
        return Err(MineError::NotARepository(path.display().to_string()));
    }
    Ok(RepoHandle {
        path: path.to_path_buf(),
    })
}

/// Clones `repo_url` into `clone_dir`, or fetches updates when a clone of the
/// same URL is already there.
pub fn clone_or_open(clone_dir: &Path, repo_url: &str) -> Result<RepoHandle, MineError> {
    if clone_dir.join(".git").exists() || clone_dir.join("HEAD").is_file() {
        let handle = open(clone_dir)?;
        let origin = git_checked(clone_dir, ["remote", "get-url", "origin"])?;
        let origin = String::from_utf8_lossy(&origin).trim().to_string();
        if origin != repo_url {
            return Err(MineError::NotARepository(format!(
                "{} holds a clone of {origin}, not {repo_url}",
                clone_dir.display()
            )));
        }
        info!(dir = %clone_dir.display(), "fetching updates");
        git_checked(clone_dir, ["fetch", "--prune", "--quiet", "origin"])?;
        // Refreshing origin/HEAD is best effort; stale is acceptable.
        let _ = git(Some(clone_dir), ["remote", "set-head", "origin", "--auto"]);
        return Ok(handle);
    }

    if clone_dir.exists() && fs::read_dir(clone_dir)?.next().is_some() {
        return Err(MineError::NotARepository(format!(
            "{} exists and is not a clone",
            clone_dir.display()
        )));
    }
    if let Some(parent) = clone_dir.parent() {
        fs::create_dir_all(parent)?;
    }
    info!(url = repo_url, dir = %clone_dir.display(), "cloning");
    let out = git(
        None,
        [
            OsStr::new("clone"),
            OsStr::new("--no-checkout"),
            OsStr::new("--quiet"),
            OsStr::new(repo_url),
            clone_dir.as_os_str(),
        ],
    )?;
    if !out.status.success() {
        let _ = fs::remove_dir_all(clone_dir);
        return Err(classify_failure(
            "clone",
            &String::from_utf8_lossy(&out.stderr),
        ));
    }
    Ok(RepoHandle {
        path: clone_dir.to_path_buf(),
    })
}

/// Resolves the branch to mine: the remote HEAD, else `main`, else `master`.
pub fn resolve_branch(handle: &RepoHandle) -> Result<String, MineError> {
    let refs = git_checked(
        &handle.path,
        ["for-each-ref", "--format=%(refname)", "refs/heads", "refs/remotes"],
    )?;
    let refs: Vec<String> = String::from_utf8_lossy(&refs)
        .lines()
        .map(str::to_string)
        .collect();
    if refs.is_empty() {
        return Err(MineError::NoCommits);
    }

    let remote_head = git(
        Some(&handle.path),
        ["symbolic-ref", "--quiet", "refs/remotes/origin/HEAD"],
    )?;
    if remote_head.status.success() {
        let target = String::from_utf8_lossy(&remote_head.stdout).trim().to_string();
        if refs.contains(&target) {
            return Ok(target);
        }
    }
    for preferred in [
        "refs/heads/main",
        "refs/remotes/origin/main",
        "refs/heads/master",
        "refs/remotes/origin/master",
    ] {
        if refs.iter().any(|r| r == preferred) {
            return Ok(preferred.to_string());
        }
    }
    Err(MineError::BranchNotFound {
        candidates: refs
            .into_iter()
            .filter(|r| !r.ends_with("/HEAD"))
            .collect(),
    })
}

struct RawCommit {
    id: String,
    timestamp: i64,
    author_id: String,
    changes: Vec<Change>,
}

enum Change {
    Touch(String),
    Rename { from: String, to: String },
}

impl Change {
    fn path(&self) -> &str {
        match self {
            Change::Touch(p) => p,
            Change::Rename { to, .. } => to,
        }
    }
}

fn parse_log(raw: &[u8]) -> Result<Vec<RawCommit>, MineError> {
    let mut commits = Vec::new();
    for record in raw.split(|b| *b == 0x1e).filter(|r| !r.is_empty()) {
        let mut tokens = record.split(|b| *b == 0);
        let mut header = |field: &str| {
            tokens
                .next()
                .map(|t| String::from_utf8_lossy(t).into_owned())
                .ok_or_else(|| MineError::Parse(format!("missing {field} in log record")))
        };
        let id = header("commit id")?;
        let timestamp = header("author time")?;
        let name = header("author name")?;
        let email = header("author email")?;
        let timestamp: i64 = timestamp
            .trim()
            .parse()
            .map_err(|_| MineError::Parse(format!("bad author time for {id}")))?;

        let mut rest = tokens
            .map(|t| t.strip_prefix(b"\n").unwrap_or(t))
            .filter(|t| !t.is_empty());
        let mut changes = Vec::new();
        while let Some(status) = rest.next() {
            let mut path = || {
                rest.next()
                    .map(|p| String::from_utf8_lossy(p).into_owned())
                    .ok_or_else(|| MineError::Parse(format!("truncated diff in {id}")))
            };
            match status.first() {
                Some(b'R') => {
                    let from = path()?;
                    let to = path()?;
                    changes.push(Change::Rename { from, to });
                }
                Some(b'C') => {
                    let _source = path()?;
                    changes.push(Change::Touch(path()?));
                }
                Some(_) => changes.push(Change::Touch(path()?)),
                None => {}
            }
        }
        changes.sort_by(|a, b| a.path().cmp(b.path()));
        commits.push(RawCommit {
            id,
            timestamp,
            author_id: canonical_author(&name, &email),
            changes,
        });
    }
    Ok(commits)
}

fn parse_ls_tree(raw: &[u8]) -> Result<Vec<HeadFile>, MineError> {
    let mut files = Vec::new();
    for entry in raw.split(|b| *b == 0).filter(|e| !e.is_empty()) {
        let entry = String::from_utf8_lossy(entry);
        let (meta, path) = entry
            .split_once('\t')
            .ok_or_else(|| MineError::Parse(format!("bad ls-tree entry: {entry}")))?;
        let mut fields = meta.split_whitespace();
        let _mode = fields.next();
        let kind = fields.next();
        let _oid = fields.next();
        let size = fields.next();
        if kind != Some("blob") {
            continue;
        }
        let bytes = size
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| MineError::Parse(format!("bad blob size: {entry}")))?;
        files.push(HeadFile {
            path: path.to_string(),
            bytes,
        });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(files)
}

/// Mines the main branch for contribution events inside the active window.
pub fn mine(handle: &RepoHandle, window_days: u32) -> Result<MiningResult, MineError> {
    let branch = resolve_branch(handle)?;
    debug!(branch = %branch, "mining");
    let dir = handle.path.as_path();

    let head_time = git_checked(dir, ["log", "-1", "--format=%at", branch.as_str()])?;
    let head_time: i64 = String::from_utf8_lossy(&head_time)
        .trim()
        .parse()
        .map_err(|_| MineError::NoCommits)?;

    let log = git_checked(
        dir,
        [
            "-c",
            "core.quotePath=false",
            "log",
            "--topo-order",
            "--no-merges",
            "--root",
            "-M",
            "--name-status",
            "-z",
            "--format=%x1e%H%x00%at%x00%an%x00%ae%x00",
            branch.as_str(),
            "--",
        ],
    )?;
    let commits = parse_log(&log)?;

    let tree = git_checked(dir, ["ls-tree", "-r", "-l", "-z", branch.as_str()])?;
    let files = parse_ls_tree(&tree)?;

    let reference_time = commits
        .iter()
        .map(|c| c.timestamp)
        .fold(head_time, i64::max);
    let window_start = reference_time - i64::from(window_days) * SECONDS_PER_DAY;

    // Newest-first walk: a rename seen here re-keys everything older.
    let mut current_name: HashMap<String, String> = HashMap::new();
    let mut events = Vec::new();
    let mut in_window = 0;
    for commit in &commits {
        let counted = commit.timestamp >= window_start;
        if counted {
            in_window += 1;
        }
        for change in &commit.changes {
            if counted {
                let path = change.path();
                let key = current_name.get(path).cloned().unwrap_or_else(|| path.to_string());
                events.push(ContributionEvent {
                    author_id: commit.author_id.clone(),
                    path: key,
                    commit_id: commit.id.clone(),
                    timestamp_utc: commit.timestamp,
                });
            }
        }
        for change in &commit.changes {
            if let Change::Rename { from, to } = change {
                let target = current_name.get(to).cloned().unwrap_or_else(|| to.clone());
                current_name.insert(from.clone(), target);
            }
        }
    }

    info!(
        commits = commits.len(),
        in_window,
        events = events.len(),
        files = files.len(),
        "mined history"
    );
    Ok(MiningResult {
        events,
        reference_time,
        files,
        commit_count_scanned: commits.len(),
        commit_count_in_window: in_window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_author_rules() {
        assert_eq!(canonical_author("Ada L", "Ada@Example.COM"), "ada@example.com");
        assert_eq!(canonical_author("Ada L", ""), "ada l");
        assert_eq!(canonical_author("  Ada L ", "   "), "ada l");
        assert_eq!(canonical_author("", ""), "unknown");
    }

    #[test]
    fn parses_rename_and_modify_records() {
        let raw = b"\x1eabc\x001700000000\x00A\x00a@x\x00\x00\nM\x00b c\x00R100\x00a\x00d\x00\
\x1edef\x001600000000\x00B\x00\x00\x00\nA\x00a\x00A\x00b c\x00";
        let commits = parse_log(raw).unwrap();
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[0].id, "abc");
        assert_eq!(commits[0].author_id, "a@x");
        assert_eq!(commits[0].changes.len(), 2);
        assert_eq!(commits[0].changes[0].path(), "b c");
        assert!(matches!(&commits[0].changes[1], Change::Rename { from, to } if from == "a" && to == "d"));
        assert_eq!(commits[1].author_id, "b");
        assert_eq!(commits[1].timestamp, 1_600_000_000);
    }

    #[test]
    fn parses_ls_tree_skipping_submodules() {
        let raw = b"100644 blob 0123 8\tb c\x00160000 commit 4567       -\tsub\x00100644 blob 89ab 3\ta\x00";
        let files = parse_ls_tree(raw).unwrap();
        assert_eq!(
            files,
            vec![
                HeadFile { path: "a".into(), bytes: 3 },
                HeadFile { path: "b c".into(), bytes: 8 },
            ]
        );
    }

    #[test]
    fn classifies_git_failures() {
        assert!(classify_failure("clone", "fatal: unable to access 'https://nope/': Could not resolve host: nope")
            .is_retryable());
        assert!(matches!(
            classify_failure("clone", "fatal: Authentication failed for 'https://x'"),
            MineError::Auth(_)
        ));
        assert!(matches!(
            classify_failure("clone", "fatal: repository '/tmp/x' does not exist"),
            MineError::NotARepository(_)
        ));
    }
}

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::process::Command;

use busfactor_core::fixtures::{self, FIXTURE_TIME};
use busfactor_core::knowledge::KnowledgeMatrix;
use busfactor_core::miner::{self, MineError, DEFAULT_WINDOW_DAYS, SECONDS_PER_DAY};
use busfactor_core::synth::{FileOp, HistoryBuilder, Signature};
use busfactor_core::FileStatus;

fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git").arg("-C").arg(dir).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn single_commit_two_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut h = HistoryBuilder::new();
    h.commit(
        "main",
        &Signature::new("X", "x@example.com", 1_000_000),
        &[],
        "one",
        &[FileOp::write("a", "1"), FileOp::write("b", "22")],
    );
    h.import(tmp.path(), "main").unwrap();

    let handle = miner::open(tmp.path()).unwrap();
    let result = miner::mine(&handle, DEFAULT_WINDOW_DAYS).unwrap();
    assert_eq!(result.events.len(), 2);
    assert_eq!(result.reference_time, 1_000_000);
    assert_eq!(result.events[0].path, "a");
    assert_eq!(result.events[1].path, "b");
    assert!(result.events.iter().all(|e| e.author_id == "x@example.com"));
    assert_eq!(result.files.iter().map(|f| f.bytes).collect::<Vec<_>>(), [1, 2]);
    assert_eq!(result.commit_count_scanned, 1);
}

#[test]
fn merge_commits_contribute_no_events() {
    let tmp = tempfile::tempdir().unwrap();
    fixtures::merge_only(tmp.path()).unwrap();
    let result = miner::mine(&miner::open(tmp.path()).unwrap(), DEFAULT_WINDOW_DAYS).unwrap();

    // Oracle: per-file changes of every non-merge commit against its first parent.
    let revs = git(tmp.path(), &["rev-list", "--no-merges", "main"]);
    let expected: usize = revs
        .lines()
        .map(|rev| {
            git(tmp.path(), &["diff-tree", "--root", "--no-commit-id", "-r", "-M", "--name-only", rev])
                .lines()
                .count()
        })
        .sum();
    assert_eq!(expected, 4);
    assert_eq!(result.events.len(), expected);
    assert!(result.events.iter().all(|e| e.path != "z"));
    assert_eq!(result.commit_count_scanned, 3);
}

#[test]
fn only_head_commit_inside_window() {
    let tmp = tempfile::tempdir().unwrap();
    fixtures::stale_files(tmp.path()).unwrap();
    let result = miner::mine(&miner::open(tmp.path()).unwrap(), DEFAULT_WINDOW_DAYS).unwrap();
    assert_eq!(result.events.len(), 1);
    assert_eq!(result.events[0].path, "app.py");
    assert_eq!(result.files.len(), 3);
    assert_eq!(result.commit_count_in_window, 1);
    assert_eq!(result.commit_count_scanned, 2);

    let m = KnowledgeMatrix::<f64>::build(&result, &BTreeSet::new());
    assert_eq!(m.status("legacy/old.c"), Some(FileStatus::Inactive));
    assert_eq!(m.status("app.py"), Some(FileStatus::Active));
}

#[test]
fn window_bounds_every_event() {
    let tmp = tempfile::tempdir().unwrap();
    fixtures::mixed(tmp.path()).unwrap();
    let handle = miner::open(tmp.path()).unwrap();
    for window in [1u32, 100, 250, 548, 1000] {
        let result = miner::mine(&handle, window).unwrap();
        for e in &result.events {
            assert!(e.timestamp_utc <= result.reference_time);
            assert!(result.reference_time - e.timestamp_utc <= i64::from(window) * SECONDS_PER_DAY);
        }
    }
}

#[test]
fn renames_rekey_older_events() {
    let tmp = tempfile::tempdir().unwrap();
    fixtures::mixed(tmp.path()).unwrap();
    let result = miner::mine(&miner::open(tmp.path()).unwrap(), DEFAULT_WINDOW_DAYS).unwrap();
    assert!(result.events.iter().all(|e| e.path != "lib/util.rs"));
    let helpers: Vec<_> = result
        .events
        .iter()
        .filter(|e| e.path == "lib/helpers.rs")
        .map(|e| (e.author_id.as_str(), (FIXTURE_TIME - e.timestamp_utc) / SECONDS_PER_DAY))
        .collect();
    // bob's edit (90d), bob's rename (200d), alice's pre-rename edit (300d).
    assert_eq!(
        helpers,
        [("bob@example.com", 90), ("bob@example.com", 200), ("alice@example.com", 300)]
    );
    // The 700-day-old commit is outside the window.
    assert!(result.events.iter().all(|e| FIXTURE_TIME - e.timestamp_utc <= 548 * SECONDS_PER_DAY));
    // Carol's email is normalized.
    assert!(result.events.iter().any(|e| e.author_id == "carol@example.com"));
}

#[test]
fn mining_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    fixtures::mixed(tmp.path()).unwrap();
    let handle = miner::open(tmp.path()).unwrap();
    let a = miner::mine(&handle, DEFAULT_WINDOW_DAYS).unwrap();
    let b = miner::mine(&handle, DEFAULT_WINDOW_DAYS).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_repository_has_no_commits() {
    let tmp = tempfile::tempdir().unwrap();
    git(tmp.path(), &["init", "--quiet"]);
    let handle = miner::open(tmp.path()).unwrap();
    assert!(matches!(miner::mine(&handle, 548), Err(MineError::NoCommits)));
}

#[test]
fn unknown_branch_lists_candidates() {
    let tmp = tempfile::tempdir().unwrap();
    let mut h = HistoryBuilder::new();
    h.commit("trunk", &Signature::new("X", "x@e", 1), &[], "m", &[FileOp::write("a", "1")]);
    h.commit("dev", &Signature::new("X", "x@e", 2), &[], "m", &[FileOp::write("b", "1")]);
    h.import(tmp.path(), "trunk").unwrap();
    match miner::mine(&miner::open(tmp.path()).unwrap(), 548) {
        Err(MineError::BranchNotFound { candidates }) => {
            assert_eq!(candidates, ["refs/heads/dev", "refs/heads/trunk"]);
        }
        other => panic!("expected BranchNotFound, got {other:?}"),
    }
}

#[test]
fn open_rejects_non_repository() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(miner::open(tmp.path()), Err(MineError::NotARepository(_))));
    assert!(matches!(
        miner::open(&tmp.path().join("missing")),
        Err(MineError::NotARepository(_))
    ));
}

#[test]
fn clone_then_reuse_and_fetch() {
    let tmp = tempfile::tempdir().unwrap();
    let origin = tmp.path().join("origin");
    fixtures::four_file_two_author(&origin).unwrap();
    let url = origin.to_str().unwrap();
    let clone_dir = tmp.path().join("store/o__n/clone");

    let first = miner::clone_or_open(&clone_dir, url).unwrap();
    let before = miner::mine(&first, 548).unwrap();
    assert_eq!(before.events.len(), 6);

    // A new upstream commit shows up after the second call fetches.
    let ident = format!("Dan <dan@example.com> {} +0000", FIXTURE_TIME + 10);
    let stream = format!(
        "commit refs/heads/main\nauthor {ident}\ncommitter {ident}\ndata 4\nmore\n\
         from refs/heads/main^0\nM 100644 inline docs/extra.md\ndata 1\nx\n\n"
    );
    let mut child = Command::new("git")
        .arg("-C")
        .arg(&origin)
        .args(["fast-import", "--quiet"])
        .stdin(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stream.as_bytes()).unwrap();
    assert!(child.wait().unwrap().success());

    let second = miner::clone_or_open(&clone_dir, url).unwrap();
    assert_eq!(first, second);
    let after = miner::mine(&second, 548).unwrap();
    assert_eq!(after.events.len(), 7);
    assert_eq!(after.reference_time, FIXTURE_TIME + 10);
}

#[test]
fn clone_of_missing_repository_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let clone_dir = tmp.path().join("clone");
    let err = miner::clone_or_open(&clone_dir, tmp.path().join("nope").to_str().unwrap()).unwrap_err();
    assert!(matches!(err, MineError::NotARepository(_)), "{err:?}");
    assert!(!clone_dir.exists());
}

#[test]
fn unreachable_host_is_retryable() {
    let tmp = tempfile::tempdir().unwrap();
    let err = miner::clone_or_open(
        &tmp.path().join("clone"),
        "http://127.0.0.1:9/owner/repo.git",
    )
    .unwrap_err();
    assert!(err.is_retryable(), "{err:?}");
}

//! Small scripted repositories with known bus factors, used by tests,
//! the acceptance suite and the documentation examples.

use std::io;
use std::path::Path;

use crate::miner::SECONDS_PER_DAY;
use crate::synth::{FileOp, HistoryBuilder, Signature};

/// Author time of the newest commit in every fixture.
pub const FIXTURE_TIME: i64 = 1_700_000_000;
const DAY: i64 = SECONDS_PER_DAY;

fn alice(time: i64) -> Signature {
    Signature::new("Alice", "alice@example.com", time)
}

fn bob(time: i64) -> Signature {
    Signature::new("Bob", "bob@example.com", time)
}

/// Four files, two authors.
///
/// alice owns `src/core/a.rs` and `src/core/b.rs` (knowledge 1.5 each), bob
/// owns `docs/guide.md` and `docs/notes.md` (1.0 each). Removing alice
/// leaves exactly half of the files covered, so the root bus factor is 2.
pub fn four_file_two_author(dir: &Path) -> io::Result<()> {
    let mut h = HistoryBuilder::new();
    h.commit(
        "main",
        &alice(FIXTURE_TIME - 152 * DAY),
        &[],
        "core",
        &[
            FileOp::write("src/core/a.rs", "fn a() {}\n"),
            FileOp::write("src/core/b.rs", "fn b() {}\n"),
        ],
    );
    h.commit(
        "main",
        &bob(FIXTURE_TIME),
        &[],
        "docs",
        &[
            FileOp::write("docs/guide.md", "# Guide\n\nHow to build.\n"),
            FileOp::write("docs/notes.md", "# Notes\n"),
        ],
    );
    h.commit(
        "main",
        &alice(FIXTURE_TIME),
        &[],
        "core again",
        &[
            FileOp::write("src/core/a.rs", "fn a() { b() }\n"),
            FileOp::write("src/core/b.rs", "fn b() { }\n"),
        ],
    );
    h.import(dir, "main")
}

/// One file written by one author.
pub fn single_file(dir: &Path) -> io::Result<()> {
    let mut h = HistoryBuilder::new();
    h.commit(
        "main",
        &alice(FIXTURE_TIME),
        &[],
        "readme",
        &[FileOp::write("README.md", "# Single\n")],
    );
    h.import(dir, "main")
}

/// Files under `legacy/` were last touched 600 days before head; only
/// `app.py` is active.
pub fn stale_files(dir: &Path) -> io::Result<()> {
    let mut h = HistoryBuilder::new();
    h.commit(
        "main",
        &alice(FIXTURE_TIME - 600 * DAY),
        &[],
        "legacy",
        &[
            FileOp::write("legacy/old.c", "int main(void) { return 0; }\n"),
            FileOp::write("legacy/README", "old code\n"),
        ],
    );
    h.commit(
        "main",
        &bob(FIXTURE_TIME),
        &[],
        "app",
        &[FileOp::write("app.py", "print('hi')\n")],
    );
    h.import(dir, "main")
}

/// A richer history: shared ownership, a rename, a deletion, a bot, a merge,
/// a stale file and a path with a comma.
pub fn mixed(dir: &Path) -> io::Result<()> {
    let carol = |t| Signature::new("Carol", "Carol@Example.com", t);
    let bot = |t| {
        Signature::new(
            "dependabot[bot]",
            "49699333+dependabot[bot]@users.noreply.github.com",
            t,
        )
    };
    let mut h = HistoryBuilder::new();
    let root = h.commit(
        "main",
        &alice(FIXTURE_TIME - 700 * DAY),
        &[],
        "ancient",
        &[
            FileOp::write("tools/gen.sh", "#!/bin/sh\necho gen\n"),
            FileOp::write("lib/util.rs", "pub fn util() {}\n"),
        ],
    );
    let c1 = h.commit(
        "main",
        &alice(FIXTURE_TIME - 300 * DAY),
        &[root],
        "engine",
        &[
            FileOp::write("lib/engine.rs", "pub fn run() {}\n"),
            FileOp::write("lib/util.rs", "pub fn util() { }\n"),
            FileOp::write("data/a,b.csv", "x,y\n1,2\n"),
        ],
    );
    let c2 = h.commit(
        "main",
        &bob(FIXTURE_TIME - 200 * DAY),
        &[c1],
        "rename util",
        &[FileOp::rename("lib/util.rs", "lib/helpers.rs")],
    );
    let feature = h.commit(
        "feature",
        &carol(FIXTURE_TIME - 100 * DAY),
        &[c2],
        "feature work",
        &[
            FileOp::write("lib/engine.rs", "pub fn run() { step() }\n"),
            FileOp::write("lib/step.rs", "pub fn step() {}\n"),
        ],
    );
    let c3 = h.commit(
        "main",
        &bob(FIXTURE_TIME - 90 * DAY),
        &[c2],
        "helpers",
        &[
            FileOp::write("lib/helpers.rs", "pub fn util() { /* bob */ }\n"),
            FileOp::write("scratch.txt", "tmp\n"),
        ],
    );
    let merge = h.commit(
        "main",
        &alice(FIXTURE_TIME - 80 * DAY),
        &[c3, feature],
        "merge feature",
        &[
            FileOp::write("lib/engine.rs", "pub fn run() { step() }\n"),
            FileOp::write("lib/step.rs", "pub fn step() {}\n"),
        ],
    );
    let c4 = h.commit(
        "main",
        &bot(FIXTURE_TIME - 10 * DAY),
        &[merge],
        "bump deps",
        &[FileOp::write("Cargo.lock", "# lock\n")],
    );
    h.commit(
        "main",
        &carol(FIXTURE_TIME),
        &[c4],
        "cleanup",
        &[
            FileOp::delete("scratch.txt"),
            FileOp::write("lib/engine.rs", "pub fn run() { step(); }\n"),
        ],
    );
    h.import(dir, "main")
}

/// Two branches joined by a merge commit that also carries its own change.
///
/// Non-merge per-file changes: root (2) + main (1) + feature (1) = 4.
pub fn merge_only(dir: &Path) -> io::Result<()> {
    let mut h = HistoryBuilder::new();
    let root = h.commit(
        "main",
        &alice(FIXTURE_TIME - 3 * DAY),
        &[],
        "root",
        &[FileOp::write("x", "1\n"), FileOp::write("y", "1\n")],
    );
    let side = h.commit("feature", &bob(FIXTURE_TIME - 2 * DAY), &[root], "side", &[FileOp::write("x", "2\n")]);
    let main = h.commit("main", &alice(FIXTURE_TIME - DAY), &[root], "main", &[FileOp::write("y", "2\n")]);
    h.commit(
        "main",
        &alice(FIXTURE_TIME),
        &[main, side],
        "merge",
        &[FileOp::write("x", "2\n"), FileOp::write("z", "merge-only\n")],
    );
    h.import(dir, "main")
}

//! Scripted and synthetic Git histories, written with `git fast-import`.

use std::io::{self, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::miner::SECONDS_PER_DAY;

/// A commit created by [`HistoryBuilder`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark(usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub email: String,
    /// Seconds since the epoch, UTC.
    pub time: i64,
}

impl Signature {
    pub fn new(name: &str, email: &str, time: i64) -> Self {
        Self {
            name: name.into(),
            email: email.into(),
            time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileOp {
    Write { path: String, content: Vec<u8> },
    Delete { path: String },
    Rename { from: String, to: String },
}

impl FileOp {
    pub fn write(path: &str, content: impl Into<Vec<u8>>) -> Self {
        FileOp::Write {
            path: path.into(),
            content: content.into(),
        }
    }

    pub fn rename(from: &str, to: &str) -> Self {
        FileOp::Rename {
            from: from.into(),
            to: to.into(),
        }
    }

    pub fn delete(path: &str) -> Self {
        FileOp::Delete { path: path.into() }
    }
}

fn quote(path: &str) -> String {
    let mut out = String::with_capacity(path.len() + 2);
    out.push('"');
    for c in path.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Accumulates a fast-import stream.
#[derive(Debug, Default)]
pub struct HistoryBuilder {
    stream: Vec<u8>,
    marks: usize,
}

impl HistoryBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a commit to `branch`. The first parent is `parents[0]`; any
    /// further parents make it a merge. With no parents the commit continues
    /// the branch tip, or starts the branch as a root commit.
    pub fn commit(
        &mut self,
        branch: &str,
        author: &Signature,
        parents: &[Mark],
        message: &str,
        ops: &[FileOp],
    ) -> Mark {
        self.marks += 1;
        let mark = Mark(self.marks);
        let s = &mut self.stream;
        let ident = format!("{} <{}> {} +0000", author.name, author.email, author.time);
        writeln!(s, "commit refs/heads/{branch}").unwrap();
        writeln!(s, "mark :{}", mark.0).unwrap();
        writeln!(s, "author {ident}").unwrap();
        writeln!(s, "committer {ident}").unwrap();
        writeln!(s, "data {}", message.len()).unwrap();
        writeln!(s, "{message}").unwrap();
        if let Some((first, rest)) = parents.split_first() {
            writeln!(s, "from :{}", first.0).unwrap();
            for p in rest {
                writeln!(s, "merge :{}", p.0).unwrap();
            }
        }
        for op in ops {
            match op {
                FileOp::Write { path, content } => {
                    writeln!(s, "M 100644 inline {}", quote(path)).unwrap();
                    writeln!(s, "data {}", content.len()).unwrap();
                    s.extend_from_slice(content);
                    s.push(b'\n');
                }
                FileOp::Delete { path } => writeln!(s, "D {}", quote(path)).unwrap(),
                FileOp::Rename { from, to } => {
                    writeln!(s, "R {} {}", quote(from), quote(to)).unwrap()
                }
            }
        }
        s.push(b'\n');
        mark
    }

    pub fn stream(&self) -> &[u8] {
        &self.stream
    }

    /// Initializes a repository at `dir` and imports the history, with HEAD
    /// pointing at `head_branch`.
    pub fn import(&self, dir: &Path, head_branch: &str) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        run(dir, &["init", "--quiet"])?;
        let mut child = Command::new("git")
            .arg("-C")
            .arg(dir)
            .args(["fast-import", "--quiet", "--done"])
            .stdin(Stdio::piped())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin.write_all(&self.stream)?;
            stdin.write_all(b"done\n")?;
        }
        let out = child.wait_with_output()?;
        if !out.status.success() {
            return Err(io::Error::other(format!(
                "fast-import failed: {}",
                String::from_utf8_lossy(&out.stderr)
            )));
        }
        run(dir, &["symbolic-ref", "HEAD", &format!("refs/heads/{head_branch}")])
    }
}

fn run(dir: &Path, args: &[&str]) -> io::Result<()> {
    let out = Command::new("git").arg("-C").arg(dir).args(args).output()?;
    if out.status.success() {
        Ok(())
    } else {
        Err(io::Error::other(format!(
            "git {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )))
    }
}

/// Parameters of a synthetic repository.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthConfig {
    pub commits: usize,
    pub files: usize,
    pub authors: usize,
    pub seed: u64,
    /// Span the commit timestamps are drawn from.
    pub window_days: u32,
    /// Timestamp of the newest commit.
    pub end_time: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            commits: 1000,
            files: 2000,
            authors: 20,
            seed: 42,
            window_days: crate::miner::DEFAULT_WINDOW_DAYS,
            end_time: 1_700_000_000,
        }
    }
}

/// Zipf exponent for file selection.
const ZIPF_EXPONENT: f64 = 1.1;

fn synth_path(idx: usize) -> String {
    format!("src/mod{:02}/part{}/file{idx:05}.rs", idx % 20, (idx / 20) % 5)
}

/// Builds the fast-import stream for a synthetic history.
///
/// The first commit adds every file; later commits rotate through the
/// authors round-robin and touch one to three files picked with a Zipf
/// distribution over a seeded permutation of the files. Timestamps are
/// uniform over the window and non-decreasing.
pub fn synthetic_history(cfg: &SynthConfig) -> HistoryBuilder {
    assert!(cfg.commits >= 1 && cfg.files >= 1 && cfg.authors >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = cfg.end_time - i64::from(cfg.window_days) * SECONDS_PER_DAY + 1;
    let mut times: Vec<i64> = (1..cfg.commits)
        .map(|_| rng.random_range(start..=cfg.end_time))
        .collect();
    times.sort_unstable();
    if let Some(last) = times.last_mut() {
        *last = cfg.end_time;
    }
    let first_time = if cfg.commits == 1 { cfg.end_time } else { start };

    let mut popularity: Vec<usize> = (0..cfg.files).collect();
    popularity.shuffle(&mut rng);
    let zipf = Zipf::new(cfg.files as f64, ZIPF_EXPONENT).expect("valid zipf parameters");
    let filler: Vec<usize> = (0..cfg.files).map(|_| rng.random_range(16..1500)).collect();
    let mut revision = vec![0u32; cfg.files];
    let content = |idx: usize, rev: u32| {
        let mut body = format!("// file {idx} revision {rev}\n");
        body.push_str(&"x".repeat(filler[idx]));
        body.push('\n');
        body.into_bytes()
    };
    let signature = |author: usize, time: i64| {
        Signature::new(
            &format!("Dev {author:02}"),
            &format!("dev{author:02}@example.com"),
            time,
        )
    };

    let mut history = HistoryBuilder::new();
    let initial: Vec<FileOp> = (0..cfg.files)
        .map(|idx| FileOp::write(&synth_path(idx), content(idx, 0)))
        .collect();
    history.commit("main", &signature(0, first_time), &[], "initial import", &initial);

    for (n, time) in times.into_iter().enumerate() {
        let author = (n + 1) % cfg.authors;
        let touched = rng.random_range(1..=3usize);
        let mut picked: Vec<usize> = (0..touched)
            .map(|_| popularity[zipf.sample(&mut rng) as usize - 1])
            .collect();
        picked.sort_unstable();
        picked.dedup();
        let ops: Vec<FileOp> = picked
            .into_iter()
            .map(|idx| {
                revision[idx] += 1;
                FileOp::write(&synth_path(idx), content(idx, revision[idx]))
            })
            .collect();
        history.commit("main", &signature(author, time), &[], &format!("change {}", n + 1), &ops);
    }
    history
}

/// Writes a synthetic repository to `dir`.
pub fn generate(dir: &Path, cfg: &SynthConfig) -> io::Result<()> {
    synthetic_history(cfg).import(dir, "main")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let cfg = SynthConfig {
            commits: 50,
            files: 30,
            authors: 4,
            ..SynthConfig::default()
        };
        assert_eq!(synthetic_history(&cfg).stream(), synthetic_history(&cfg).stream());
        let other = SynthConfig { seed: 7, ..cfg.clone() };
        assert_ne!(synthetic_history(&cfg).stream(), synthetic_history(&other).stream());
    }

    #[test]
    fn quotes_special_paths() {
        assert_eq!(quote("a b"), "\"a b\"");
        assert_eq!(quote("a\"b"), "\"a\\\"b\"");
    }
}

//! Timing harness over synthetic repositories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use busfactor_core::miner;
use busfactor_core::pipeline::{self, StageLog};
use busfactor_core::synth::{self, SynthConfig};
use busfactor_core::{BotHints, RepoHandle};

use crate::stats::median;
use crate::CliError;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub synth: SynthConfig,
    pub repeat: usize,
    /// Keep generated repositories under this directory instead of a
    /// temporary one.
    pub workdir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub run: usize,
    pub seconds: f64,
    pub peak_rss_kb: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub synth: SynthConfig,
    /// Generating the repository, or just reopening a reused one.
    pub generate_seconds: f64,
    pub runs: Vec<BenchRun>,
}

impl BenchReport {
    pub fn median_seconds(&self) -> f64 {
        median(&self.runs.iter().map(|r| r.seconds).collect::<Vec<_>>())
    }

    pub fn peak_rss_kb(&self) -> u64 {
        self.runs.iter().map(|r| r.peak_rss_kb).max().unwrap_or(0)
    }

    /// One row per run followed by a `median` summary row.
    pub fn to_csv(&self) -> String {
        let c = &self.synth;
        let mut out = String::from("run,commits,files,authors,seconds,peak_rss_mb\n");
        let mb = |kb: u64| kb as f64 / 1024.0;
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3},{:.1}",
                r.run,
                c.commits,
                c.files,
                c.authors,
                r.seconds,
                mb(r.peak_rss_kb)
            );
        }
        let _ = writeln!(
            out,
            "median,{},{},{},{:.3},{:.1}",
            c.commits,
            c.files,
            c.authors,
            self.median_seconds(),
            mb(self.peak_rss_kb())
        );
        out
    }
}

/// Resets the kernel's high-water mark of this process's resident set.
fn reset_peak_rss() {
    let _ = std::fs::write("/proc/self/clear_refs", "5");
}

fn vm_hwm_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

fn maxrss_kb(who: libc::c_int) -> u64 {
    // SAFETY: getrusage only writes into the zeroed struct we own.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    if unsafe { libc::getrusage(who, &mut usage) } != 0 {
        return 0;
    }
    // Linux reports kilobytes.
    u64::try_from(usage.ru_maxrss).unwrap_or(0)
}

/// Peak resident memory of this process or of the largest child (git).
pub fn peak_rss_kb() -> u64 {
    let own = vm_hwm_kb().unwrap_or_else(|| maxrss_kb(libc::RUSAGE_SELF));
    own.max(maxrss_kb(libc::RUSAGE_CHILDREN))
}

/// Generates (or reuses) the repository for `cfg` under `root`.
pub fn prepare(cfg: &SynthConfig, root: &Path, log: &mut dyn StageLog) -> Result<RepoHandle, CliError> {
    if cfg.commits < 1 {
        return Err(CliError::Input("--commits must be at least 1".into()));
    }
    if cfg.files < 1 || cfg.authors < 1 {
        return Err(CliError::Input("--files and --authors must be at least 1".into()));
    }
    let repo = root.join(format!(
        "synth-c{}-f{}-a{}-s{}-w{}",
        cfg.commits, cfg.files, cfg.authors, cfg.seed, cfg.window_days
    ));
    // Generation is deterministic, so an existing repository for the same
    // parameters is reused.
    if miner::open(&repo).is_err() {
        let start = Instant::now();
        synth::generate(&repo, cfg).map_err(|e| CliError::Io(format!("generating repository: {e}")))?;
        log.line(&format!(
            "generated {} commits over {} files by {} authors (seed {}) in {:.2}s",
            cfg.commits,
            cfg.files,
            cfg.authors,
            cfg.seed,
            start.elapsed().as_secs_f64()
        ));
    } else {
        log.line(&format!("reusing {}", repo.display()));
    }
    Ok(miner::open(&repo)?)
}

/// Times one full analysis of a prepared repository.
pub fn time_once(handle: &RepoHandle, window_days: u32, run: usize) -> Result<(BenchRun, String), CliError> {
    reset_peak_rss();
    let start = Instant::now();
    let analysis = pipeline::analyze(handle, "synthetic", "bench", window_days, &BotHints::default(), &mut |_: &str| {})?;
    let seconds = start.elapsed().as_secs_f64();
    let bench_run = BenchRun {
        run,
        seconds,
        peak_rss_kb: peak_rss_kb(),
    };
    Ok((bench_run, analysis.tree.root.bus_factor.to_string()))
}

/// Generates the repository once, then times the analysis `repeat` times.
pub fn run(opts: &BenchOptions, log: &mut dyn StageLog) -> Result<BenchReport, CliError> {
    let c = &opts.synth;
    if opts.repeat < 1 {
        return Err(CliError::Input("--repeat must be at least 1".into()));
    }
    let tmp;
    let root = match &opts.workdir {
        Some(dir) => dir.clone(),
        None => {
            tmp = tempfile::tempdir().map_err(|e| CliError::Io(e.to_string()))?;
            tmp.path().to_path_buf()
        }
    };
    let start = Instant::now();
    let handle = prepare(c, &root, log)?;
    let generate_seconds = start.elapsed().as_secs_f64();

    let mut runs = Vec::with_capacity(opts.repeat);
    for run in 1..=opts.repeat {
        let (r, bus_factor) = time_once(&handle, c.window_days, run)?;
        log.line(&format!("run {run}: {:.3}s, root bus factor {bus_factor}", r.seconds));
        runs.push(r);
    }
    Ok(BenchReport {
        synth: c.clone(),
        generate_seconds,
        runs,
    })
}

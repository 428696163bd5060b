use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use busfactor_cli::bench::{self, BenchOptions};
use busfactor_cli::{analyze, deltas_csv, parse_exclude, parse_source, simulate, AnalyzeOptions, CliError};
use busfactor_core::miner::DEFAULT_WINDOW_DAYS;
use busfactor_core::synth::SynthConfig;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "busfactor", version, about = "Bus factor analysis for Git repositories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a repository and write tree.json, tree.csv and matrix.json.
    Analyze {
        /// Local repository directory or clone URL.
        repo: String,
        #[arg(long, default_value = "./bf-out")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_WINDOW_DAYS, value_parser = clap::value_parser!(u32).range(1..))]
        window_days: u32,
        /// Owner recorded in meta.json (default: from the URL, or "local").
        #[arg(long)]
        owner: Option<String>,
        /// Name recorded in meta.json (default: from the URL or directory).
        #[arg(long)]
        name: Option<String>,
        /// Do not ask the hosting provider for bot accounts.
        #[arg(long)]
        no_bots: bool,
    },
    /// Recompute bus factors with some authors removed.
    Simulate {
        /// Directory written by `analyze`.
        artifacts: PathBuf,
        /// Comma-separated author ids.
        #[arg(long, default_value = "")]
        exclude: String,
    },
    /// Time the analysis on a generated repository.
    Bench {
        #[arg(long)]
        commits: i64,
        #[arg(long, default_value_t = 2000)]
        files: usize,
        #[arg(long, default_value_t = 20)]
        authors: usize,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_WINDOW_DAYS)]
        window_days: u32,
        /// Where to generate the repository (default: a temporary directory).
        #[arg(long)]
        workdir: Option<PathBuf>,
    },
}

fn stderr_log(line: &str) {
    eprintln!("{line}");
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut log = stderr_log;
    match cli.command {
        Command::Analyze {
            repo,
            out,
            window_days,
            owner,
            name,
            no_bots,
        } => {
            let opts = AnalyzeOptions {
                source: parse_source(&repo)?,
                out,
                window_days,
                owner,
                name,
                no_bots,
            };
            let outcome = analyze(&opts, &mut log)?;
            println!("bus factor: {}", outcome.bus_factor);
        }
        Command::Simulate { artifacts, exclude } => {
            let deltas = simulate(&artifacts, &parse_exclude(&exclude))?;
            std::io::stdout()
                .write_all(&deltas_csv(&deltas))
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        Command::Bench {
            commits,
            files,
            authors,
            repeat,
            seed,
            window_days,
            workdir,
        } => {
            if commits < 1 {
                return Err(CliError::Input("--commits must be at least 1".into()));
            }
            let opts = BenchOptions {
                synth: SynthConfig {
                    commits: commits as usize,
                    files,
                    authors,
                    seed,
                    window_days,
                    ..SynthConfig::default()
                },
                repeat,
                workdir,
            };
            let report = bench::run(&opts, &mut log)?;
            print!("{}", report.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

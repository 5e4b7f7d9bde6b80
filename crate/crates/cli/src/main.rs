//! `aksvd`: feature extraction with asymmetric kernel SVD, downstream
//! evaluation and solver benchmarks.
//!
//! Settings come from `--config FILE` (`key = value`, dotted keys), then
//! `AKSVD_*` environment variables (`AKSVD_KERNEL_GAMMA` sets
//! `kernel.gamma`), then command-line flags. Exit codes: 0 success,
//! 2 configuration or input error, 3 numerical failure.

mod bench;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CliResult;
use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "aksvd", version, about = "Asymmetric kernel SVD pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

/// Flags accepted before or after the subcommand; later ones win.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Global seed; unset component seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for the numeric kernels.
    #[arg(long)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Feature method: ksvd, kpca, svd or pca.
    #[arg(long)]
    method: Option<String>,

    /// Any configuration key, e.g. `--set kernel.family=rbf`. Repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", value_parser = parse_pair)]
    set: Vec<(String, String)>,
}

impl Common {
    fn merge(mut self, later: Common) -> Common {
        self.config = later.config.or(self.config);
        self.seed = later.seed.or(self.seed);
        self.threads = later.threads.or(self.threads);
        self.out = later.out.or(self.out);
        self.method = later.method.or(self.method);
        self.set.extend(later.set);
        self
    }
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Fit KSVD and write left/right features, singular values and the model.
    Extract(Common),
    /// Node or tabular classification with an LSSVM on extracted features.
    Classify(Common),
    /// Tabular regression with an LSSVM on extracted features.
    Regress(Common),
    /// Directed graph reconstruction from node features.
    Reconstruct(Common),
    /// Solver comparison at fixed tolerances.
    Bench(Common),
    /// Samples needed and speedup across a bandwidth grid.
    NystromSweep(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Extract(c)
            | Command::Classify(c)
            | Command::Regress(c)
            | Command::Reconstruct(c)
            | Command::Bench(c)
            | Command::NystromSweep(c) => c,
        }
    }
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))
}

fn run(cli: Cli) -> CliResult<()> {
    let flags = cli.common.merge(cli.command.common().clone());
    let mut overrides = flags.set.clone();
    if let Some(seed) = flags.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(threads) = flags.threads {
        overrides.push(("threads".into(), threads.to_string()));
    }
    if let Some(out) = &flags.out {
        overrides.push(("out".into(), out.display().to_string()));
    }
    if let Some(method) = &flags.method {
        overrides.push(("method".into(), method.clone()));
    }
    let cfg = RunConfig::resolve(flags.config.as_deref(), std::env::vars(), &overrides)?;
    let threads: usize = cfg.parse("threads")?;
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::warn!("thread pool already initialised: {e}");
    }
    match cli.command {
        Command::Extract(_) => commands::extract(&cfg),
        Command::Classify(_) => commands::classify(&cfg),
        Command::Regress(_) => commands::regress(&cfg),
        Command::Reconstruct(_) => commands::reconstruct(&cfg),
        Command::Bench(_) => bench::bench(&cfg),
        Command::NystromSweep(_) => bench::nystrom_sweep(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("AKSVD_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! Command-line front end for the adversarial claim-audit workbench.
//!
//! Every subcommand reads one TOML experiment config, resolves a run
//! directory, takes an exclusive lock on it, and writes its artifacts plus
//! a manifest there. Randomness flows from a single global seed; repeated
//! invocations with the same config and seed produce byte-identical
//! reports. Wall-clock facts live in `run.log` only, so they never leak
//! into the reproducible artifacts.

pub mod commands;
pub mod config;
pub mod layout;

use std::path::PathBuf;
use std::time::Instant;

use advclaim_core::error::Error;
use advclaim_core::parallel::set_max_threads;
use clap::{Args, Parser, Subcommand};

use commands::{Context, Outcome};
use layout::Layout;

/// Environment variable capping worker threads. Absent means serial.
pub const THREADS_ENV: &str = "ADVCLAIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "advclaim",
    version,
    about = "Train fraud detectors, attack them, and audit the results"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest the configured CSV or generate the synthetic table, then
    /// write the encoded snapshot all later stages consume.
    Prepare(CommonArgs),
    /// Train the configured model families against the snapshot.
    Train(CommonArgs),
    /// Sweep the perturbation attacks over every trained model.
    Attack(CommonArgs),
    /// Pretrain a record generator and refine it against trained models
    /// through a metered score-only interface.
    GanAttack(CommonArgs),
    /// Recompute clean test metrics for every trained model.
    Eval(CommonArgs),
    /// Rank features of one trained model by sampled Shapley importance.
    Explain(ExplainArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Path to the TOML experiment config.
    #[arg(long)]
    pub config: PathBuf,

    /// Run directory for artifacts; overrides `out` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Global seed; overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Use models trained on a different snapshot anyway, with a warning.
    #[arg(long)]
    pub allow_mismatch: bool,

    /// Cross-check this invocation against the manifest `prepare` wrote.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Keep only the highest-ranked features; overrides the config.
    #[arg(long)]
    pub top_k: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::Train(_) => "train",
            Command::Attack(_) => "attack",
            Command::GanAttack(_) => "gan-attack",
            Command::Eval(_) => "eval",
            Command::Explain(_) => "explain",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Prepare(args)
            | Command::Train(args)
            | Command::Attack(args)
            | Command::Eval(args)
            | Command::GanAttack(args) => args,
            Command::Explain(args) => &args.common,
        }
    }

    fn top_k(&self) -> Option<usize> {
        match self {
            Command::Explain(args) => args.top_k,
            _ => None,
        }
    }
}

/// Runs one subcommand to completion and maps the result onto an exit
/// code: 0 success, 1 runtime failure (including partial per-item
/// failures), 2 bad config or protocol violation, 3 I/O failure.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli.command) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            if outcome.partial {
                eprintln!("finished with failures; see the report for details");
                1
            } else {
                0
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Schema(_)
        | Error::Ingestion { .. }
        | Error::HashMismatch { .. }
        | Error::Protocol(_) => 2,
        Error::Io { .. } => 3,
        _ => 1,
    }
}

fn execute(command: &Command) -> advclaim_core::Result<Outcome> {
    configure_threads()?;
    let args = command.common();
    let (config, config_hash) = config::load_config(&args.config)?;

    let seed = args.seed.unwrap_or(config.seed);
    let out = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .ok_or_else(|| {
            Error::Config(
                "no run directory: pass --out or set `out` in the config".to_owned(),
            )
        })?;

    let layout = Layout::new(out);
    layout.ensure()?;
    let _lock = layout.acquire_lock()?;

    let ctx = Context {
        top_k: command.top_k(),
        allow_mismatch: args.allow_mismatch,
        verify: args.verify,
        config,
        config_hash,
        seed,
        layout,
    };

    let started = Instant::now();
    let result = dispatch(command, &ctx);
    let status = match &result {
        Ok(outcome) if outcome.partial => "partial",
        Ok(_) => "ok",
        Err(_) => "error",
    };
    ctx.layout.log_run(
        command.name(),
        &ctx.config_hash,
        ctx.seed,
        status,
        started.elapsed().as_millis(),
    );
    result
}

fn dispatch(command: &Command, ctx: &Context) -> advclaim_core::Result<Outcome> {
    match command {
        Command::Prepare(_) => commands::cmd_prepare(ctx),
        Command::Train(_) => commands::cmd_train(ctx),
        Command::Attack(_) => commands::cmd_attack(ctx),
        Command::GanAttack(_) => commands::cmd_gan_attack(ctx),
        Command::Eval(_) => commands::cmd_eval(ctx),
        Command::Explain(_) => commands::cmd_explain(ctx),
    }
}

/// Applies the thread cap before any parallel work starts.
fn configure_threads() -> advclaim_core::Result<()> {
    match std::env::var(THREADS_ENV) {
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                Error::Config(format!(
                    "{THREADS_ENV} must be a positive integer, got {raw:?}"
                ))
            })?;
            if n == 0 {
                return Err(Error::Config(format!(
                    "{THREADS_ENV} must be at least 1, got 0"
                )));
            }
            set_max_threads(n);
        }
        Err(_) => set_max_threads(1),
    }
    Ok(())
}

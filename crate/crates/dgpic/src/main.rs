use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dgpic::commands::{cmd_ablate, cmd_estimate_prototypes, cmd_eval, cmd_gen_data, cmd_train, RunOptions};
use dgpic::parallel::Workers;
use dgpic::DgpicError;

#[derive(Parser)]
#[command(name = "dgpic", version, about = "Multi-domain in-context point-cloud experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the multi-domain corpus.
    GenData(Flags),
    /// Train one model per seed on the source domains.
    Train(Flags),
    /// Compute source prototypes and the prompt bank from each checkpoint.
    EstimatePrototypes(Flags),
    /// Evaluate the configured shift modes on the held-out domain.
    Eval(Flags),
    /// Evaluate every shift mode and rank them.
    Ablate(Flags),
}

#[derive(Args)]
struct Flags {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overwrite or rebuild existing artifacts.
    #[arg(long)]
    force: bool,
    /// Run only this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated shift modes, e.g. `none,full`.
    #[arg(long)]
    modes: Option<String>,
    /// Output directory, overriding `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check that CD(target, target) = 0 before evaluating.
    #[arg(long)]
    self_check: bool,
}

impl From<Flags> for RunOptions {
    fn from(f: Flags) -> Self {
        RunOptions { config: f.config, force: f.force, seed: f.seed, modes: f.modes, out: f.out, self_check: f.self_check }
    }
}

fn run(cli: Cli) -> Result<String, DgpicError> {
    let workers = Workers::from_env()?;
    log::debug!("{} worker threads", workers.threads());
    match cli.command {
        Command::GenData(f) => cmd_gen_data(&f.into(), &workers),
        Command::Train(f) => cmd_train(&f.into(), &workers),
        Command::EstimatePrototypes(f) => cmd_estimate_prototypes(&f.into(), &workers),
        Command::Eval(f) => cmd_eval(&f.into(), &workers),
        Command::Ablate(f) => cmd_ablate(&f.into(), &workers),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

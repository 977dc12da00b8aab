use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vlattack::commands::{self, RunOptions, SynthKind};

#[derive(Parser)]
#[command(name = "vlattack", version, about = "Variable-length adversarial attacks on toy text models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a top-level config key, e.g. `--set attack={"top_k":8}`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Parent directory for new run directories.
    #[arg(long, default_value = "runs")]
    runs_dir: PathBuf,
    /// Write into an existing run directory; refused if its config differs.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Worker threads; VLATTACK_WORKERS takes precedence.
    #[arg(long)]
    workers: Option<usize>,
}

impl From<RunArgs> for RunOptions {
    fn from(a: RunArgs) -> Self {
        Self { config: a.config, set: a.set, runs_dir: a.runs_dir, resume: a.resume, workers: a.workers }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Classification,
    Bitext,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its vocabulary file.
    Synth {
        #[arg(value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Label-flip rate (classification only).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        vocab_out: PathBuf,
    },
    /// Fine-tune the classifier.
    Train(RunArgs),
    /// Attack a classifier checkpoint on a dataset.
    Attack(RunArgs),
    /// Augment with adversarial examples and continue fine-tuning.
    Advtrain(RunArgs),
    /// Train the mask-predict translator.
    NatTrain(RunArgs),
    /// BLEU under attack, optionally after adversarial fine-tuning.
    NatAttack(RunArgs),
    /// Re-render the summary table of a run directory.
    Report { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { kind, seed, n, noise, out, vocab_out } => {
            let kind = match kind {
                Kind::Classification => SynthKind::Classification,
                Kind::Bitext => SynthKind::Bitext,
            };
            commands::cmd_synth(kind, seed, n, noise, &out, &vocab_out)
        }
        Command::Train(a) => commands::cmd_train(&a.into()).map(announce),
        Command::Attack(a) => commands::cmd_attack(&a.into()).map(announce),
        Command::Advtrain(a) => commands::cmd_advtrain(&a.into()).map(announce),
        Command::NatTrain(a) => commands::cmd_nat_train(&a.into()).map(announce),
        Command::NatAttack(a) => commands::cmd_nat_attack(&a.into()).map(announce),
        Command::Report { run_dir } => commands::cmd_report(&run_dir).map(drop),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}

fn announce(dir: PathBuf) {
    eprintln!("run directory: {}", dir.display());
}

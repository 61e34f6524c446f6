//! `unlearn`: pretrain, unlearn, evaluate and compare class-unlearning runs.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
//! training error, 3 verification failure.

mod compare;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use unlearn_core::losses::Method;

#[derive(Parser)]
#[command(name = "unlearn", version, about = "Class unlearning by mask distillation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides ULCK_OUT and the config's out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed everywhere it is used.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the original model on the full training set.
    Pretrain(Common),
    /// Train the reference model on remain data only.
    Retrain(Common),
    /// Unlearn the forget classes from a pretrained checkpoint.
    Unlearn {
        #[command(flatten)]
        common: Common,
        /// Overrides unlearn.loss.method.
        #[arg(long, value_parser = parse_method)]
        method: Option<Method>,
        /// Original checkpoint; defaults to <out>/original.ulck.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Allow methods that train on remain data.
        #[arg(long)]
        remain_data_ack: bool,
    },
    /// Score a checkpoint (default: the original) against the original.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Check the loss identities and gradients numerically.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate reports and write compare.csv.
    Compare {
        /// report_*.json files.
        reports: Vec<PathBuf>,
        /// Directory for compare.csv; defaults to ULCK_OUT, then the first
        /// report's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: unlearn_core::Error| e.to_string())
}

pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
    Verify,
}

pub type Outcome<T> = std::result::Result<T, Failure>;

/// Tags an error with the exit code it should produce.
pub trait ResultExt<T> {
    fn usage(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for std::result::Result<T, E> {
    fn usage(self) -> Outcome<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn dispatch(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Pretrain(c) => run::cmd_pretrain(&run::setup(&c.config, c.out.as_deref(), c.seed)?),
        Command::Retrain(c) => run::cmd_retrain(&run::setup(&c.config, c.out.as_deref(), c.seed)?),
        Command::Unlearn { common: c, method, checkpoint, remain_data_ack } => {
            let job = run::setup(&c.config, c.out.as_deref(), c.seed)?;
            run::cmd_unlearn(&job, method, checkpoint.as_deref(), remain_data_ack)
        }
        Command::Evaluate { common: c, checkpoint } => {
            let job = run::setup(&c.config, c.out.as_deref(), c.seed)?;
            run::cmd_evaluate(&job, checkpoint.as_deref())
        }
        Command::Verify { seed } => run::cmd_verify(seed),
        Command::Compare { reports, out } => {
            run::ensure_nonempty(&reports).usage()?;
            let parsed = reports.iter().map(|p| run::read_report(p)).collect::<Outcome<Vec<_>>>()?;
            for warning in compare::mismatches(&parsed) {
                eprintln!("warning: {warning}");
            }
            print!("{}", compare::table(&parsed));
            let dir = run::compare_dir(out.as_deref(), &reports[0]);
            std::fs::create_dir_all(&dir).map_err(anyhow::Error::from).runtime()?;
            compare::write_csv(&parsed, &dir.join(compare::CSV_FILE)).runtime()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verify) => {
            eprintln!("verification failed");
            ExitCode::from(3)
        }
    }
}

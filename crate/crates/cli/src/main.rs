mod render;
mod run;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use run::{Command, RunConfig};

#[derive(Parser)]
#[command(name = "qsuff", version, about = "Sufficiency analysis for quantum statistical experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Verdict tolerance.
    #[arg(long, global = true, default_value_t = 1e-8, allow_hyphen_values = true)]
    tol: f64,
    /// Comma-separated α values in (−1, 1) without 0.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<f64>>,
    /// Comma-separated cocycle times.
    #[arg(long = "t", global = true, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<f64>>,
    #[arg(long, global = true, default_value_t = 20_240_917)]
    seed: u64,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug)]
pub enum Format {
    Json,
    Table,
}

#[derive(Subcommand)]
enum Sub {
    /// Test a channel or subalgebra for sufficiency.
    Check {
        #[arg(long)]
        experiment: PathBuf,
        /// Channel JSON, inline or as a file.
        #[arg(long, conflicts_with = "subalgebra")]
        channel: Option<String>,
        /// Subalgebra JSON, inline or as a file.
        #[arg(long)]
        subalgebra: Option<String>,
    },
    /// Compare Fisher information before and after a channel.
    Fisher {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        channel: String,
    },
    /// Factorize family members along a subalgebra.
    Factorize {
        #[arg(long)]
        experiment: PathBuf,
        #[arg(long)]
        subalgebra: String,
    },
    /// Gaussian sample-mean sufficiency scenario.
    Gaussian {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Classical statistic on a finite sample space.
    Classical {
        #[arg(long)]
        experiment: PathBuf,
        /// Index list such as `0,1,1,2`, a JSON array, or a file.
        #[arg(long)]
        statistic: Option<String>,
    },
    /// Run the bundled property suite.
    Selftest,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { run::EXIT_INVALID } else { run::EXIT_OK });
        }
    };
    let c = cli.common;
    let command = match cli.command {
        Sub::Check { experiment, channel, subalgebra } => {
            Command::Check { experiment, channel, subalgebra }
        }
        Sub::Fisher { family, channel } => Command::Fisher { family, channel },
        Sub::Factorize { experiment, subalgebra } => Command::Factorize { experiment, subalgebra },
        Sub::Gaussian { scenario } => Command::Gaussian { scenario },
        Sub::Classical { experiment, statistic } => Command::Classical { experiment, statistic },
        Sub::Selftest => Command::Selftest,
    };
    let config = RunConfig {
        command,
        tolerance: c.tol,
        alphas: c.alpha,
        t_list: c.t,
        seed: c.seed,
        output: c.output,
        format: c.format,
    };
    ExitCode::from(run::run(&config))
}

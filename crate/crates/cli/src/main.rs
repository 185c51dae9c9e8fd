use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use relconc_cli::checks::{self, Scale};
use relconc_cli::commands::{
    cmd_concavity_curve, cmd_converge, cmd_lowrank_demo, cmd_prox_trap, cmd_regress, cmd_trap,
    output, ConvergeArgs, CurveArgs, LowrankArgs, ProxTrapArgs, RegressArgs, TrapArgs,
};
use relconc_cli::parse::config_args;

/// Relative concavity of thresholding operators: experiments and checks.
#[derive(Debug, Parser)]
#[command(name = "relconc", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key = value` file of flag defaults; explicit flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form concavity and tolerated condition number against rho.
    ConcavityCurve {
        #[command(flatten)]
        args: CurveArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Iterative thresholding trace on a random certified quadratic.
    Converge {
        #[command(flatten)]
        args: ConvergeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Stationary trap for an operator whose concavity exceeds 1/(2 kappa).
    Trap {
        #[command(flatten)]
        args: TrapArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Regularization-path sweep of the l1 proximal gradient trap.
    ProxTrap {
        #[command(flatten)]
        args: ProxTrapArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Sparse regression prediction errors against the high-probability bound.
    Regress {
        #[command(flatten)]
        args: RegressArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Matrix concavity of lifted operators and a low-rank denoising run.
    LowrankDemo {
        #[command(flatten)]
        args: LowrankArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Runs every acceptance check at reduced Monte Carlo budgets.
    Validate {
        /// Use the full budgets instead.
        #[arg(long)]
        full: bool,
    },
}

/// Inserts the arguments from `--config FILE` right after the subcommand
/// so that explicit flags, which come later, override them.
fn expand_config(raw: Vec<String>) -> anyhow::Result<Vec<String>> {
    let pos = raw
        .iter()
        .position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(raw) };
    let path = match raw[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => raw.get(pos + 1).cloned().context("--config needs a path")?,
    };
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("cannot read config {path}"))?;
    let extra = config_args(&text)?;
    let sub = raw
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(1, |i| i + 2);
    let mut out: Vec<String> = raw[..sub.min(raw.len())].to_vec();
    out.extend(extra);
    out.extend_from_slice(&raw[sub.min(raw.len())..]);
    Ok(out)
}

/// Summaries go to stdout when the table goes to a file, else to stderr.
fn log_for(common: &Common) -> Box<dyn Write> {
    if common.out.is_some() {
        Box::new(std::io::stdout())
    } else {
        Box::new(std::io::stderr())
    }
}

fn run() -> anyhow::Result<bool> {
    let cli = match Cli::try_parse_from(expand_config(std::env::args().collect())?) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let text = e.to_string();
            anyhow::bail!(
                "{}",
                text.lines()
                    .next()
                    .unwrap_or("invalid arguments")
                    .trim_start_matches("error: ")
            )
        }
    };
    match &cli.command {
        Command::ConcavityCurve { args, common } => {
            cmd_concavity_curve(args, &mut output(common.out.as_deref())?)?;
        }
        Command::Converge { args, common } => {
            cmd_converge(
                args,
                &mut output(common.out.as_deref())?,
                &mut log_for(common),
            )?;
        }
        Command::Trap { args, common } => {
            cmd_trap(
                args,
                &mut output(common.out.as_deref())?,
                &mut log_for(common),
            )?;
        }
        Command::ProxTrap { args, common } => {
            cmd_prox_trap(
                args,
                &mut output(common.out.as_deref())?,
                &mut log_for(common),
            )?;
        }
        Command::Regress { args, common } => {
            cmd_regress(
                args,
                &mut output(common.out.as_deref())?,
                &mut log_for(common),
            )?;
        }
        Command::LowrankDemo { args, common } => {
            cmd_lowrank_demo(
                args,
                &mut output(common.out.as_deref())?,
                &mut log_for(common),
            )?;
        }
        Command::Validate { full } => {
            let scale = if *full { Scale::Full } else { Scale::Quick };
            let mut all = true;
            for id in 1..=checks::CHECKS.len() {
                let outcome = checks::run(id, scale);
                all &= outcome.ok();
                println!("{}", outcome.line());
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

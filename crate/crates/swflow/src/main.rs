use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use swflow::cli::{
    check_command, diagnose_command, exit_code, run_command, CheckKind, DiagnoseKind, DiagnoseOpts,
    RunSummary,
};
use swflow::config::parse_config;
use swflow::error::{Result, SwError};

/// Gradient flow of a Seiberg-Witten-type functional on flat m-tori, with
/// monotonicity and singularity diagnostics.
#[derive(Parser)]
#[command(name = "swflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a configured flow; writes snapshots and energy.csv.
    Run {
        /// INI-style configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides [output] dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze a stored history directory.
    Diagnose {
        #[arg(value_enum)]
        kind: DiagnoseArg,
        /// Directory holding snap_*.swfl files.
        #[arg(long)]
        history: PathBuf,
        /// Probe center, comma-separated coordinates.
        #[arg(long)]
        x0: Option<String>,
        /// Probe time (default: last snapshot).
        #[arg(long)]
        t0: Option<f64>,
        /// Radius grid, comma-separated.
        #[arg(long)]
        radii: Option<String>,
        /// Detector threshold.
        #[arg(long)]
        delta: Option<f64>,
        /// Rescaling ratio.
        #[arg(long)]
        ratio: Option<usize>,
        /// Where to write outputs (default: the history directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in self-audit against a configuration.
    Check {
        #[arg(value_enum)]
        kind: CheckArg,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DiagnoseArg {
    Monotonicity,
    Detect,
    Profile,
    Rescale,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Clifford,
    Gauge,
    Gradient,
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| SwError::Config(format!("bad {what} component \"{p}\"")))
        })
        .collect()
}

fn load_config(path: &PathBuf) -> Result<swflow::config::RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn print_summary(summary: &RunSummary) {
    println!(
        "run: {} (output in {})",
        swflow::cli::summary_line(summary),
        summary.out_dir.display()
    );
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let summary = run_command(&cfg, out.as_deref())?;
            print_summary(&summary);
            if summary.blowup.is_some() {
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose {
            kind,
            history,
            x0,
            t0,
            radii,
            delta,
            ratio,
            out,
        } => {
            let opts = DiagnoseOpts {
                x0: x0.as_deref().map(|s| parse_list(s, "x0")).transpose()?,
                t0,
                radii: radii
                    .as_deref()
                    .map(|s| parse_list(s, "radii"))
                    .transpose()?,
                delta,
                ratio,
            };
            let kind = match kind {
                DiagnoseArg::Monotonicity => DiagnoseKind::Monotonicity,
                DiagnoseArg::Detect => DiagnoseKind::Detect,
                DiagnoseArg::Profile => DiagnoseKind::Profile,
                DiagnoseArg::Rescale => DiagnoseKind::Rescale,
            };
            diagnose_command(kind, &history, &opts, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { kind, config } => {
            let cfg = load_config(&config)?;
            let kind = match kind {
                CheckArg::Clifford => CheckKind::Clifford,
                CheckArg::Gauge => CheckKind::Gauge,
                CheckArg::Gradient => CheckKind::Gradient,
            };
            let (_, ok) = check_command(kind, &cfg)?;
            if ok {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::FAILURE)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

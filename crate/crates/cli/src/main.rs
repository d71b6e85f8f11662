//! `abcgan`: data generation, single runs, grid sweeps and reports for the
//! ABC-GAN misspecification experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use abcgan::experiments::{DatasetId, TableFormat};
use clap::{Args, Parser, Subcommand};

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "abcgan", version, about = "ABC-GAN misspecification experiments")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
    /// Run every repetition of one grid cell.
    Run(RunArgs),
    /// Run the full grid from a config and write tables and boxplot inputs.
    Grid(GridArgs),
    /// Rebuild tables and boxplot inputs from cached run results.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, default_value = "friedman3")]
    pub dataset: DatasetId,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of the additive response noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// `dataset,prior,variant,variance,bias`, e.g. `friedman3,linear,mgan,1,1`.
    #[arg(long)]
    pub cell: String,
    /// Overrides `experiment.master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `output.workers`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides `experiment.master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Table formats to write.
    #[arg(long = "format", value_delimiter = ',', default_value = "md,csv")]
    pub formats: Vec<TableFormat>,
    /// Suppress per-run progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory of an earlier `grid` or `run`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value = "md")]
    pub format: TableFormat,
    /// Where to write reports; defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Drop runs with MAE at or above the threshold from boxplot statistics.
    #[arg(long)]
    pub filter_outliers: bool,
    /// Leave runs with MAE at or above the threshold out of table means.
    #[arg(long)]
    pub exclude_outliers: bool,
    #[arg(long, default_value_t = abcgan::experiments::OUTLIER_THRESHOLD)]
    pub outlier_threshold: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let outcome = match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Run(a) => commands::run(&a),
        Command::Grid(a) => commands::grid(&a),
        Command::Report(a) => commands::report(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                commands::CliError::Usage(_) | commands::CliError::Config(_) => EXIT_USAGE,
                commands::CliError::Runtime(_) => EXIT_RUNTIME,
            })
        }
    }
}

//! `mcflash` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mcflash::Error;

#[derive(Parser, Debug)]
#[command(name = "mcflash", version, about = "In-flash bitwise operation simulator for MLC NAND")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// TOML config layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config value, e.g. `--set ssd.t_r_us=40`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output directory; each command writes `<command>.<format>` there.
    /// Without it rows go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-state decode of each op against its Boolean function.
    TruthTable {
        #[arg(long, value_delimiter = ',')]
        ops: Vec<String>,
        /// Also print the per-reference offset plan of each op.
        #[arg(long)]
        plans: bool,
    },
    /// Bit error rate over random operand pages at one wear point.
    Rber {
        #[arg(long, value_delimiter = ',', required = true)]
        op: Vec<String>,
        #[arg(long, default_value_t = 0)]
        pe: u32,
        #[arg(long, default_value_t = 0.0)]
        hours: f64,
        /// Defaults to `lab.pages`.
        #[arg(long)]
        pages: Option<usize>,
    },
    /// Bit error rate while one read reference is stepped across a range.
    Sweep {
        #[arg(long)]
        op: String,
        #[arg(long)]
        reference: String,
        /// Signed DAC steps; defaults to the register's legal range.
        #[arg(long, allow_hyphen_values = true)]
        from: Option<i32>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<i32>,
        /// Defaults to `lab.sweep_pages_per_point`.
        #[arg(long)]
        pages: Option<usize>,
        #[arg(long, default_value_t = 0)]
        pe: u32,
        #[arg(long, default_value_t = 0.0)]
        hours: f64,
    },
    /// Program/erase-cycles real blocks, then measures bit error rate.
    Cycle {
        #[arg(long)]
        cycles: u32,
        #[arg(long, value_delimiter = ',', default_value = "and")]
        op: Vec<String>,
        #[arg(long, default_value_t = 32)]
        pages: usize,
    },
    /// Re-reads the same stored pages after successive retention bakes.
    Bake {
        /// Cumulative bake times in hours.
        #[arg(long, value_delimiter = ',', required = true)]
        hours: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        pe: u32,
        #[arg(long, default_value = "and")]
        op: String,
        #[arg(long, default_value_t = 64)]
        pages: usize,
    },
    /// Fits wear coefficients (and optionally baseline parameters).
    Calibrate {
        /// Fit the analytic ParaBit / Flash-Cosmos parameters instead.
        #[arg(long)]
        baselines: bool,
    },
    /// Single-channel execution timelines with per-phase breakdown.
    Timeline {
        #[arg(long, value_delimiter = ',', default_value = "osc,isc,ifc-aligned,ifc-nonaligned")]
        paradigms: Vec<String>,
        /// Op whose read latency is charged; without it every read is t_R.
        #[arg(long)]
        op: Option<String>,
    },
    /// Application workload projections across paradigms.
    Workload {
        #[arg(long)]
        kind: String,
        /// Image counts: `a,b,c` or `lo..hi:step`.
        #[arg(long)]
        images: Option<String>,
        /// Months: `1..12` or a list.
        #[arg(long)]
        months: Option<String>,
        /// Skip the functional check on the simulator.
        #[arg(long)]
        no_check: bool,
    },
    /// Short end-to-end tour: truth tables, a fresh error-rate run, timelines.
    Demo {
        #[arg(long, default_value_t = 16)]
        pages: usize,
    },
}

/// Failures mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration.
    Usage(String),
    /// A check reported FAIL.
    Check(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownName { .. } | Error::ScaleOutOfRange(..) | Error::Config(_) | Error::Toml(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("FAIL: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

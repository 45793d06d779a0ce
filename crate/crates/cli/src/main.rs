use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ksgreen::io::RunConfig;
use ksgreen::Error;

mod commands;

#[derive(Parser)]
#[command(name = "ksgreen", version, about = "Green's-function time stepping for the Kuramoto-Sivashinsky equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Configuration file with `key = value` lines
    #[arg(long, short)]
    pub config: PathBuf,
    /// Rebuild operators even when a valid cache exists
    #[arg(long)]
    pub force: bool,
    /// Worker threads (overrides the config)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write decimal text instead of binary frames
    #[arg(long)]
    pub csv: bool,
    /// Print the resolved parameters and exit
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build and cache the convolution operators
    Build(Common),
    /// Seed and integrate, writing frames and checkpoints
    Run(Common),
    /// Quadrature error of the operators on the analytic test function
    Quadtest(Common),
    /// SBDF convergence against the travelling-wave solution
    Convtest(Common),
    /// Stability verdicts over a grid of viscosities and step sizes
    Stabscan(Common),
    /// Boundary-layer rms profile in scaled variables
    Blayer(Common),
    /// Resample a time series onto an even scaled grid
    ExportContours(Common),
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_REAL_ROOTS: u8 = 3;
pub const EXIT_BLOW_UP: u8 = 4;
pub const EXIT_IO: u8 = 5;
pub const EXIT_RESOURCE: u8 = 6;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Mismatch(_) => EXIT_CONFIG,
        Error::RealRoots { .. } => EXIT_REAL_ROOTS,
        Error::BlowUp { .. } => EXIT_BLOW_UP,
        Error::Io(_) | Error::Format(_) => EXIT_IO,
        Error::Resource { .. } => EXIT_RESOURCE,
        _ => EXIT_FAILURE,
    }
}

fn load(common: &Common) -> ksgreen::Result<RunConfig> {
    let text = std::fs::read_to_string(&common.config)?;
    let mut cfg = RunConfig::parse_with_env(&text, std::env::vars())?;
    if let Some(w) = common.workers {
        cfg.workers = w.max(1);
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, run): (&Common, fn(&RunConfig, &Common) -> ksgreen::Result<()>) = match &cli.command {
        Command::Build(c) => (c, commands::build),
        Command::Run(c) => (c, commands::run),
        Command::Quadtest(c) => (c, commands::quadtest),
        Command::Convtest(c) => (c, commands::convtest),
        Command::Stabscan(c) => (c, commands::stabscan),
        Command::Blayer(c) => (c, commands::blayer),
        Command::ExportContours(c) => (c, commands::export_contours),
    };
    let result = load(common).and_then(|cfg| {
        if common.dry_run {
            println!("{cfg:#?}");
            return commands::dry_run(&cfg, &cli_name(&cli.command));
        }
        run(&cfg, common)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn cli_name(cmd: &Command) -> String {
    match cmd {
        Command::Build(_) => "build",
        Command::Run(_) => "run",
        Command::Quadtest(_) => "quadtest",
        Command::Convtest(_) => "convtest",
        Command::Stabscan(_) => "stabscan",
        Command::Blayer(_) => "blayer",
        Command::ExportContours(_) => "export-contours",
    }
    .to_string()
}

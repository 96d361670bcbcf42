mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use fairride_core::matching::PolicyKind;

use config::{CliError, FileConfig};

/// Ride-sharing matching simulator with fairness reporting.
#[derive(Parser)]
#[command(name = "fairride", version)]
struct Cli {
    /// TOML file with defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy and write its event log.
    Simulate(SimulateArgs),
    /// Run several policies on the same inputs and write a joined report.
    Compare(CompareArgs),
    /// Compute the dashboard report of a log.
    Report(ReportArgs),
    /// Check a log against the network and constraints; exit 0 iff clean.
    Validate(ValidateArgs),
    /// Serve logs over HTTP.
    Serve(ServeArgs),
    /// Write a grid network with square zones as CSV.
    GenerateGrid(GridArgs),
}

#[derive(Args, Clone, Default)]
pub struct NetworkArgs {
    /// Nodes CSV (node_id,lat,lon).
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Edges CSV (from,to,cost_s).
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Zones CSV (node_id,zone_id,zone_name).
    #[arg(long)]
    pub zones: Option<PathBuf>,
    /// Requests CSV.
    #[arg(long, conflicts_with = "synthetic")]
    pub demand: Option<PathBuf>,
    /// Generate Poisson demand instead of reading --demand.
    #[arg(long)]
    pub synthetic: bool,
    /// Mean synthetic arrivals per epoch [default: 100].
    #[arg(long)]
    pub rate: Option<f64>,
    /// Epochs to simulate [default: 1440].
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Fleet size [default: 1000].
    #[arg(long)]
    pub taxis: Option<u32>,
    /// Seats per taxi [default: 4].
    #[arg(long)]
    pub capacity: Option<u32>,
    /// Seconds [default: 300].
    #[arg(long)]
    pub max_pickup_delay: Option<u64>,
    /// Seconds [default: 600].
    #[arg(long)]
    pub max_detour_delay: Option<u64>,
    /// Seconds [default: 60].
    #[arg(long)]
    pub epoch_length: Option<u64>,
    /// Largest request group one taxi takes per epoch [default: 3].
    #[arg(long)]
    pub max_group_size: Option<u32>,
    /// Seeds placement and synthetic demand [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

fn policy(s: &str) -> Result<PolicyKind, String> {
    PolicyKind::from_str(s)
}

#[derive(Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// rpd|greedy [default: rpd].
    #[arg(long, value_parser = policy)]
    pub policy: Option<PolicyKind>,
    /// Where to write the log.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated [default: rpd,greedy].
    #[arg(long, value_delimiter = ',', value_parser = policy)]
    pub policies: Vec<PolicyKind>,
    /// Directory for one log per policy and compare.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Event log to summarise.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Defaults to the zones file recorded in the log.
    #[arg(long)]
    pub zones: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Logs to register; the run id is the file stem.
    #[arg(long, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long)]
    pub zones: Option<PathBuf>,
    /// [default: 127.0.0.1]
    #[arg(long)]
    pub host: Option<String>,
    /// [default: 8080]
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Args)]
pub struct GridArgs {
    /// [default: 10]
    #[arg(long)]
    pub rows: Option<u32>,
    /// [default: 10]
    #[arg(long)]
    pub cols: Option<u32>,
    /// Seconds per edge in both directions [default: 60].
    #[arg(long)]
    pub edge_cost: Option<u64>,
    /// Zone side length in nodes [default: 2].
    #[arg(long)]
    pub zone_block: Option<u32>,
    /// Receives nodes.csv, edges.csv and zones.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Simulate(a) => commands::simulate(a, &file),
        Command::Compare(a) => commands::compare(a, &file),
        Command::Report(a) => commands::report(a, &file),
        Command::Validate(a) => commands::validate(a, &file),
        Command::Serve(a) => commands::serve(a, &file),
        Command::GenerateGrid(a) => commands::generate_grid(a, &file),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.class as u8)
        }
    }
}

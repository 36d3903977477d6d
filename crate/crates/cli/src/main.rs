use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use knpemi::error::Error;

mod commands;
mod manifest;

#[derive(Parser, Debug)]
#[command(name = "knpemi", version, about = "KNP-EMI electrodiffusion simulations on explicit cell geometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a scenario and write probe series, snapshots and a manifest.
    Run(RunArgs),
    /// Manufactured-solution convergence study on the unit-square benchmark.
    Converge(ConvergeArgs),
    /// Paired KNP-EMI / EMI run on one mesh with a difference report.
    Compare(CompareArgs),
    /// Extract point series from a directory of VTK snapshots.
    Probe(ProbeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Built-in scenario: A, B, C1, C2, C3, D or D-reduced.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub scenario: Option<String>,
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Time step override, ms.
    #[arg(long)]
    pub dt_ms: Option<f64>,
    /// End time override, ms.
    #[arg(long)]
    pub end_ms: Option<f64>,
    /// Reserved; the solver uses no random numbers.
    #[arg(long)]
    pub seedless: bool,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Snapshot interval, e.g. `1ms` or `0.5`.
    #[arg(long)]
    pub snapshot_every: Option<String>,
}

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    /// Mesh levels n (n × n squares), each 8 times a power of two.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub degree: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seedless: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// `from-initial` or `<σi>,<σe>` in µS/µm.
    #[arg(long, default_value = "from-initial")]
    pub emi_sigma: String,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Directory holding `.vtk` snapshots.
    #[arg(long)]
    pub snapshots: PathBuf,
    /// Probe point in µm, `x,y` or `x,y,z`; repeatable.
    #[arg(long = "at", required = true)]
    pub points: Vec<String>,
    /// Point fields to extract; all fields when omitted.
    #[arg(long = "field")]
    pub fields: Vec<String>,
    /// Read the intracellular side at points on a membrane.
    #[arg(long)]
    pub intracellular: bool,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Converge(a) => commands::converge(&a),
        Command::Compare(a) => commands::compare(&a),
        Command::Probe(a) => commands::probe(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &Error) -> ExitCode {
    let cat = e.category();
    let line = serde_json::json!({
        "error": cat.name(),
        "exit_code": cat.exit_code(),
        "message": e.to_string(),
    });
    eprintln!("{line}");
    ExitCode::from(cat.exit_code() as u8)
}

// SPDX-License-Identifier: Apache-2.0

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use snacluster::netlist::units::parse_value;

/// Static noise analysis of victim/aggressor clusters.
#[derive(Debug, Parser)]
#[command(name = "snacluster", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pre-characterize a cell.
    #[command(subcommand)]
    Characterize(Characterize),
    /// Reduce an interconnect netlist to coupled π models.
    Reduce(ReduceArgs),
    /// Analyze a cluster in one mode and check the result against the NRC.
    Analyze(AnalyzeArgs),
    /// Run all three modes on a cluster and write the error table.
    Compare(CompareArgs),
}

#[derive(Debug, Subcommand)]
enum Characterize {
    /// Tabulate the output current over (v_in, v_out).
    Vccs(VccsArgs),
    /// Fit a ramp-behind-resistor driver model.
    Thevenin(TheveninArgs),
    /// Build a noise rejection curve.
    Nrc(NrcArgs),
    /// Input capacitance of a receiver pin.
    Rcap(RcapArgs),
}

fn value(s: &str) -> Result<f64, String> {
    parse_value(s).ok_or_else(|| format!("`{s}` is not a number"))
}

fn pin_value(s: &str) -> Result<(String, f64), String> {
    let (p, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected PIN=VALUE, got `{s}`"))?;
    Ok((p.trim().to_string(), value(v.trim())?))
}

fn net_port(s: &str) -> Result<(String, String), String> {
    let (n, p) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NET=PORT, got `{s}`"))?;
    Ok((n.trim().to_string(), p.trim().to_string()))
}

#[derive(Debug, Args)]
struct CellArgs {
    /// Cell netlist.
    #[arg(long)]
    cell: PathBuf,
    /// Signal input pin.
    #[arg(long = "in")]
    in_pin: String,
    /// Output pin.
    #[arg(long = "out")]
    out_pin: String,
    #[arg(long, value_parser = value)]
    vdd: f64,
    /// Supply pin, tied to vdd when the cell has it.
    #[arg(long, default_value = "vdd")]
    supply: String,
    /// Other pins held at fixed levels, as PIN=VALUE.
    #[arg(long = "fix", value_parser = pin_value)]
    fixed: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
pub struct VccsArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Points per table axis.
    #[arg(long, default_value_t = 25)]
    grid: usize,
    /// Side inputs whose level (0 or vdd) is chosen for the largest output
    /// response to the glitch from --vin-q to --vin-noisy.
    #[arg(long = "side")]
    side: Vec<String>,
    #[arg(long, value_parser = value)]
    vin_q: Option<f64>,
    #[arg(long, value_parser = value)]
    vin_noisy: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TheveninArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Probe load capacitance.
    #[arg(long, value_parser = value)]
    load: f64,
    /// Input ramp start time.
    #[arg(long, value_parser = value, default_value = "0")]
    t0: f64,
    /// Input ramp duration.
    #[arg(long, value_parser = value)]
    slew: f64,
    /// Input level before the ramp (default 0).
    #[arg(long, value_parser = value)]
    from: Option<f64>,
    /// Input level after the ramp (default vdd).
    #[arg(long, value_parser = value)]
    to: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct NrcArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Comma-separated glitch widths.
    #[arg(long, value_parser = value, value_delimiter = ',', required = true)]
    widths: Vec<f64>,
    /// Load on the receiver output.
    #[arg(long, value_parser = value, default_value = "1f")]
    load: f64,
    /// Quiet input level; glitches head for the opposite rail.
    #[arg(long, value_parser = value, default_value = "0")]
    quiet_in: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RcapArgs {
    #[arg(long)]
    cell: PathBuf,
    #[arg(long = "in")]
    input: String,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Interconnect netlist with every cluster net.
    #[arg(long)]
    netlist: PathBuf,
    /// Net and its driving-point node, as NET=PORT.
    #[arg(long = "net", value_parser = net_port, required = true)]
    nets: Vec<(String, String)>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Oracle,
    Macromodel,
    Superposition,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Oracle => "oracle",
            Mode::Macromodel => "macromodel",
            Mode::Superposition => "superposition",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimFlags {
    /// Override [sim] t_stop.
    #[arg(long, value_parser = value)]
    t_stop: Option<f64>,
    /// Override [sim] dt.
    #[arg(long, value_parser = value)]
    dt: Option<f64>,
    /// Align all noise peaks before analysis (overrides [sim] align).
    #[arg(long)]
    align: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Cluster configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Directory for the waveform and report files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comparison table path.
    #[arg(short, long, default_value = "compare.csv")]
    output: PathBuf,
    #[command(flatten)]
    sim: SimFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Characterize(c) => match c {
            Characterize::Vccs(a) => commands::characterize_vccs(&a),
            Characterize::Thevenin(a) => commands::characterize_thevenin(&a),
            Characterize::Nrc(a) => commands::characterize_nrc(&a),
            Characterize::Rcap(a) => commands::characterize_rcap(&a),
        },
        Command::Reduce(a) => commands::reduce(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_ERROR)
        }
    }
}

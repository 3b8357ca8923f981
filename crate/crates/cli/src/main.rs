//! `itf`: simulate interferometer records, map them to azimuth/elevation,
//! benchmark processing chains and plot maps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod plot;

use std::path::Path;
use std::process::ExitCode;

use clap::{Arg, ArgAction, Command};

use config::{RunConfig, Settings, KEYS};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    MissingInput(String),
    Write(String),
    Processing(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::MissingInput(_) => 4,
            CliError::Write(_) => 5,
            CliError::Processing(_) => 6,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::MissingInput(m) => write!(f, "missing input: {m}"),
            CliError::Write(m) => write!(f, "write failed: {m}"),
            CliError::Processing(m) => write!(f, "{m}"),
        }
    }
}

fn cli() -> Command {
    let mut cmd = Command::new("itf")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Broadband VHF interferometer lightning mapping")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_name("FILE")
                .help("flat `key = value` settings file; flags override it"),
        )
        .subcommand(Command::new("simulate").about("Synthesize a three-channel record with ground truth"))
        .subcommand(Command::new("map").about("Estimate per-window azimuth and elevation of a record"))
        .subcommand(Command::new("bench").about("Score filter/correlation/interpolation combinations on simulated records"))
        .subcommand(Command::new("plot").about("Render a map CSV as an SVG scatter"));
    for (key, default, help) in KEYS {
        let help = if default.is_empty() { help.to_string() } else { format!("{help} [default: {default}]") };
        let mut arg = Arg::new(*key).long(*key).global(true).action(ArgAction::Set).help(help);
        if matches!(*key, "aug-noise-az" | "aug-flip") {
            arg = arg.num_args(0..=1).default_missing_value("true");
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

fn run() -> Result<String, CliError> {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut settings = match sub.get_one::<String>("config") {
        Some(path) => Settings::parse_file(Path::new(path))?,
        None => Settings::default(),
    };
    for (key, _, _) in KEYS {
        if let Some(v) = sub.get_one::<String>(key) {
            settings.set(key, v)?;
        }
    }
    let cfg = RunConfig::resolve(settings)?;
    match name {
        "simulate" => commands::simulate(&cfg),
        "map" => commands::map(&cfg),
        "bench" => commands::bench(&cfg),
        "plot" => commands::plot(&cfg),
        other => unreachable!("unhandled subcommand {other}"),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("itf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use aldous_core::tolerances::ToleranceTable;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use commands::Artifact;
use config::{Format, Params};

#[derive(Parser)]
#[command(version, about = "Spectral gaps of random walks and interchange processes on lattice subsets")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// JSON job file: {"schema_version": 1, "command": ..., "params": {...}}
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
enum Command {
    /// Spectral gap of one generator
    Gap,
    /// Full spectrum of one generator
    Spectrum,
    /// Walk spectrum contained in the interchange spectrum
    Containment,
    /// Compare interchange and walk gaps
    AldousCheck,
    /// Random trace-inequality trials
    TraceFuzz,
    /// Equalization pipeline on a nested sequence of rate functions
    Sequence,
    /// Gaps and bounds along the traceable lattice sequence
    RatioTable,
}

impl Command {
    const ALL: [Command; 7] = [
        Command::Gap,
        Command::Spectrum,
        Command::Containment,
        Command::AldousCheck,
        Command::TraceFuzz,
        Command::Sequence,
        Command::RatioTable,
    ];

    fn name(self) -> &'static str {
        match self {
            Command::Gap => "gap",
            Command::Spectrum => "spectrum",
            Command::Containment => "containment",
            Command::AldousCheck => "aldous-check",
            Command::TraceFuzz => "trace-fuzz",
            Command::Sequence => "sequence",
            Command::RatioTable => "ratio-table",
        }
    }

    fn from_name(name: &str) -> Option<Command> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

pub enum Failure {
    Usage(String),
    Core(aldous_core::Error),
}

impl From<aldous_core::Error> for Failure {
    fn from(e: aldous_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Core(e.into())
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(aldous_core::Error::Postcondition(_)) => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "{msg}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn without_nulls(value: Value) -> Value {
    match value {
        Value::Object(map) => Value::Object(map.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        other => other,
    }
}

fn render(command: Command, params: &Params, artifact: &Artifact) -> Result<String, Failure> {
    let inputs = without_nulls(serde_json::to_value(params)?);
    let tolerances = ToleranceTable::default();
    match params.format.unwrap_or(artifact.default_format) {
        Format::Json => {
            let mut doc = match &artifact.json {
                Value::Object(map) => map.clone(),
                other => [("result".to_string(), other.clone())].into_iter().collect(),
            };
            doc.insert("command".into(), json!(command.name()));
            doc.insert("inputs".into(), inputs);
            doc.insert("tolerances".into(), serde_json::to_value(&tolerances)?);
            let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut text = format!("# command={}\n", command.name());
            if let Value::Object(map) = &inputs {
                for (k, v) in map {
                    text.push_str(&format!("# input.{k}={v}\n"));
                }
            }
            for line in tolerances.header_lines() {
                text.push_str(&format!("# {line}\n"));
            }
            text.push_str(&artifact.csv);
            Ok(text)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let (file_command, file_params) = match &cli.config {
        Some(path) => {
            let job = config::load(path).map_err(Failure::Usage)?;
            let command = match job.command.as_deref() {
                Some(name) => Some(
                    Command::from_name(name)
                        .ok_or_else(|| Failure::Usage(format!("unknown command {name:?} in config")))?,
                ),
                None => None,
            };
            (command, job.params)
        }
        None => (None, Params::default()),
    };
    let command = cli
        .command
        .or(file_command)
        .ok_or_else(|| Failure::Usage("no command given on the command line or in --config".into()))?;
    let params = cli.params.overlay(file_params);

    let jobs = params.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))?;

    let artifact = match command {
        Command::Gap => commands::gap(&params)?,
        Command::Spectrum => commands::spectrum(&params)?,
        Command::Containment => commands::containment(&params)?,
        Command::AldousCheck => commands::aldous_check(&params)?,
        Command::TraceFuzz => commands::trace_fuzz_cmd(&params)?,
        Command::Sequence => commands::sequence(&params)?,
        Command::RatioTable => commands::ratio_table(&params)?,
    };
    let text = render(command, &params, &artifact)?;
    match &params.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    let mut stderr = std::io::stderr().lock();
    for v in &artifact.violations {
        writeln!(stderr, "{}", serde_json::to_string(v)?)?;
    }
    Ok(artifact.violations.is_empty())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Graph {
    Hypercube,
    Path,
    Complete,
    Star,
    /// Prefix `V_N` of the traceable lattice sequence in dimension `d`.
    Sequence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessArg {
    Rw,
    Ip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Auto,
    Dense,
    Lanczos,
}

/// Job parameters. Every field can come from a flag or from the config
/// file; flags win.
#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Lattice dimension
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Hypercube side length
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Number of vertices
    #[arg(long = "N", global = true)]
    #[serde(rename = "N")]
    pub big_n: Option<usize>,
    /// Largest side of the traceable sequence
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default 1)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Largest N for which interchange-process gaps are computed
    #[arg(long, global = true)]
    pub ip_cap: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub graph: Option<Graph>,
    #[arg(long, global = true, value_enum)]
    pub process: Option<ProcessArg>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Vertex-set JSON file; rates are the induced nearest-neighbour rates
    #[arg(long, global = true)]
    pub vertices: Option<PathBuf>,
    /// Rate-function JSON file (an array of them for `sequence`)
    #[arg(long, global = true)]
    pub rates: Option<PathBuf>,
    /// Binary file for the gap eigenvector
    #[arg(long, global = true)]
    pub eigenvector: Option<PathBuf>,
    #[arg(long, global = true)]
    pub exhaustive_z2: bool,
    #[arg(long, global = true)]
    pub max_vertices: Option<usize>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
}

impl Params {
    /// `self` over `base`, field by field.
    pub fn overlay(self, base: Params) -> Params {
        Params {
            d: self.d.or(base.d),
            n: self.n.or(base.n),
            big_n: self.big_n.or(base.big_n),
            n_max: self.n_max.or(base.n_max),
            tol: self.tol.or(base.tol),
            seed: self.seed.or(base.seed),
            jobs: self.jobs.or(base.jobs),
            ip_cap: self.ip_cap.or(base.ip_cap),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
            graph: self.graph.or(base.graph),
            process: self.process.or(base.process),
            method: self.method.or(base.method),
            vertices: self.vertices.or(base.vertices),
            rates: self.rates.or(base.rates),
            eigenvector: self.eigenvector.or(base.eigenvector),
            exhaustive_z2: self.exhaustive_z2 || base.exhaustive_z2,
            max_vertices: self.max_vertices.or(base.max_vertices),
            trials: self.trials.or(base.trials),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub schema_version: u32,
    pub command: Option<String>,
    #[serde(default)]
    pub params: Params,
}

pub fn load(path: &Path) -> Result<JobConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let config: JobConfig =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(format!(
            "{}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
            path.display(),
            config.schema_version
        ));
    }
    Ok(config)
}

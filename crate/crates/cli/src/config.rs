use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(name = "dnls-lab", version, about = "Resonance classification, simulation and lattice checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resonance quantities and the regime claims for (alpha, beta, gamma), d, s.
    Classify(Opts),
    /// Pseudo-spectral run from seeded random data.
    Simulate(Opts),
    /// Amplitude ODE of one plane-wave triple.
    Ode(Opts),
    /// Ill-posedness constructions, single runs or sweeps.
    Experiment(Opts),
    /// Worst lattice counts in the annulus-strip intersection.
    VerifyCounting(Opts),
    /// Smallest resonance modulation over dyadic shells.
    VerifyModulation(Opts),
    /// PDE against ODE on a construction's three modes.
    Crosscheck(Opts),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Simulate(_) => "simulate",
            Command::Ode(_) => "ode",
            Command::Experiment(_) => "experiment",
            Command::VerifyCounting(_) => "verify-counting",
            Command::VerifyModulation(_) => "verify-modulation",
            Command::Crosscheck(_) => "crosscheck",
        }
    }

    pub fn opts(&self) -> &Opts {
        match self {
            Command::Classify(o)
            | Command::Simulate(o)
            | Command::Ode(o)
            | Command::Experiment(o)
            | Command::VerifyCounting(o)
            | Command::VerifyModulation(o)
            | Command::Crosscheck(o) => o,
        }
    }
}

/// Flags shared by every subcommand. Any flag overrides the same key of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub dim: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<i64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub level: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,
    #[arg(long = "M", value_delimiter = ',')]
    pub m: Option<Vec<u64>>,
    /// Frequency relation for verify-modulation: "i,j;k" or "all".
    #[arg(long)]
    pub relation: Option<String>,
    /// Directory receiving report.json and data.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with the command's parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    /// The run itself broke down (for instance the integrator diverged).
    Failed(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Failed(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl From<dnls_core::Error> for CliError {
    fn from(e: dnls_core::Error) -> Self {
        match e {
            dnls_core::Error::Diverged { .. } => CliError::Failed(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// `--config` contents with the flags laid over them.
pub fn merged(opts: &Opts) -> Result<Map<String, Value>, CliError> {
    let mut map = match &opts.config {
        None => Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
                Err(e) => return Err(CliError::Config(format!("{}: {e}", path.display()))),
            }
        }
    };
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    };
    put("alpha", opts.alpha.clone().map(Value::from));
    put("beta", opts.beta.clone().map(Value::from));
    put("gamma", opts.gamma.clone().map(Value::from));
    put("dim", opts.dim.map(Value::from));
    put("s", opts.s.map(Value::from));
    put("N", opts.n.map(Value::from));
    put("delta", opts.delta.map(Value::from));
    put("T", opts.t.map(Value::from));
    put("case", opts.case.clone().map(Value::from));
    put("level", opts.level.clone().map(Value::from));
    put("sigma", opts.sigma.clone().map(Value::from));
    put("M", opts.m.clone().map(Value::from));
    put("relation", opts.relation.clone().map(Value::from));
    put("seed", opts.seed.map(Value::from));
    Ok(map)
}

pub fn typed<T: DeserializeOwned>(map: &Map<String, Value>) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(map.clone())).map_err(|e| CliError::Config(e.to_string()))
}

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sampdev_core::{Error, MCConfig, ProcessSpec, Result, Sided};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(name = "sampdev", version, about = "Sampling-rate calibration and deviation checks for self-similar processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the calibrated sampling scales at one tolerance.
    Calibrate(CalibrateArgs),
    /// Monte Carlo deviation probabilities against the limit law.
    Verify(VerifyArgs),
    /// Condition ratios of the calibration algebra.
    Probe(ProbeArgs),
    /// Risk levels with a supremum certificate.
    #[command(subcommand)]
    Quantile(QuantileCommand),
}

#[derive(Debug, Subcommand)]
pub enum QuantileCommand {
    /// Level from simulated grid maxima.
    Sim(QuantileSimArgs),
    /// Level from a stationary tail model.
    Stationary(QuantileStationaryArgs),
}

/// Process selector shared by every command.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessOpts {
    /// bm, stable or lfsm.
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Skewness of the stable process (default -1).
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Scale of the stable process (default 1).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub hurst: Option<f64>,
    /// Variance rate of the Brownian motion (default 1).
    #[arg(long)]
    pub var: Option<f64>,
    /// Noise scale of the LFSM (default 1).
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// 1 (one-sided) or 2 (two-sided).
    #[arg(long)]
    pub sided: Option<String>,
}

impl ProcessOpts {
    pub fn spec(&self) -> Result<ProcessSpec> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("--{name} is required")));
        match self.process.as_deref() {
            Some("bm") | Some("brownian") => ProcessSpec::brownian(self.var.unwrap_or(1.0)),
            Some("stable") => {
                let alpha = need(self.alpha, "alpha")?;
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(Error::Domain(format!("stable alpha must lie in (1, 2), got {alpha}")));
                }
                ProcessSpec::stable_levy(alpha, self.beta.unwrap_or(-1.0), self.sigma.unwrap_or(1.0))
            }
            Some("lfsm") => {
                let alpha = need(self.alpha, "alpha")?;
                if !(alpha > 1.0 && alpha < 2.0) {
                    return Err(Error::Domain(format!("lfsm alpha must lie in (1, 2), got {alpha}")));
                }
                ProcessSpec::lfsm(alpha, need(self.hurst, "hurst")?, self.noise_scale.unwrap_or(1.0))
            }
            Some(other) => Err(Error::Config(format!("unknown process {other:?}; expected bm, stable or lfsm"))),
            None => Err(Error::Config("--process is required".into())),
        }
    }

    pub fn sided(&self) -> Result<Sided> {
        self.sided.as_deref().map_or(Ok(Sided::One), str::parse)
    }
}

/// Output and run-control flags.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOpts {
    #[arg(long)]
    pub n_paths: Option<u64>,
    #[arg(long)]
    pub refine_m: Option<usize>,
    #[arg(long)]
    pub ci_level: Option<f64>,
    #[arg(long)]
    pub path_cap: Option<usize>,
    /// Master seed; drawn from entropy when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RunOpts {
    pub fn mc_config(&self, seed: u64) -> MCConfig {
        let d = MCConfig::default();
        MCConfig {
            n_paths: self.n_paths.unwrap_or(d.n_paths),
            refine_m: self.refine_m.unwrap_or(d.refine_m),
            seed,
            ci_level: self.ci_level.unwrap_or(d.ci_level),
            path_cap: self.path_cap.unwrap_or(d.path_cap),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct OutOpts {
    /// Output directory; results go to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing result files.
    #[arg(long)]
    #[serde(skip)]
    pub force: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessOpts,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutOpts,
    /// Comma-separated tolerance schedule.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub epsilon: Option<Vec<f64>>,
    /// Comma-separated deviation grid (default 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Fixed sampling interval; the threshold is then epsilon itself.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutOpts,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub r: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantileSimArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessOpts,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
    #[arg(long, value_parser = parse_p)]
    pub p: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Deviation coordinate; taken from p through the limit law when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantileStationaryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub process: ProcessOpts,
    /// Two-column `u,tail` table; `#` starts a comment.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_parser = parse_p)]
    pub p: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
    /// Explicit sampling interval, overriding the process calibration.
    #[arg(long)]
    pub q: Option<f64>,
    /// Explicit deviation scale, overriding the process calibration.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn parse_p(s: &str) -> std::result::Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("p must lie in (0, 1), got {p}"))
    }
}

/// Overlay flags on the config file: any flag that was given wins.
pub fn merge_config<T: Serialize + DeserializeOwned + Default>(flags: &T, file: Option<&Path>) -> Result<T> {
    let Some(path) = file else {
        return Ok(from_json(serde_json::to_value(flags).map_err(cfg_err)?)?);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let known = match serde_json::to_value(T::default()).map_err(cfg_err)? {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    let mut merged = Map::new();
    for (k, v) in table {
        let key = k.replace('-', "_");
        if !known.contains_key(&key) {
            return Err(Error::Config(format!("{}: unknown key {k:?}", path.display())));
        }
        let v = serde_json::to_value(v).map_err(cfg_err)?;
        merged.insert(key, list_from_text(v));
    }
    if let Value::Object(given) = serde_json::to_value(flags).map_err(cfg_err)? {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    from_json(Value::Object(merged))
}

// Lets a file say `epsilon = "0.1,0.05"` as on the command line.
fn list_from_text(v: Value) -> Value {
    match &v {
        Value::String(s) if s.contains(',') => {
            let parts: Option<Vec<Value>> = s
                .split(',')
                .map(|p| p.trim().parse::<f64>().ok().and_then(|f| serde_json::Number::from_f64(f).map(Value::Number)))
                .collect();
            parts.map(Value::Array).unwrap_or(v)
        }
        _ => v,
    }
}

fn from_json<T: DeserializeOwned>(v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(cfg_err)
}

fn cfg_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("config: {e}"))
}

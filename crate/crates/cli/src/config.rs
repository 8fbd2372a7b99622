//! Flat run configuration: YAML or JSON file, overridden by `--set key=value` flags.

use std::fmt;
use std::path::{Path, PathBuf};

use flocklab::harness::{InitSpec, Sampler};
use flocklab::{CommunicationKernel, IntegratorSpec, Order, Scheme};
use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};

#[derive(Debug)]
pub enum ConfigError {
    /// Malformed input; the message names the file line or the flag.
    Parse(String),
    /// Well-formed input violating an invariant.
    Validation(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "ParseError: {m}"),
            ConfigError::Validation(m) => write!(f, "ValidationError: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    #[serde(alias = "SIMULATE")]
    Simulate,
    #[serde(alias = "STABILITY")]
    Stability,
    #[serde(alias = "MEANFIELD")]
    Meanfield,
    #[serde(alias = "KINETIC")]
    Kinetic,
    #[serde(alias = "CONTRACT")]
    Contract,
    #[serde(alias = "VERIFY")]
    Verify,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stability => "stability",
            Command::Meanfield => "meanfield",
            Command::Kinetic => "kinetic",
            Command::Contract => "contract",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SamplerName {
    UniformBox,
    GaussianTruncated,
    TwoCluster,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Alignment system, integrated through the first-order reformulation.
    SecondOrder,
    /// Alignment system integrated directly with step rejection near collisions.
    SecondOrderDirect,
    FirstOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorName {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub beta: f64,
    pub n: usize,
    pub seed: u64,
    /// Seed of the second member of paired experiments; defaults to `seed + 1`.
    pub seed_b: Option<u64>,
    pub sampler: SamplerName,
    pub file: Option<PathBuf>,
    pub x_range: (f64, f64),
    pub v_range: (f64, f64),
    pub zero_mean: bool,
    pub model: Model,
    pub integrator: IntegratorName,
    pub dt: f64,
    pub t_end: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub collision_gap: f64,
    pub max_step_halvings: u32,
    pub record_every: usize,
    pub p: Order,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    /// Worker threads for independent runs; 0 means one per hardware thread.
    pub threads: usize,
    pub ns: Vec<usize>,
    /// Number of log-spaced sample times (after `t = 0`) for stability and mean-field runs.
    pub sample_times: usize,
    pub m_nodes: usize,
    pub n_eta: usize,
    /// Stability runs: the second ensemble reuses the first one's natural velocities.
    pub same_omega: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            beta: 0.5,
            n: 64,
            seed: 0,
            seed_b: None,
            sampler: SamplerName::UniformBox,
            file: None,
            x_range: (-1.0, 1.0),
            v_range: (-1.0, 1.0),
            zero_mean: true,
            model: Model::SecondOrder,
            integrator: IntegratorName::Rk4,
            dt: 1e-3,
            t_end: 10.0,
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            collision_gap: 1e-8,
            max_step_halvings: 30,
            record_every: 100,
            p: Order::TWO,
            output_dir: PathBuf::from("out"),
            emit_svg: false,
            threads: 0,
            ns: vec![64, 128, 256, 512],
            sample_times: 64,
            m_nodes: 32,
            n_eta: 32,
            same_omega: false,
        }
    }
}

const KEYS: &[&str] = &[
    "command",
    "beta",
    "n",
    "seed",
    "seed_b",
    "sampler",
    "file",
    "x_range",
    "v_range",
    "zero_mean",
    "model",
    "integrator",
    "dt",
    "t_end",
    "abs_tol",
    "rel_tol",
    "collision_gap",
    "max_step_halvings",
    "record_every",
    "p",
    "output_dir",
    "emit_svg",
    "threads",
    "ns",
    "sample_times",
    "m_nodes",
    "n_eta",
    "same_omega",
];

fn parse_text(text: &str, origin: &str) -> Result<Mapping, ConfigError> {
    if text.trim().is_empty() {
        return Ok(Mapping::new());
    }
    // parse straight into the typed struct first so errors carry line numbers
    serde_yaml::from_str::<RunConfig>(text)
        .map_err(|e| ConfigError::Parse(format!("{origin}: {e}")))?;
    match serde_yaml::from_str::<Value>(text) {
        Ok(Value::Mapping(m)) => Ok(m),
        Ok(_) => Err(ConfigError::Parse(format!(
            "{origin}: expected a key-value mapping"
        ))),
        Err(e) => Err(ConfigError::Parse(format!("{origin}: {e}"))),
    }
}

/// Applies `key=value` overrides; values are read as YAML scalars or flow sequences.
fn apply_override(map: &mut Mapping, flag: &str) -> Result<(), ConfigError> {
    let (key, raw) = flag
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("flag --set {flag}: expected key=value")))?;
    let key = key.trim();
    if !KEYS.contains(&key) {
        return Err(ConfigError::Parse(format!(
            "flag --set {flag}: unknown key `{key}`"
        )));
    }
    let value: Value = serde_yaml::from_str(raw)
        .map_err(|e| ConfigError::Parse(format!("flag --set {flag}: {e}")))?;
    map.insert(Value::String(key.to_string()), value);
    Ok(())
}

pub fn parse_config(
    file: Option<&Path>,
    overrides: &[String],
    command: Option<Command>,
    output_dir: Option<&Path>,
) -> Result<RunConfig, ConfigError> {
    let mut map = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
            parse_text(&text, &path.display().to_string())?
        }
        None => Mapping::new(),
    };
    for flag in overrides {
        apply_override(&mut map, flag)?;
    }
    let mut cfg: RunConfig = serde_yaml::from_value(Value::Mapping(map))
        .map_err(|e| ConfigError::Parse(format!("flags: {e}")))?;
    if let Some(c) = command {
        cfg.command = Some(c);
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = dir.to_path_buf();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

impl RunConfig {
    pub fn command(&self) -> Command {
        self.command.expect("validated")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.command.is_none() {
            return Err(invalid(
                "no command given (set `command` or pass it on the command line)",
            ));
        }
        self.kernel()?;
        self.integrator_spec()
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        self.init_spec(self.seed)?
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        if self.sample_times == 0 {
            return Err(invalid("sample_times must be at least 1"));
        }
        if self.m_nodes == 0 || self.n_eta == 0 {
            return Err(invalid("m_nodes and n_eta must be at least 1"));
        }
        if self.ns.is_empty() || self.ns.contains(&0) || self.ns.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid(
                "ns must be a nonempty nondecreasing list of positive counts",
            ));
        }
        if self.sampler == SamplerName::File && self.file.is_none() {
            return Err(invalid("sampler FILE needs `file`"));
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<CommunicationKernel, ConfigError> {
        CommunicationKernel::new(self.beta)
            .map_err(|_| invalid(format!("beta must lie in (0,1), got {}", self.beta)))
    }

    pub fn integrator_spec(&self) -> IntegratorSpec {
        IntegratorSpec {
            scheme: match self.integrator {
                IntegratorName::Rk4 => Scheme::Rk4Fixed,
                IntegratorName::Rk45 => Scheme::Rk45Adaptive,
            },
            dt: self.dt,
            t_end: self.t_end,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            collision_gap: self.collision_gap,
            max_step_halvings: self.max_step_halvings,
        }
    }

    pub fn init_spec(&self, seed: u64) -> Result<InitSpec, ConfigError> {
        let sampler = match self.sampler {
            SamplerName::UniformBox => Sampler::UniformBox,
            SamplerName::GaussianTruncated => Sampler::GaussianTruncated,
            SamplerName::TwoCluster => Sampler::TwoCluster,
            SamplerName::File => Sampler::File(
                self.file
                    .clone()
                    .ok_or_else(|| invalid("sampler FILE needs `file`"))?,
            ),
        };
        Ok(InitSpec {
            sampler,
            x_range: self.x_range,
            v_range: self.v_range,
            n: self.n,
            seed,
            zero_mean: self.zero_mean,
        })
    }

    pub fn seed_b(&self) -> u64 {
        self.seed_b.unwrap_or(self.seed.wrapping_add(1))
    }
}

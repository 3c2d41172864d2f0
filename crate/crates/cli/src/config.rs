//! Run configuration: a JSON file whose fields can be overridden by flags.
//!
//! ```json
//! {
//!   "cluster": {"speeds": {"pattern": [1.0, 1.5], "repeat": 48},
//!               "cost": {"family": "nlogn"}},
//!   "scheme": "exact",
//!   "N": 1000000,
//!   "seed": 7,
//!   "output": "partition.csv",
//!   "dp_granularity": 1
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use hetpart::simulator::{KeyDistribution, SimParams};
use hetpart::{ClusterSpec, CostFunction, Scheme};
use serde::Deserialize;

use crate::error::{Classify, CmdResult, Failure};

/// Either a plain list or `{"pattern": [...], "repeat": n}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SpeedsConfig {
    List(Vec<f64>),
    Pattern { pattern: Vec<f64>, repeat: usize },
}

impl SpeedsConfig {
    pub fn expand(&self) -> CmdResult<Vec<f64>> {
        let speeds = match self {
            Self::List(v) => v.clone(),
            Self::Pattern { pattern, repeat } => {
                if pattern.is_empty() || *repeat == 0 {
                    return Err(Failure::invalid(
                        "speed pattern must be non-empty and repeat at least once",
                    ));
                }
                pattern.repeat(*repeat)
            }
        };
        if speeds.is_empty() {
            return Err(Failure::invalid("a cluster needs at least one speed"));
        }
        Ok(speeds)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub speeds: SpeedsConfig,
    #[serde(default)]
    pub cost: Option<CostFunction<f64>>,
    #[serde(default)]
    pub costs: Option<Vec<CostFunction<f64>>>,
}

impl ClusterConfig {
    pub fn load(path: &Path) -> CmdResult<Self> {
        read_json(path)
    }

    /// The true cost model(s), if the file names any.
    pub fn node_costs(&self, p: usize) -> CmdResult<Option<Vec<CostFunction<f64>>>> {
        match (&self.cost, &self.costs) {
            (Some(_), Some(_)) => Err(Failure::invalid("cluster sets both `cost` and `costs`; pick one")),
            (Some(c), None) => Ok(Some(vec![c.clone(); p])),
            (None, Some(cs)) => Ok(Some(cs.clone())),
            (None, None) => Ok(None),
        }
    }

    pub fn spec(&self) -> CmdResult<ClusterSpec<f64>> {
        let speeds = self.speeds.expand()?;
        match (&self.cost, &self.costs) {
            (Some(_), Some(_)) => Err(Failure::invalid("cluster sets both `cost` and `costs`; pick one")),
            (Some(c), None) => ClusterSpec::uniform(&speeds, c.clone()).invalid(),
            (None, Some(cs)) => ClusterSpec::unrelated(&speeds, cs.clone()).invalid(),
            (None, None) => Err(Failure::invalid(
                "cluster needs a `cost` (shared) or `costs` (one per node)",
            )),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub trials: Option<usize>,
    pub warmup: Option<usize>,
    pub oversample: Option<usize>,
    pub distribution: Option<KeyDistribution>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cluster: Option<ClusterConfig>,
    pub scheme: Option<String>,
    /// Schemes for `compare`.
    pub schemes: Option<Vec<String>>,
    #[serde(rename = "N", alias = "n")]
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub dp_granularity: Option<u64>,
    pub simulation: Option<SimParams<f64>>,
    #[serde(default)]
    pub bench: BenchConfig,
}

/// Flags shared by the commands that take a run config.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run config; the flags below override its fields.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Partitioning scheme: proportional, taylor, exact, multiplicative, asymptotic or dp.
    #[arg(short, long)]
    pub scheme: Option<String>,
    /// Number of items to split.
    #[arg(short = 'n', long = "n", value_name = "N")]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated speeds, replacing the config's.
    #[arg(long, value_delimiter = ',')]
    pub speeds: Option<Vec<f64>>,
    /// Shared cost: a family name (linear, nlogn) or a JSON cost object.
    #[arg(long)]
    pub cost: Option<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Unit size for the dp scheme.
    #[arg(long)]
    pub granularity: Option<u64>,
}

/// A config with flags applied, before any command-specific checks.
#[derive(Debug, Clone)]
pub struct Settings {
    pub spec: ClusterSpec<f64>,
    pub scheme: Option<Scheme>,
    pub n: Option<u64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub granularity: u64,
    pub simulation: SimParams<f64>,
    pub schemes: Option<Vec<String>>,
    pub bench: BenchConfig,
}

impl Settings {
    pub fn resolve(args: &RunArgs) -> CmdResult<Self> {
        let mut cfg = match &args.config {
            Some(path) => read_json::<RunConfig>(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = &args.scheme {
            cfg.scheme = Some(s.clone());
        }
        if args.n.is_some() {
            cfg.n = args.n;
        }
        if args.seed.is_some() {
            cfg.seed = args.seed;
        }
        if args.output.is_some() {
            cfg.output = args.output.clone();
        }
        if args.granularity.is_some() {
            cfg.dp_granularity = args.granularity;
        }

        let mut cluster = cfg.cluster.take();
        if let Some(speeds) = &args.speeds {
            let c = cluster.get_or_insert_with(|| ClusterConfig {
                speeds: SpeedsConfig::List(Vec::new()),
                cost: None,
                costs: None,
            });
            c.speeds = SpeedsConfig::List(speeds.clone());
        }
        if let Some(cost) = &args.cost {
            let cost = parse_cost_flag(cost)?;
            let c = cluster
                .as_mut()
                .ok_or_else(|| Failure::invalid("--cost given but no speeds (use --speeds or a config)"))?;
            c.cost = Some(cost);
            c.costs = None;
        }
        let cluster = cluster.ok_or_else(|| Failure::invalid("no cluster: pass --config or --speeds/--cost"))?;
        let spec = cluster.spec()?;

        let scheme = cfg.scheme.as_deref().map(str::parse::<Scheme>).transpose().invalid()?;
        let granularity = cfg.dp_granularity.unwrap_or(1);
        if granularity == 0 {
            return Err(Failure::invalid("dp_granularity must be a positive integer"));
        }

        Ok(Self {
            spec,
            scheme,
            n: cfg.n,
            seed: cfg.seed.unwrap_or(0),
            output: cfg.output,
            granularity,
            simulation: cfg.simulation.unwrap_or_default(),
            schemes: cfg.schemes,
            bench: cfg.bench,
        })
    }

    pub fn require_n(&self) -> CmdResult<u64> {
        self.n
            .ok_or_else(|| Failure::invalid("N is not set (config field `N` or --n)"))
    }
}

fn parse_cost_flag(s: &str) -> CmdResult<CostFunction<f64>> {
    let s = s.trim();
    let json = if s.starts_with('{') {
        s.to_string()
    } else {
        format!(r#"{{"family":"{s}"}}"#)
    };
    serde_json::from_str(&json).invalid_ctx(format!("bad --cost `{s}`"))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text = fs::read_to_string(path).invalid_ctx(format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).invalid_ctx(format!("{} is not a valid config", path.display()))
}

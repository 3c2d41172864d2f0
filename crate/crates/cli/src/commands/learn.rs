use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use hetpart::adaptive::DEFAULT_CAPACITY;
use hetpart::{run_batches, CostFunction, LearnedCostModel, Speed, UpdateStrategy};
use serde::{Deserialize, Serialize};

use super::emit;
use crate::config::{read_json, ClusterConfig};
use crate::error::{Classify, CmdResult, Failure};

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Timing log with columns `size,duration,speed`.
    #[arg(long)]
    pub observations: PathBuf,
    /// Cluster JSON; its cost (if any) is the truth that batches run against.
    #[arg(long)]
    pub cluster: PathBuf,
    /// `[n1, n2, ...]` or `{"sizes": [...], "truth": cost}`.
    #[arg(long)]
    pub batches: Option<PathBuf>,
    /// Start from this model instead of an empty one.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Where the learned model is written.
    #[arg(long, default_value = "model.json")]
    pub model: PathBuf,
    /// Where the report is written (stdout by default).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Strategy::Mean)]
    pub strategy: Strategy,
    /// Cost per item assumed before any observation.
    #[arg(long, default_value_t = 1.0)]
    pub initial_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_CAPACITY)]
    pub capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Strategy {
    Replace,
    Mean,
    Max,
}

impl From<Strategy> for UpdateStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Replace => UpdateStrategy::Replace,
            Strategy::Mean => UpdateStrategy::OccurrenceWeightedMean,
            Strategy::Max => UpdateStrategy::Max,
        }
    }
}

#[derive(Debug, Deserialize)]
struct Observation {
    size: u64,
    duration: f64,
    speed: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BatchesFile {
    Sizes(Vec<u64>),
    Spec {
        sizes: Vec<u64>,
        #[serde(default)]
        truth: Option<CostFunction<f64>>,
        #[serde(default)]
        truths: Option<Vec<CostFunction<f64>>>,
    },
}

#[derive(Debug, Serialize)]
pub struct BatchReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub sizes: Vec<u64>,
    /// Per-node durations under the true costs; planned durations without them.
    pub durations: Vec<f64>,
    pub makespan: f64,
}

#[derive(Debug, Serialize)]
pub struct LearnReport {
    pub observations: usize,
    pub known_points: usize,
    /// Whether batches ran against a true cost (and fed the model) or were
    /// only planned.
    pub executed: bool,
    pub batches: Vec<BatchReport>,
}

pub fn run(args: LearnArgs) -> CmdResult {
    let mut model = match &args.init {
        Some(path) => read_json::<LearnedCostModel<f64>>(path)?,
        None => {
            if !(args.initial_ratio.is_finite() && args.initial_ratio > 0.0) {
                return Err(Failure::invalid("--initial-ratio must be positive"));
            }
            LearnedCostModel::new(args.strategy.into(), args.initial_ratio).with_capacity(args.capacity)
        }
    };
    let observations = load_observations(&args.observations, &mut model)?;

    let cluster = ClusterConfig::load(&args.cluster)?;
    let speeds = cluster.speeds.expand()?;
    for &k in &speeds {
        Speed::new(k).invalid_ctx("bad speed in cluster")?;
    }
    let (sizes, truths) = match &args.batches {
        None => (Vec::new(), None),
        Some(path) => match read_json::<BatchesFile>(path)? {
            BatchesFile::Sizes(sizes) => (sizes, None),
            BatchesFile::Spec { sizes, truth, truths } => match (truth, truths) {
                (Some(_), Some(_)) => return Err(Failure::invalid("batches set both `truth` and `truths`")),
                (Some(t), None) => (sizes, Some(vec![t; speeds.len()])),
                (None, t) => (sizes, t),
            },
        },
    };
    let truths = match truths {
        Some(t) => Some(t),
        None => cluster.node_costs(speeds.len())?,
    };
    if let Some(t) = &truths {
        if t.len() != speeds.len() {
            return Err(Failure::invalid(format!(
                "{} true costs for {} nodes",
                t.len(),
                speeds.len()
            )));
        }
    }

    let (model, batches, executed) = match truths {
        Some(truths) => {
            let (model, outcomes) = run_batches(model, &speeds, &sizes, &truths).invalid()?;
            let batches = sizes
                .iter()
                .zip(outcomes)
                .map(|(&n, o)| BatchReport {
                    n,
                    sizes: o.sizes,
                    durations: o.durations,
                    makespan: o.makespan,
                })
                .collect();
            (model, batches, true)
        }
        None => {
            let mut batches = Vec::with_capacity(sizes.len());
            for &n in &sizes {
                let plan = model.plan_batch(&speeds, n).invalid()?;
                batches.push(BatchReport {
                    n,
                    sizes: plan.sizes().to_vec(),
                    durations: plan.projected_times().to_vec(),
                    makespan: plan.makespan(),
                });
            }
            (model, batches, false)
        }
    };

    let mut buf = serde_json::to_vec_pretty(&model)?;
    buf.push(b'\n');
    emit(Some(&args.model), &buf)?;

    let report = LearnReport {
        observations,
        known_points: model.known_points().len(),
        executed,
        batches,
    };
    let mut buf = serde_json::to_vec_pretty(&report)?;
    buf.push(b'\n');
    emit(args.report.as_deref(), &buf)?;
    Ok(())
}

/// Feeds every row to `model`; errors name the offending line.
fn load_observations(path: &Path, model: &mut LearnedCostModel<f64>) -> CmdResult<usize> {
    let file = File::open(path).invalid_ctx(format!("cannot read {}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .invalid_ctx(format!("{}: bad header", path.display()))?
        .clone();
    let mut count = 0;
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Failure::invalid(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let at = |msg: String| Failure::invalid(format!("{}: line {line}: {msg}", path.display()));
        let obs: Observation = row.deserialize(Some(&headers)).map_err(|e| at(e.to_string()))?;
        let speed = Speed::new(obs.speed).map_err(|e| at(e.to_string()))?;
        model
            .observe(obs.size, obs.duration, speed)
            .map_err(|e| at(e.to_string()))?;
        count += 1;
    }
    Ok(count)
}

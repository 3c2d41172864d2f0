use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::Args;
use hetpart::partition::io::PartitionReport;
use hetpart::simulator::{
    generate_records, max_records_from_env, read_records, run_real_sort, HarnessOptions, KeyDistribution, Record,
    SortRun, RECORD_LEN,
};
use hetpart::{ClusterSpec, Partition, Scheme, SimError, SortTimeline};
use serde::Serialize;

use super::partition::compute;
use super::{emit, OutputFormat};
use crate::config::{RunArgs, Settings};
use crate::error::{Classify, CmdResult, Failure};

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Paired trials; trial `t` sorts records generated from `seed + t`.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Untimed runs before the first trial.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Sample keys per worker for pivot selection.
    #[arg(long)]
    pub oversample: Option<usize>,
    /// Key distribution: uniform, sorted, reverse-sorted or few-distinct.
    #[arg(long)]
    pub distribution: Option<KeyDistribution>,
    /// Use the sizes of a partition file (CSV or JSON) instead of the scheme.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Sort the records of this file in every trial instead of generated ones.
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Run every worker flat out instead of emulating the speeds.
    #[arg(long)]
    pub no_emulate: bool,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub makespan: f64,
    pub wall_seconds: f64,
    pub correct: bool,
    pub input_digest: String,
    pub output_digest: String,
    pub timeline: SortTimeline<f64>,
}

impl From<&SortRun> for RunReport {
    fn from(run: &SortRun) -> Self {
        Self {
            makespan: run.timeline.makespan(),
            wall_seconds: run.wall.as_secs_f64(),
            correct: run.is_correct(),
            input_digest: format!("{:016x}", run.input_digest),
            output_digest: format!("{:016x}", run.output_digest),
            timeline: run.timeline.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub baseline: RunReport,
    pub candidate: RunReport,
    /// Candidate makespan over baseline makespan.
    pub ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub speeds: Vec<f64>,
    pub baseline_scheme: String,
    pub candidate_scheme: String,
    pub baseline_sizes: Vec<u64>,
    pub candidate_sizes: Vec<u64>,
    pub trials: Vec<TrialReport>,
    pub median_ratio: f64,
    pub median_baseline_makespan: f64,
    pub median_candidate_makespan: f64,
    pub candidate_wins: usize,
}

pub fn run(args: BenchArgs) -> CmdResult {
    let settings = Settings::resolve(&args.run)?;
    let cap = max_records_from_env();
    let file_sizes = args.partition.as_deref().map(read_partition_sizes).transpose()?;
    let file_records = args.records.as_deref().map(|p| load_records(p, cap)).transpose()?;

    let mut n = settings.n;
    let mut agree = |label: &str, v: u64| -> CmdResult {
        match n {
            Some(prev) if prev != v => Err(Failure::invalid(format!("{label} holds {v} items but N = {prev}"))),
            _ => {
                n = Some(v);
                Ok(())
            }
        }
    };
    if let Some(sizes) = &file_sizes {
        agree("partition file", sizes.iter().sum())?;
    }
    if let Some(recs) = &file_records {
        agree("records file", recs.len() as u64)?;
    }
    let n = n.ok_or_else(|| Failure::invalid("N is not set (config field `N` or --n)"))?;
    if n > cap {
        return Err(Failure::cap(format!(
            "{n} records exceed the cap of {cap} (set HETPART_MAX_RECORDS to raise it)"
        )));
    }

    let spec = &settings.spec;
    let baseline = compute(spec, Scheme::Proportional, n, settings.granularity)?;
    let (candidate, candidate_scheme) = match file_sizes {
        Some(sizes) => (
            Partition::from_sizes(spec, sizes).invalid_ctx("partition file does not fit the cluster")?,
            args.partition
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        ),
        None => {
            let scheme = settings.scheme.unwrap_or(Scheme::Exact);
            (
                compute(spec, scheme, n, settings.granularity)?,
                scheme.name().to_string(),
            )
        }
    };

    let trials = args.trials.or(settings.bench.trials).unwrap_or(1);
    if trials == 0 {
        return Err(Failure::invalid("trials must be at least 1"));
    }
    let warmup = args.warmup.or(settings.bench.warmup).unwrap_or(1);
    let distribution = args.distribution.or(settings.bench.distribution).unwrap_or_default();
    let options = HarnessOptions {
        oversample: args.oversample.or(settings.bench.oversample).unwrap_or(32),
        emulate_speed: !args.no_emulate,
        max_records: cap,
        ..HarnessOptions::default()
    };
    let records_for = |seed: u64| match &file_records {
        Some(r) => r.clone(),
        None => generate_records(n, distribution, seed),
    };

    for _ in 0..warmup {
        sort(spec, &baseline, records_for(settings.seed), &options)?;
    }

    let mut reports = Vec::with_capacity(trials);
    for t in 0..trials {
        let seed = settings.seed.wrapping_add(t as u64);
        let records = records_for(seed);
        // even trials run the baseline first, odd trials the candidate
        let (b, c) = if t % 2 == 0 {
            let b = sort(spec, &baseline, records.clone(), &options)?;
            (b, sort(spec, &candidate, records, &options)?)
        } else {
            let c = sort(spec, &candidate, records.clone(), &options)?;
            (sort(spec, &baseline, records, &options)?, c)
        };
        let (b, c) = (RunReport::from(&b), RunReport::from(&c));
        let ratio = c.makespan / b.makespan;
        reports.push(TrialReport {
            seed,
            baseline: b,
            candidate: c,
            ratio,
        });
    }

    let report = BenchReport {
        n,
        speeds: spec.speeds().collect(),
        baseline_scheme: Scheme::Proportional.name().to_string(),
        candidate_scheme,
        baseline_sizes: baseline.sizes().to_vec(),
        candidate_sizes: candidate.sizes().to_vec(),
        median_ratio: median(reports.iter().map(|r| r.ratio)),
        median_baseline_makespan: median(reports.iter().map(|r| r.baseline.makespan)),
        median_candidate_makespan: median(reports.iter().map(|r| r.candidate.makespan)),
        candidate_wins: reports
            .iter()
            .filter(|r| r.candidate.makespan < r.baseline.makespan)
            .count(),
        trials: reports,
    };

    let mut buf = serde_json::to_vec_pretty(&report)?;
    buf.push(b'\n');
    emit(settings.output.as_deref(), &buf)?;
    let summary = format!(
        "{} vs {}: median ratio {:.4} over {} trial(s), candidate faster in {}",
        report.candidate_scheme, report.baseline_scheme, report.median_ratio, trials, report.candidate_wins
    );
    if settings.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn sort(
    spec: &ClusterSpec<f64>,
    partition: &Partition<f64>,
    records: Vec<Record>,
    options: &HarnessOptions,
) -> CmdResult<SortRun> {
    let run = run_real_sort(spec, partition, records, options).map_err(|e| match e {
        SimError::TooManyRecords { .. } => Failure::Cap(e.into()),
        SimError::LengthMismatch { .. } | SimError::CountMismatch { .. } => Failure::Invalid(e.into()),
        e => Failure::Runtime(e.into()),
    })?;
    if !run.is_correct() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "sort output is wrong (sorted: {}, input digest {:016x}, output digest {:016x})",
            run.globally_sorted,
            run.input_digest,
            run.output_digest
        )));
    }
    Ok(run)
}

fn read_partition_sizes(path: &Path) -> CmdResult<Vec<u64>> {
    let file = File::open(path).invalid_ctx(format!("cannot read {}", path.display()))?;
    let report: PartitionReport = match OutputFormat::pick(None, Some(path)) {
        OutputFormat::Json => serde_json::from_reader(BufReader::new(file)).invalid_ctx(path.display())?,
        OutputFormat::Csv => PartitionReport::read_csv(file).invalid_ctx(path.display())?,
    };
    Ok(report.sizes())
}

fn load_records(path: &Path, cap: u64) -> CmdResult<Vec<Record>> {
    let len = fs::metadata(path)
        .invalid_ctx(format!("cannot read {}", path.display()))?
        .len();
    if len / RECORD_LEN as u64 > cap {
        return Err(Failure::cap(format!(
            "{} holds {} records, above the cap of {cap}",
            path.display(),
            len / RECORD_LEN as u64
        )));
    }
    let file = File::open(path)?;
    read_records(BufReader::new(file)).invalid_ctx(path.display())
}

fn median(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

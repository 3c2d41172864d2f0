use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use hetpart::partition::io::PartitionReport;
use hetpart::{simulate, ClusterSpec, Partition, Scheme};

use super::{emit, OutputFormat};
use crate::config::{RunArgs, Settings};
use crate::error::{Classify, CmdResult, Failure};

/// Cell budget of the dp table, `p * (N / g)²`.
const DP_WORK_CAP: f64 = 2e10;
/// Traceback entries kept by dp, `p * (N / g)`.
const DP_TABLE_CAP: f64 = 5e8;

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Output format; by default taken from the output extension (csv otherwise).
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Also write the simulated sample-sort timeline of the partition as JSON.
    #[arg(long)]
    pub timeline: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated schemes; gaps are relative to the first.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
}

/// Checks scheme/cost compatibility and the dp caps, then partitions.
pub fn compute(spec: &ClusterSpec<f64>, scheme: Scheme, n: u64, granularity: u64) -> CmdResult<Partition<f64>> {
    scheme
        .validate(spec)
        .invalid_ctx(format!("scheme `{scheme}` cannot run on this cluster"))?;
    if scheme == Scheme::Dp {
        let units = (n / granularity) as f64 + 1.0;
        let p = spec.len() as f64;
        if p * units * units > DP_WORK_CAP || p * units > DP_TABLE_CAP {
            return Err(Failure::cap(format!(
                "dp over {} units on {} nodes is too large; raise --granularity",
                n / granularity,
                spec.len()
            )));
        }
    }
    scheme.partition(spec, n, granularity).invalid()
}

pub fn run(args: PartitionArgs) -> CmdResult {
    let settings = Settings::resolve(&args.run)?;
    let scheme = settings.scheme.unwrap_or(Scheme::Exact);
    let n = settings.require_n()?;
    let part = compute(&settings.spec, scheme, n, settings.granularity)?;
    let report = PartitionReport::new(&settings.spec, &part);

    let format = OutputFormat::pick(args.format, settings.output.as_deref());
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => report.write_csv(&mut buf)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, &report)?;
            buf.push(b'\n');
        }
    }
    emit(settings.output.as_deref(), &buf)?;

    if let Some(path) = &args.timeline {
        let timeline = simulate(&settings.spec, &part, &settings.simulation).invalid()?;
        let mut buf = serde_json::to_vec_pretty(&timeline)?;
        buf.push(b'\n');
        emit(Some(path), &buf)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub scheme: Scheme,
    pub makespan: f64,
    /// Improvement over the first scheme, in percent (positive is faster).
    pub gain_pct: f64,
    pub simulated: f64,
}

pub fn compare_rows(settings: &Settings, schemes: &[Scheme], n: u64) -> CmdResult<Vec<CompareRow>> {
    let mut rows = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let part = compute(&settings.spec, scheme, n, settings.granularity)?;
        let simulated = simulate(&settings.spec, &part, &settings.simulation)
            .invalid()?
            .makespan();
        rows.push(CompareRow {
            scheme,
            makespan: part.makespan(),
            gain_pct: 0.0,
            simulated,
        });
    }
    let base = rows[0].makespan;
    for r in &mut rows {
        r.gain_pct = if base > 0.0 {
            (base - r.makespan) / base * 100.0
        } else {
            0.0
        };
    }
    Ok(rows)
}

pub fn compare(args: CompareArgs) -> CmdResult {
    let settings = Settings::resolve(&args.run)?;
    let names = args
        .schemes
        .or_else(|| settings.schemes.clone())
        .ok_or_else(|| Failure::invalid("no schemes given (--schemes a,b or config `schemes`)"))?;
    if names.len() < 2 {
        return Err(Failure::invalid("compare needs at least two schemes"));
    }
    let schemes = names
        .iter()
        .map(|s| s.parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()
        .invalid()?;
    let n = settings.require_n()?;
    let rows = compare_rows(&settings, &schemes, n)?;

    let mut out = Vec::new();
    write_table(&mut out, &rows, n, settings.spec.len())?;
    emit(settings.output.as_deref(), &out)?;
    Ok(())
}

fn write_table<W: Write>(mut w: W, rows: &[CompareRow], n: u64, p: usize) -> std::io::Result<()> {
    writeln!(w, "N = {n}, p = {p}")?;
    writeln!(
        w,
        "{:<16} {:>22} {:>12} {:>22}",
        "scheme",
        "makespan",
        format!("vs {}", rows[0].scheme),
        "simulated"
    )?;
    for r in rows {
        writeln!(
            w,
            "{:<16} {:>22.6} {:>+11.4}% {:>22.6}",
            r.scheme.name(),
            r.makespan,
            r.gain_pct,
            r.simulated
        )?;
    }
    Ok(())
}

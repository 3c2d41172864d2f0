use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use hetpart::simulator::{digest, generate_records, max_records_from_env, write_records, KeyDistribution};

use crate::error::{CmdResult, Failure};

#[derive(Debug, Args)]
pub struct GenRecordsArgs {
    #[arg(long)]
    pub count: u64,
    /// Key distribution: uniform, sorted, reverse-sorted or few-distinct.
    #[arg(long, default_value = "uniform")]
    pub distribution: KeyDistribution,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Writes raw 100-byte records and prints their digest in hex.
pub fn run(args: GenRecordsArgs) -> CmdResult {
    let cap = max_records_from_env();
    if args.count > cap {
        return Err(Failure::cap(format!(
            "{} records exceed the cap of {cap} (set HETPART_MAX_RECORDS to raise it)",
            args.count
        )));
    }
    let records = generate_records(args.count, args.distribution, args.seed);
    let mut out = BufWriter::new(File::create(&args.output)?);
    write_records(&mut out, &records)?;
    out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    println!("{:016x}", digest(&records));
    Ok(())
}

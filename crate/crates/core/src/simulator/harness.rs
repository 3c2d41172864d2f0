//! Real sample sort over in-memory records, one thread per node plus a
//! coordinator, all exchange through channels.
//!
//! Node speed is emulated by burning CPU: after each compute phase a worker
//! spins until its thread CPU time for the phase reaches `raw * max(1, k_max) / k_i`.
//! Phases are timed with the thread CPU clock, so the measurements do not
//! depend on how many cores the host has. The timeline is then laid out with
//! the two synchronization points of the algorithm: nobody splits before the
//! pivots are known, and nobody merges before every portion has arrived.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use super::records::{digest, Record, KEY_LEN};
use super::{NodePhases, SimError, SortTimeline};
use crate::partition::{ClusterSpec, Partition};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_RECORDS: u64 = 20_000_000;
const MAX_RECORDS_VAR: &str = "HETPART_MAX_RECORDS";

type Key = [u8; KEY_LEN];

/// The record cap from `HETPART_MAX_RECORDS`, or [`DEFAULT_MAX_RECORDS`].
pub fn max_records_from_env() -> u64 {
    std::env::var(MAX_RECORDS_VAR)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_RECORDS)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessOptions {
    /// Sample keys each worker sends to the coordinator.
    pub oversample: usize,
    /// Burn CPU to emulate the speeds; `false` runs every worker flat out.
    pub emulate_speed: bool,
    pub cpu_sharing: CpuSharing,
    pub max_records: u64,
}

/// How worker compute phases share the host's cores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CpuSharing {
    /// `Exclusive` when the host has fewer cores than workers, else `Concurrent`.
    #[default]
    Auto,
    /// One compute phase at a time, granted by an arbiter thread.
    Exclusive,
    Concurrent,
}

impl CpuSharing {
    fn exclusive(self, workers: usize) -> bool {
        match self {
            Self::Exclusive => true,
            Self::Concurrent => false,
            Self::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()) < workers,
        }
    }
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            oversample: 32,
            emulate_speed: true,
            cpu_sharing: CpuSharing::Auto,
            max_records: max_records_from_env(),
        }
    }
}

/// Outcome of [`run_real_sort`]. Timeline durations are in seconds.
#[derive(Debug, Clone)]
pub struct SortRun {
    pub timeline: SortTimeline<f64>,
    pub input_digest: u64,
    pub output_digest: u64,
    /// Whether the concatenated output is non-decreasing by key.
    pub globally_sorted: bool,
    /// Final records per node, in node order.
    pub output: Vec<Vec<Record>>,
    pub wall: Duration,
}

impl SortRun {
    /// Sorted, and a permutation of the input.
    pub fn is_correct(&self) -> bool {
        self.globally_sorted && self.input_digest == self.output_digest
    }

    pub fn output_sizes(&self) -> Vec<usize> {
        self.output.iter().map(Vec::len).collect()
    }
}

/// Makes glibc keep freed memory in one heap instead of returning it to the
/// kernel or spreading it over per-thread arenas. Otherwise large buffers come back as fresh pages and the phase
/// timings pick up page-fault costs that depend on allocation history.
/// Applies to the whole process, once.
fn retain_freed_memory() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    {
        static ONCE: std::sync::Once = std::sync::Once::new();
        ONCE.call_once(|| {
            // SAFETY: mallopt only adjusts allocator tunables.
            unsafe {
                libc::mallopt(libc::M_MMAP_THRESHOLD, 1 << 30);
                libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
                libc::mallopt(libc::M_ARENA_MAX, 1);
            }
        });
    }
}

fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "thread CPU clock unavailable");
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

#[derive(Clone, Copy)]
struct Throttle {
    factor: f64,
}

impl Throttle {
    /// Runs `work`, burns CPU up to `factor` times its cost and returns the
    /// charged CPU seconds.
    fn run<T>(self, work: impl FnOnce() -> T) -> (T, f64) {
        let start = thread_cpu_time();
        let out = work();
        let raw = thread_cpu_time() - start;
        if self.factor > 1.0 {
            let target = raw.mul_f64(self.factor);
            while thread_cpu_time() - start < target {
                std::hint::spin_loop();
            }
        }
        (out, (thread_cpu_time() - start).as_secs_f64())
    }
}

type Permit = (mpsc::Sender<()>, mpsc::Receiver<()>);

/// Entry to the compute phases: a direct call, or a request to the arbiter
/// that is granted once no other phase is running.
#[derive(Clone)]
struct Gate(Option<mpsc::Sender<Permit>>);

impl Gate {
    fn run<T>(&self, throttle: Throttle, work: impl FnOnce() -> T) -> Result<(T, f64), SimError> {
        let Some(arbiter) = &self.0 else {
            return Ok(throttle.run(work));
        };
        let (go_tx, go_rx) = mpsc::channel();
        let (done_tx, done_rx) = mpsc::channel();
        arbiter.send((go_tx, done_rx)).map_err(|_| SimError::WorkerPanic)?;
        go_rx.recv().map_err(|_| SimError::WorkerPanic)?;
        let out = throttle.run(work);
        let _ = done_tx.send(());
        Ok(out)
    }
}

fn arbitrate(requests: mpsc::Receiver<Permit>) {
    for (go, done) in requests {
        if go.send(()).is_ok() {
            // an error means the phase's worker died; move on
            let _ = done.recv();
        }
    }
}

fn key(r: &Record) -> &[u8] {
    &r[..KEY_LEN]
}

fn key_of(r: &Record) -> Key {
    r[..KEY_LEN].try_into().expect("key prefix")
}

/// Evenly spaced keys of a sorted run.
fn regular_samples(run: &[Record], oversample: usize) -> Vec<Key> {
    let n = run.len();
    let s = oversample.min(n);
    (0..s).map(|t| key_of(&run[(2 * t + 1) * n / (2 * s)])).collect()
}

struct SampleMsg {
    count: usize,
    keys: Vec<Key>,
}

/// `p - 1` pivots splitting the sampled key space at the cumulative speed
/// shares. Each sample of node `j` stands for `n_j / s_j` records.
fn choose_pivots(samples: &[SampleMsg], speeds: &[f64]) -> Vec<Key> {
    let p = speeds.len();
    let mut weighted: Vec<(Key, f64)> = samples
        .iter()
        .filter(|m| !m.keys.is_empty())
        .flat_map(|m| {
            let w = m.count as f64 / m.keys.len() as f64;
            m.keys.iter().map(move |&k| (k, w))
        })
        .collect();
    weighted.sort_by_key(|a| a.0);
    let total: f64 = samples.iter().map(|m| m.count as f64).sum();
    let speed_sum: f64 = speeds.iter().sum();

    let mut pivots = Vec::with_capacity(p.saturating_sub(1));
    let mut acc = 0.0;
    let mut share = 0.0;
    let mut it = weighted.iter().peekable();
    for &k in &speeds[..p.saturating_sub(1)] {
        share += k;
        let bound = total * share / speed_sum;
        // a sample sits mid-way through the `w` records it stands for
        while let Some(&&(_, w)) = it.peek() {
            if acc + w >= bound {
                break;
            }
            acc += w;
            it.next();
        }
        let pivot = match it.peek() {
            Some(&&(key, _)) => key,
            None => weighted.last().map_or([u8::MAX; KEY_LEN], |s| s.0),
        };
        pivots.push(pivot);
    }
    pivots
}

/// Cuts a sorted run into `p` portions: portion `d` holds the keys in
/// `(pivot[d-1], pivot[d]]`.
fn split_at_pivots(run: &[Record], pivots: &[Key]) -> Vec<Vec<Record>> {
    let mut out = Vec::with_capacity(pivots.len() + 1);
    let mut lo = 0;
    for pivot in pivots {
        let hi = lo + run[lo..].partition_point(|r| key(r) <= &pivot[..]);
        out.push(run[lo..hi].to_vec());
        lo = hi;
    }
    out.push(run[lo..].to_vec());
    out
}

/// k-way merge of sorted portions; equal keys keep source order.
fn merge_portions(mut portions: Vec<Vec<Record>>) -> Vec<Record> {
    if portions.len() == 1 {
        return portions.pop().expect("one portion");
    }
    let total = portions.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut pos = vec![0usize; portions.len()];
    let mut heap: BinaryHeap<Reverse<(Key, usize)>> = portions
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(src, v)| Reverse((key_of(&v[0]), src)))
        .collect();
    while let Some(Reverse((_, src))) = heap.pop() {
        let run = &portions[src];
        out.push(run[pos[src]]);
        pos[src] += 1;
        if let Some(next) = run.get(pos[src]) {
            heap.push(Reverse((key_of(next), src)));
        }
    }
    out
}

struct WorkerReport {
    local_sort: f64,
    split: f64,
    merge: f64,
    output: Vec<Record>,
}

/// Sorts `records` with the four-step sample sort, node `i` starting from the
/// next `partition.sizes()[i]` records.
///
/// Record counts above `options.max_records` are refused before any thread
/// starts. An empty batch returns an all-zero timeline without starting
/// any thread.
pub fn run_real_sort<S: Scalar>(
    spec: &ClusterSpec<S>,
    partition: &Partition<S>,
    records: Vec<Record>,
    options: &HarnessOptions,
) -> Result<SortRun, SimError> {
    let p = spec.len();
    if partition.len() != p {
        return Err(SimError::LengthMismatch {
            expected: p,
            got: partition.len(),
        });
    }
    if partition.total() != records.len() as u64 {
        return Err(SimError::CountMismatch {
            assigned: partition.total(),
            available: records.len() as u64,
        });
    }
    if partition.total() > options.max_records {
        return Err(SimError::TooManyRecords {
            count: partition.total(),
            cap: options.max_records,
        });
    }
    if options.oversample == 0 {
        return Err(SimError::InvalidParameter {
            name: "oversample",
            reason: "must be at least 1".into(),
        });
    }
    let input_digest = digest(&records);
    if records.is_empty() {
        return Ok(SortRun {
            timeline: SortTimeline::new(vec![NodePhases::default(); p])?,
            input_digest,
            output_digest: input_digest,
            globally_sorted: true,
            output: vec![Vec::new(); p],
            wall: Duration::ZERO,
        });
    }

    retain_freed_memory();
    let speeds: Vec<f64> = spec
        .speeds()
        .map(|k| k.to_f64().expect("speed converts to f64"))
        .collect();
    let reference = speeds.iter().copied().fold(1.0, f64::max);
    let throttles: Vec<Throttle> = speeds
        .iter()
        .map(|&k| Throttle {
            factor: if options.emulate_speed { reference / k } else { 1.0 },
        })
        .collect();

    let mut source = records.into_iter();
    let chunks: Vec<Vec<Record>> = partition
        .sizes()
        .iter()
        .map(|&n| source.by_ref().take(n as usize).collect())
        .collect();

    let (sample_tx, sample_rx) = mpsc::channel::<(usize, SampleMsg)>();
    let (pivot_txs, pivot_rxs): (Vec<_>, Vec<_>) = (0..p).map(|_| mpsc::channel::<Vec<Key>>()).unzip();
    let (data_txs, data_rxs): (Vec<_>, Vec<_>) = (0..p).map(|_| mpsc::channel::<(usize, Vec<Record>)>()).unzip();
    let oversample = options.oversample;

    let (arbiter_tx, arbiter_rx) = mpsc::channel::<Permit>();
    let exclusive = options.cpu_sharing.exclusive(p);
    let gate = Gate(exclusive.then_some(arbiter_tx));

    let started = Instant::now();
    let (coord_time, reports) = std::thread::scope(|scope| {
        if exclusive {
            scope.spawn(move || arbitrate(arbiter_rx));
        }
        let coordinator = {
            let speeds = &speeds;
            scope.spawn(move || {
                let mut samples: Vec<Option<SampleMsg>> = (0..p).map(|_| None).collect();
                for _ in 0..p {
                    let (from, msg) = sample_rx.recv().map_err(|_| SimError::WorkerPanic)?;
                    samples[from] = Some(msg);
                }
                let start = thread_cpu_time();
                let samples: Vec<SampleMsg> = samples.into_iter().flatten().collect();
                let pivots = choose_pivots(&samples, speeds);
                for tx in &pivot_txs {
                    tx.send(pivots.clone()).map_err(|_| SimError::WorkerPanic)?;
                }
                Ok::<f64, SimError>((thread_cpu_time() - start).as_secs_f64())
            })
        };

        let workers: Vec<_> = chunks
            .into_iter()
            .zip(pivot_rxs)
            .zip(data_rxs)
            .enumerate()
            .map(|(i, ((mut chunk, pivot_rx), data_rx))| {
                let sample_tx = sample_tx.clone();
                let data_txs = data_txs.clone();
                let throttle = throttles[i];
                let gate = gate.clone();
                scope.spawn(move || {
                    let (samples, local_sort) = gate.run(throttle, || {
                        chunk.sort_by(|a, b| key(a).cmp(key(b)));
                        regular_samples(&chunk, oversample)
                    })?;
                    let msg = SampleMsg {
                        count: chunk.len(),
                        keys: samples,
                    };
                    sample_tx.send((i, msg)).map_err(|_| SimError::WorkerPanic)?;
                    let pivots = pivot_rx.recv().map_err(|_| SimError::WorkerPanic)?;

                    let (portions, split) = gate.run(throttle, || split_at_pivots(&chunk, &pivots))?;
                    drop(chunk);
                    for (dest, portion) in portions.into_iter().enumerate() {
                        data_txs[dest].send((i, portion)).map_err(|_| SimError::WorkerPanic)?;
                    }
                    drop(data_txs);

                    let mut received: Vec<Option<Vec<Record>>> = (0..p).map(|_| None).collect();
                    for _ in 0..p {
                        let (from, portion) = data_rx.recv().map_err(|_| SimError::WorkerPanic)?;
                        received[from] = Some(portion);
                    }
                    let received: Vec<Vec<Record>> = received.into_iter().flatten().collect();
                    let (output, merge) = gate.run(throttle, || merge_portions(received))?;
                    Ok::<WorkerReport, SimError>(WorkerReport {
                        local_sort,
                        split,
                        merge,
                        output,
                    })
                })
            })
            .collect();
        drop(sample_tx);
        drop(data_txs);
        drop(gate);

        let reports: Vec<Result<WorkerReport, SimError>> = workers
            .into_iter()
            .map(|h| h.join().unwrap_or(Err(SimError::WorkerPanic)))
            .collect();
        let coord = coordinator.join().unwrap_or(Err(SimError::WorkerPanic));
        (coord, reports)
    });
    let wall = started.elapsed();
    let coord_time = coord_time?;
    let reports: Vec<WorkerReport> = reports.into_iter().collect::<Result<_, _>>()?;

    let max_sort = reports.iter().map(|r| r.local_sort).fold(0.0, f64::max);
    let max_split = reports.iter().map(|r| r.split).fold(0.0, f64::max);
    let per_node = reports
        .iter()
        .map(|r| NodePhases {
            local_sort: r.local_sort,
            pivot_exchange: max_sort - r.local_sort + coord_time,
            partition_split: r.split,
            redistribution: max_split - r.split,
            final_merge: r.merge,
        })
        .collect();
    let timeline = SortTimeline::new(per_node)?;

    let output: Vec<Vec<Record>> = reports.into_iter().map(|r| r.output).collect();
    let globally_sorted = output
        .iter()
        .flatten()
        .zip(output.iter().flatten().skip(1))
        .all(|(a, b)| key(a) <= key(b));
    let output_digest = digest(output.iter().flatten());

    Ok(SortRun {
        timeline,
        input_digest,
        output_digest,
        globally_sorted,
        output,
        wall,
    })
}

//! Four-step heterogeneous sample sort: an analytic timeline model
//! ([`simulate`]) and a real in-process execution ([`run_real_sort`]).
//!
//! The steps, per node `i`:
//!
//! 1. sort the local chunk of `n_i` records and send sample keys to a coordinator;
//! 2. the coordinator sorts the samples and broadcasts `p - 1` pivots;
//! 3. split the sorted chunk at the pivots and send the portions away;
//! 4. merge the portions received from every node.
//!
//! A [`SortTimeline`] charges these to five phases per node.

mod harness;
mod records;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{ClusterSpec, Partition};
use crate::scalar::Scalar;

pub use harness::{max_records_from_env, run_real_sort, CpuSharing, HarnessOptions, SortRun, DEFAULT_MAX_RECORDS};
pub use records::{
    digest, generate_records, read_records, record_index, write_records, KeyDistribution, Record, RecordBatch, KEY_LEN,
    RECORD_LEN,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("expected {expected} entries (one per processor), got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("partition assigns {assigned} records but the batch holds {available}")]
    CountMismatch { assigned: u64, available: u64 },
    #[error("{count} records exceed the cap of {cap} (set HETPART_MAX_RECORDS to raise it)")]
    TooManyRecords { count: u64, cap: u64 },
    #[error("invalid simulation parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),
    #[error("record file length {0} is not a multiple of the 100-byte record size")]
    TruncatedRecords(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("worker thread panicked")]
    WorkerPanic,
}

/// Phase durations of one node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct NodePhases<S> {
    pub local_sort: S,
    pub pivot_exchange: S,
    pub partition_split: S,
    pub redistribution: S,
    pub final_merge: S,
}

impl<S: Scalar> NodePhases<S> {
    pub fn total(&self) -> S {
        self.local_sort + self.pivot_exchange + self.partition_split + self.redistribution + self.final_merge
    }

    fn all(&self) -> [S; 5] {
        [
            self.local_sort,
            self.pivot_exchange,
            self.partition_split,
            self.redistribution,
            self.final_merge,
        ]
    }
}

/// Per-node phase durations and the resulting makespan (the largest
/// per-node total).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", try_from = "RawTimeline<S>")]
pub struct SortTimeline<S> {
    per_node: Vec<NodePhases<S>>,
    makespan: S,
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct RawTimeline<S> {
    per_node: Vec<NodePhases<S>>,
    makespan: S,
}

impl<S: Scalar> TryFrom<RawTimeline<S>> for SortTimeline<S> {
    type Error = SimError;
    fn try_from(raw: RawTimeline<S>) -> Result<Self, SimError> {
        let t = SortTimeline::new(raw.per_node)?;
        let tol = S::lit(1e-9) * t.makespan.max(S::one());
        if (t.makespan - raw.makespan).abs() > tol {
            return Err(SimError::InvalidTimeline(format!(
                "makespan {} does not match the per-node totals ({})",
                raw.makespan, t.makespan
            )));
        }
        Ok(t)
    }
}

impl<S: Scalar> SortTimeline<S> {
    /// Builds a timeline, rejecting negative or non-finite durations.
    pub fn new(per_node: Vec<NodePhases<S>>) -> Result<Self, SimError> {
        for (i, ph) in per_node.iter().enumerate() {
            if ph.all().iter().any(|d| !(d.is_finite() && *d >= S::zero())) {
                return Err(SimError::InvalidTimeline(format!(
                    "node {i} has a negative or non-finite phase"
                )));
            }
        }
        let makespan = per_node.iter().map(NodePhases::total).fold(S::zero(), S::max);
        Ok(Self { per_node, makespan })
    }

    pub fn per_node(&self) -> &[NodePhases<S>] {
        &self.per_node
    }

    pub fn makespan(&self) -> S {
        self.makespan
    }

    pub fn totals(&self) -> Vec<S> {
        self.per_node.iter().map(NodePhases::total).collect()
    }
}

/// How many records each node is expected to receive in the exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiveModel {
    /// `N / p` each: pivots cut the key space evenly.
    Uniform,
    /// `N k_i / K`: pivots cut the key space in proportion to speed, which is
    /// what [`run_real_sort`] does.
    #[default]
    SpeedWeighted,
}

/// Linear communication model: a message costs `latency + bytes / bandwidth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CommModel<S> {
    pub latency: S,
    /// Bytes per time unit.
    pub bandwidth: S,
    #[serde(default = "default_record_bytes")]
    pub bytes_per_item: S,
}

fn default_record_bytes<S: Scalar>() -> S {
    S::from_count(RECORD_LEN as u64)
}

/// Parameters of [`simulate`]. All costs are in the abstract time units of the
/// cost functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar", default)]
pub struct SimParams<S> {
    /// Cost per item of splitting a sorted chunk, on a unit-speed node.
    pub split_cost: S,
    /// Cost per item and per merge level (`log2 p` levels) on a unit-speed node.
    pub merge_cost: S,
    pub receive: ReceiveModel,
    /// Inflates every receive estimate, to stand in for skewed key
    /// distributions (1 means no skew).
    pub skew_factor: S,
    /// Samples sent by each node to the coordinator.
    pub oversample: u64,
    /// `None` disables communication costs.
    pub comm: Option<CommModel<S>>,
}

impl<S: Scalar> Default for SimParams<S> {
    fn default() -> Self {
        Self {
            split_cost: S::one(),
            merge_cost: S::one(),
            receive: ReceiveModel::default(),
            skew_factor: S::one(),
            oversample: 32,
            comm: None,
        }
    }
}

impl<S: Scalar> SimParams<S> {
    fn validate(&self) -> Result<(), SimError> {
        let nonneg = |name: &'static str, v: S| {
            if v.is_finite() && v >= S::zero() {
                Ok(())
            } else {
                Err(SimError::InvalidParameter {
                    name,
                    reason: format!("{v} is not a nonnegative number"),
                })
            }
        };
        nonneg("split_cost", self.split_cost)?;
        nonneg("merge_cost", self.merge_cost)?;
        if !(self.skew_factor.is_finite() && self.skew_factor >= S::one()) {
            return Err(SimError::InvalidParameter {
                name: "skew_factor",
                reason: format!("{} is below 1", self.skew_factor),
            });
        }
        if let Some(c) = &self.comm {
            nonneg("latency", c.latency)?;
            nonneg("bytes_per_item", c.bytes_per_item)?;
            if !(c.bandwidth > S::zero()) {
                return Err(SimError::InvalidParameter {
                    name: "bandwidth",
                    reason: format!("{} is not positive", c.bandwidth),
                });
            }
        }
        Ok(())
    }
}

/// Analytic timeline of the four-step sort for `partition` on `spec`.
///
/// ```text
/// local_sort      = f_i(n_i) / k_i
/// partition_split = split_cost · n_i / k_i                (0 when p = 1)
/// final_merge     = merge_cost · r_i · log2(p) / k_i
/// ```
///
/// where `r_i` is the receive estimate of [`ReceiveModel`] times
/// `skew_factor`. `pivot_exchange` and `redistribution` come from the
/// communication model and are 0 without one.
pub fn simulate<S: Scalar>(
    spec: &ClusterSpec<S>,
    partition: &Partition<S>,
    params: &SimParams<S>,
) -> Result<SortTimeline<S>, SimError> {
    let p = spec.len();
    if partition.len() != p {
        return Err(SimError::LengthMismatch {
            expected: p,
            got: partition.len(),
        });
    }
    params.validate()?;
    let n_total = S::from_count(partition.total());
    let pf = S::from_count(p as u64);
    let levels = pf.log2();
    let total_speed = spec.total_speed();

    let per_node = partition
        .sizes()
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let k = spec.speed(i);
            let n = S::from_count(n);
            let base = match params.receive {
                ReceiveModel::Uniform => n_total / pf,
                ReceiveModel::SpeedWeighted => n_total * k / total_speed,
            };
            let received = base * params.skew_factor;
            let mut ph = NodePhases {
                local_sort: spec.node_time(i, n),
                final_merge: params.merge_cost * received * levels / k,
                ..NodePhases::default()
            };
            if p > 1 {
                ph.partition_split = params.split_cost * n / k;
                if let Some(c) = &params.comm {
                    let key_bytes = S::from_count(KEY_LEN as u64);
                    let samples = S::from_count(params.oversample) + pf - S::one();
                    ph.pivot_exchange = S::lit(2.0) * c.latency + samples * key_bytes / c.bandwidth;
                    // items that leave the node and items that arrive from others,
                    // over a full-duplex link
                    let sent = n * (S::one() - (received / n_total).min(S::one()));
                    let arrived = received * (S::one() - n / n_total);
                    let items = if n_total > S::zero() {
                        sent.max(arrived)
                    } else {
                        S::zero()
                    };
                    ph.redistribution = (pf - S::one()) * c.latency + items * c.bytes_per_item / c.bandwidth;
                }
            }
            ph
        })
        .collect();
    SortTimeline::new(per_node)
}

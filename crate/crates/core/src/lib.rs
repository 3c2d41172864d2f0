//! Chunk sizes for heterogeneous processors under non-linear cost functions.
//!
//! Given `N` items, processor speeds `k_1..k_p` and a cost function `f`, find
//! integer chunk sizes `n_i` (summing to `N`) whose completion times
//! `f(n_i) / k_i` are as equal as possible. Splitting proportionally to speed
//! is only right for linear `f`; for `n log n` and friends the fast
//! processors should receive a little less.
//!
//! ```
//! use hetpart::{ClusterSpecF64, CostFunctionF64, Scheme};
//!
//! let spec = ClusterSpecF64::uniform(&[1.0, 2.0], CostFunctionF64::nlogn()).unwrap();
//! let exact = Scheme::Exact.partition(&spec, 1000, 1).unwrap();
//! let naive = Scheme::Proportional.partition(&spec, 1000, 1).unwrap();
//! assert_eq!(exact.sizes().iter().sum::<u64>(), 1000);
//! assert!(exact.makespan() < naive.makespan());
//! ```
//!
//! Modules:
//!
//! - [`cost_model`]: cost families, evaluation, inverses, Lambert W.
//! - [`partition`]: the partitioning schemes, greedy rounding, the DP optimum.
//! - [`adaptive`]: a cost model learned from observed timings.
//! - [`simulator`]: analytic sample-sort timeline and a real threaded sort.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` / `*F32` aliases below fix the type.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod cost_model;
pub mod partition;
pub mod roots;
pub mod scalar;
pub mod simulator;

pub use adaptive::{run_batches, AdaptiveError, BatchOutcome, KnownPoint, LearnedCostModel, UpdateStrategy};
pub use cost_model::{lambert_w, CostError, CostFamily, CostFunction, CostSpec, Speed, Table};
pub use partition::{dp_optimal, greedy_round, ClusterSpec, NodeCosts, Partition, PartitionError, RealSplit, Scheme};
pub use scalar::Scalar;
pub use simulator::{simulate, SimError, SimParams, SortTimeline};

pub type CostFunctionF64 = CostFunction<f64>;
pub type CostFunctionF32 = CostFunction<f32>;
pub type ClusterSpecF64 = ClusterSpec<f64>;
pub type ClusterSpecF32 = ClusterSpec<f32>;
pub type PartitionF64 = Partition<f64>;
pub type PartitionF32 = Partition<f32>;
pub type LearnedCostModelF64 = LearnedCostModel<f64>;
pub type LearnedCostModelF32 = LearnedCostModel<f32>;
pub type SortTimelineF64 = SortTimeline<f64>;
pub type SimParamsF64 = SimParams<f64>;

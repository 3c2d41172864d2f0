//! Chunk-size vectors `(n_1..n_p)` for heterogeneous processors.
//!
//! Every scheme produces a real-valued split first (exposed through the
//! `*_real` functions) and then rounds it to integers with the greedy
//! leftover assignment in [`greedy_round`]. All outputs sum exactly to `N`.

mod analytic;
mod dp;
pub mod io;
mod rounding;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cost_model::{CostError, CostFunction, Speed};
use crate::scalar::Scalar;

pub use analytic::{
    asymptotic_nlogn, asymptotic_nlogn_real, exact_analytic, exact_analytic_real, multiplicative_closed_form,
    multiplicative_closed_form_real, proportional, proportional_real, taylor_nlogn, taylor_nlogn_real,
};
pub use dp::dp_optimal;
pub use rounding::{greedy_round, greedy_round_by_speed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("a cluster needs at least one processor")]
    EmptyCluster,
    #[error("expected {expected} entries (one per processor), got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("scheme `{scheme}` needs one cost function shared by all processors")]
    RequiresSharedCost { scheme: &'static str },
    #[error("scheme `{scheme}` only applies to {expected} costs")]
    WrongFamily {
        scheme: &'static str,
        expected: &'static str,
    },
    #[error("the multiplicative closed-form theorem does not apply: the cost must satisfy f(ab) = f(a)f(b) (linear or power family)")]
    NotMultiplicative,
    #[error("scheme `{scheme}` needs N >= {min}, got {got}")]
    TooSmall { scheme: &'static str, min: u64, got: u64 },
    #[error("asymptotic regime not reached for N = {n}: fall back to the exact scheme")]
    AsymptoticRegimeNotReached { n: u64 },
    #[error("rounding contract violated: floors sum to {floor_sum}, N = {n}, p = {p} (need floor_sum <= N <= floor_sum + p)")]
    RoundingContract { floor_sum: u64, n: u64, p: usize },
    #[error("real chunk size at node {node} is negative or not finite")]
    InvalidRealSize { node: usize },
    #[error("granularity must be at least 1")]
    ZeroGranularity,
}

/// Cost functions of a cluster: one shared model (uniformly related
/// processors) or one per node (unrelated processors).
#[derive(Debug, Clone, PartialEq)]
pub enum NodeCosts<S> {
    Shared(CostFunction<S>),
    PerNode(Vec<CostFunction<S>>),
}

/// Processor speeds plus the cost model(s) that turn a chunk size into time.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec<S> {
    speeds: Vec<Speed<S>>,
    costs: NodeCosts<S>,
}

impl<S: Scalar> ClusterSpec<S> {
    /// Uniformly related processors sharing the cost function `cost`.
    pub fn uniform(speeds: &[S], cost: CostFunction<S>) -> Result<Self, PartitionError> {
        Ok(Self {
            speeds: Self::checked_speeds(speeds)?,
            costs: NodeCosts::Shared(cost),
        })
    }

    /// Unrelated processors, each with its own cost function.
    pub fn unrelated(speeds: &[S], costs: Vec<CostFunction<S>>) -> Result<Self, PartitionError> {
        let speeds = Self::checked_speeds(speeds)?;
        if costs.len() != speeds.len() {
            return Err(PartitionError::LengthMismatch {
                expected: speeds.len(),
                got: costs.len(),
            });
        }
        Ok(Self {
            speeds,
            costs: NodeCosts::PerNode(costs),
        })
    }

    fn checked_speeds(speeds: &[S]) -> Result<Vec<Speed<S>>, PartitionError> {
        if speeds.is_empty() {
            return Err(PartitionError::EmptyCluster);
        }
        Ok(speeds.iter().map(|&k| Speed::new(k)).collect::<Result<_, _>>()?)
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn speed(&self, node: usize) -> S {
        self.speeds[node].get()
    }

    pub fn speeds(&self) -> impl Iterator<Item = S> + '_ {
        self.speeds.iter().map(|k| k.get())
    }

    pub fn total_speed(&self) -> S {
        self.speeds().sum()
    }

    pub fn min_speed(&self) -> S {
        self.speeds().fold(S::infinity(), S::min)
    }

    pub fn costs(&self) -> &NodeCosts<S> {
        &self.costs
    }

    pub fn cost(&self, node: usize) -> &CostFunction<S> {
        match &self.costs {
            NodeCosts::Shared(f) => f,
            NodeCosts::PerNode(fs) => &fs[node],
        }
    }

    pub fn shared_cost(&self) -> Option<&CostFunction<S>> {
        match &self.costs {
            NodeCosts::Shared(f) => Some(f),
            NodeCosts::PerNode(_) => None,
        }
    }

    /// Time `f_i(n) / k_i` for node `node` to process `n` items.
    #[inline]
    pub fn node_time(&self, node: usize, n: S) -> S {
        self.cost(node).evaluate(n) / self.speed(node)
    }

    #[inline]
    pub fn node_time_count(&self, node: usize, n: u64) -> S {
        self.node_time(node, S::from_count(n))
    }

    fn require_shared(&self, scheme: &'static str) -> Result<&CostFunction<S>, PartitionError> {
        self.shared_cost().ok_or(PartitionError::RequiresSharedCost { scheme })
    }
}

/// Integer chunk sizes with their projected per-node times.
///
/// Invariants: `projected_times[i] = f_i(sizes[i]) / k_i` and
/// `makespan = max(projected_times)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<S> {
    sizes: Vec<u64>,
    projected_times: Vec<S>,
    makespan: S,
}

impl<S: Scalar> Partition<S> {
    /// Evaluates `sizes` under `spec`.
    pub fn from_sizes(spec: &ClusterSpec<S>, sizes: Vec<u64>) -> Result<Self, PartitionError> {
        if sizes.len() != spec.len() {
            return Err(PartitionError::LengthMismatch {
                expected: spec.len(),
                got: sizes.len(),
            });
        }
        let projected_times: Vec<S> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| spec.node_time_count(i, n))
            .collect();
        let makespan = projected_times.iter().copied().fold(S::zero(), S::max);
        Ok(Self {
            sizes,
            projected_times,
            makespan,
        })
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn projected_times(&self) -> &[S] {
        &self.projected_times
    }

    pub fn makespan(&self) -> S {
        self.makespan
    }

    pub fn total(&self) -> u64 {
        self.sizes.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn into_sizes(self) -> Vec<u64> {
        self.sizes
    }
}

/// Real-valued split before rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSplit<S> {
    pub sizes: Vec<S>,
    /// The common completion time `T`, for schemes that solve for it.
    pub deadline: Option<S>,
}

/// The partitioning schemes selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Proportional,
    Taylor,
    Exact,
    Multiplicative,
    Asymptotic,
    Dp,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Proportional,
        Scheme::Taylor,
        Scheme::Exact,
        Scheme::Multiplicative,
        Scheme::Asymptotic,
        Scheme::Dp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proportional => "proportional",
            Scheme::Taylor => "taylor",
            Scheme::Exact => "exact",
            Scheme::Multiplicative => "multiplicative",
            Scheme::Asymptotic => "asymptotic",
            Scheme::Dp => "dp",
        }
    }

    /// Checks that the scheme can run on `spec` without computing anything.
    pub fn validate<S: Scalar>(self, spec: &ClusterSpec<S>) -> Result<(), PartitionError> {
        use crate::cost_model::CostFamily;
        match self {
            Scheme::Proportional | Scheme::Dp => Ok(()),
            Scheme::Exact => spec.require_shared("exact").map(|_| ()),
            Scheme::Multiplicative => {
                if spec.require_shared("multiplicative")?.is_multiplicative() {
                    Ok(())
                } else {
                    Err(PartitionError::NotMultiplicative)
                }
            }
            Scheme::Taylor | Scheme::Asymptotic => {
                let scheme = self.name();
                match spec.require_shared(scheme)?.family() {
                    CostFamily::NLogN => Ok(()),
                    _ => Err(PartitionError::WrongFamily {
                        scheme,
                        expected: "n ln n",
                    }),
                }
            }
        }
    }

    /// Runs the scheme. `granularity` only affects [`Scheme::Dp`].
    pub fn partition<S: Scalar>(
        self,
        spec: &ClusterSpec<S>,
        n: u64,
        granularity: u64,
    ) -> Result<Partition<S>, PartitionError> {
        match self {
            Scheme::Proportional => proportional(spec, n),
            Scheme::Taylor => taylor_nlogn(spec, n),
            Scheme::Exact => exact_analytic(spec, n),
            Scheme::Multiplicative => multiplicative_closed_form(spec, n),
            Scheme::Asymptotic => asymptotic_nlogn(spec, n),
            Scheme::Dp => dp_optimal(spec, n, granularity),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scheme `{0}`; valid schemes: proportional, taylor, exact, multiplicative, asymptotic, dp")]
pub struct UnknownScheme(pub String);

impl FromStr for Scheme {
    type Err = UnknownScheme;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownScheme(s.to_string()))
    }
}

//! Optimal integer partition for unrelated processors by dynamic programming.
//!
//! `best[i][m]` is the smallest makespan achievable by giving `m` units to
//! nodes `0..=i`:
//!
//! ```text
//! best[0][m] = t_0(m)
//! best[i][m] = min_{j = 0..m} max(t_i(j), best[i-1][m - j])
//! ```
//!
//! with `t_i(j) = f_i(j g) / k_i` and `g` the granularity. The table is built in
//! `O(p M²)` time for `M = N / g` units; only the argmin per cell is kept for
//! the traceback (`O(p M)` memory). Among equal makespans the smallest `j` is
//! kept, which leaves more work to lower-index nodes.

use super::rounding::assign_leftover;
use super::{ClusterSpec, Partition, PartitionError};
use crate::scalar::Scalar;

/// Minimises `max_i f_i(n_i) / k_i` over integer compositions of `n`.
///
/// With `granularity = g > 1` the search is restricted to multiples of `g`
/// and the `n mod g` remaining items are handed out by the greedy leftover
/// rule; the result is then optimal only up to that sampling.
pub fn dp_optimal<S: Scalar>(spec: &ClusterSpec<S>, n: u64, granularity: u64) -> Result<Partition<S>, PartitionError> {
    if granularity == 0 {
        return Err(PartitionError::ZeroGranularity);
    }
    let p = spec.len();
    let units = usize::try_from(n / granularity).expect("unit count fits in memory");
    let remainder = n % granularity;

    let time = |node: usize, j: usize| spec.node_time_count(node, j as u64 * granularity);

    let mut best: Vec<S> = (0..=units).map(|m| time(0, m)).collect();
    let mut choice: Vec<Vec<u32>> = Vec::with_capacity(p.saturating_sub(1));
    let mut own: Vec<S> = Vec::with_capacity(units + 1);
    let mut next: Vec<S> = vec![S::zero(); units + 1];

    for node in 1..p {
        own.clear();
        own.extend((0..=units).map(|j| time(node, j)));
        let mut row = vec![0u32; units + 1];
        for m in 0..=units {
            let mut cell = S::infinity();
            let mut arg = 0usize;
            for j in 0..=m {
                let v = own[j].max(best[m - j]);
                if v < cell {
                    cell = v;
                    arg = j;
                }
                // own[j] only grows with j: nothing later can beat `cell`
                if own[j] >= cell {
                    break;
                }
            }
            next[m] = cell;
            row[m] = u32::try_from(arg).expect("unit count fits in u32");
        }
        std::mem::swap(&mut best, &mut next);
        choice.push(row);
    }

    let mut sizes = vec![0u64; p];
    let mut m = units;
    for node in (1..p).rev() {
        let j = choice[node - 1][m] as usize;
        sizes[node] = j as u64 * granularity;
        m -= j;
    }
    sizes[0] = m as u64 * granularity;

    assign_leftover(&mut sizes, remainder, |i, v| spec.node_time_count(i, v));
    Partition::from_sizes(spec, sizes)
}

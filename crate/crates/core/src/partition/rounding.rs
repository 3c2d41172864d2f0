//! Greedy rounding of real chunk sizes to integers.
//!
//! Flooring a real split leaves at most `p` items unassigned. Each leftover
//! item goes to the node whose completion time after receiving it is the
//! smallest. With a known cost the key is `f_i(ñ_i + δ_i + 1) / k_i`; with
//! speeds alone it is the linear `(ñ_i + δ_i + 1) / k_i`. Ties go to the lowest
//! node index.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{ClusterSpec, Partition, PartitionError};
use crate::scalar::Scalar;

struct Keyed<S> {
    key: S,
    node: usize,
}

impl<S: Scalar> PartialEq for Keyed<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Scalar> Eq for Keyed<S> {}

impl<S: Scalar> PartialOrd for Keyed<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> Ord for Keyed<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .partial_cmp(&other.key)
            .unwrap_or(Ordering::Equal)
            .then(self.node.cmp(&other.node))
    }
}

/// Adds `leftover` items to `sizes`, one at a time, each to the node with the
/// smallest `key(node, size_after)`. `O((p + leftover) log p)`.
pub(crate) fn assign_leftover<S, K>(sizes: &mut [u64], leftover: u64, key: K)
where
    S: Scalar,
    K: Fn(usize, u64) -> S,
{
    if leftover == 0 || sizes.is_empty() {
        return;
    }
    let mut heap: BinaryHeap<Reverse<Keyed<S>>> = sizes
        .iter()
        .enumerate()
        .map(|(node, &n)| {
            Reverse(Keyed {
                key: key(node, n + 1),
                node,
            })
        })
        .collect();
    for _ in 0..leftover {
        let Reverse(Keyed { node, .. }) = heap.pop().expect("heap holds one entry per node");
        sizes[node] += 1;
        heap.push(Reverse(Keyed {
            key: key(node, sizes[node] + 1),
            node,
        }));
    }
}

/// Removes `excess` items, each from the node with the largest current time.
fn remove_excess<S, K>(sizes: &mut [u64], excess: u64, key: K)
where
    S: Scalar,
    K: Fn(usize, u64) -> S,
{
    let mut heap: BinaryHeap<Keyed<S>> = sizes
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(node, &n)| Keyed {
            key: key(node, n),
            node,
        })
        .collect();
    for _ in 0..excess {
        let Some(Keyed { node, .. }) = heap.pop() else {
            return;
        };
        sizes[node] -= 1;
        if sizes[node] > 0 {
            heap.push(Keyed {
                key: key(node, sizes[node]),
                node,
            });
        }
    }
}

fn floors<S: Scalar>(real_sizes: &[S]) -> Result<Vec<u64>, PartitionError> {
    real_sizes
        .iter()
        .enumerate()
        .map(|(node, &x)| {
            if x.is_finite() && x >= S::zero() {
                Ok(x.floor_count())
            } else {
                Err(PartitionError::InvalidRealSize { node })
            }
        })
        .collect()
}

fn checked_floors<S: Scalar>(real_sizes: &[S], p: usize, n: u64) -> Result<Vec<u64>, PartitionError> {
    if real_sizes.len() != p {
        return Err(PartitionError::LengthMismatch {
            expected: p,
            got: real_sizes.len(),
        });
    }
    let base = floors(real_sizes)?;
    let floor_sum: u64 = base.iter().sum();
    if floor_sum > n || n - floor_sum > p as u64 {
        return Err(PartitionError::RoundingContract { floor_sum, n, p });
    }
    Ok(base)
}

/// Rounds a real split whose floors leave between 0 and `p` items unassigned.
///
/// The key for node `i` is `f_i(ñ_i + δ_i + 1) / k_i` under `spec`'s cost
/// model(s). Returns [`PartitionError::RoundingContract`] when
/// `Σ floor(real) <= N <= Σ floor(real) + p` does not hold.
pub fn greedy_round<S: Scalar>(
    real_sizes: &[S],
    spec: &ClusterSpec<S>,
    n: u64,
) -> Result<Partition<S>, PartitionError> {
    let mut sizes = checked_floors(real_sizes, spec.len(), n)?;
    let leftover = n - sizes.iter().sum::<u64>();
    assign_leftover(&mut sizes, leftover, |i, m| spec.node_time_count(i, m));
    Partition::from_sizes(spec, sizes)
}

/// [`greedy_round`] with the speed-only key `(ñ_i + δ_i + 1) / k_i`, for
/// callers that know nothing about the cost function. Returns the sizes only.
pub fn greedy_round_by_speed<S: Scalar>(real_sizes: &[S], speeds: &[S], n: u64) -> Result<Vec<u64>, PartitionError> {
    let mut sizes = checked_floors(real_sizes, speeds.len(), n)?;
    let leftover = n - sizes.iter().sum::<u64>();
    assign_leftover(&mut sizes, leftover, |i, m| S::from_count(m) / speeds[i]);
    Ok(sizes)
}

/// Rounds any nonnegative real split to integers summing to `n`.
///
/// Used internally after numerical solves whose real sizes can miss `N` by a
/// rounding error (or by more, when `N` is too small for every node to reach
/// its first cost step). Overshoot is trimmed from the busiest nodes first.
pub(crate) fn round_to_total<S: Scalar>(
    real_sizes: &[S],
    spec: &ClusterSpec<S>,
    n: u64,
) -> Result<Partition<S>, PartitionError> {
    let mut sizes = floors(real_sizes)?;
    let floor_sum: u64 = sizes.iter().sum();
    let key = |i: usize, m: u64| spec.node_time_count(i, m);
    if floor_sum > n {
        remove_excess(&mut sizes, floor_sum - n, key);
    } else {
        assign_leftover(&mut sizes, n - floor_sum, key);
    }
    Partition::from_sizes(spec, sizes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost_model::CostFunction;

    #[test]
    fn symmetric_ties_go_to_lowest_index() {
        let spec = ClusterSpec::uniform(&[1.0, 1.0, 1.0], CostFunction::linear()).unwrap();
        let p = greedy_round(&[3.33, 3.33, 3.33], &spec, 10).unwrap();
        assert_eq!(p.sizes(), &[4, 3, 3]);
    }

    #[test]
    fn literal_key_with_equal_keys_prefers_first_node() {
        // (2+1)/1 == (5+1)/2 == 3: a tie, so node 0 receives the item.
        let sizes = greedy_round_by_speed(&[2.5, 5.0], &[1.0, 2.0], 8).unwrap();
        assert_eq!(sizes, vec![3, 5]);
        let spec = ClusterSpec::uniform(&[1.0, 2.0], CostFunction::linear()).unwrap();
        let p = greedy_round(&[2.5, 5.0], &spec, 8).unwrap();
        assert_eq!(p.sizes(), &[3, 5]);
        assert_eq!(p.makespan(), 3.0);
    }

    #[test]
    fn literal_key_prefers_faster_node_when_strictly_smaller() {
        // (2+1)/1 = 3 > (5+1)/2.5 = 2.4
        let sizes = greedy_round_by_speed(&[2.5, 5.0], &[1.0, 2.5], 8).unwrap();
        assert_eq!(sizes, vec![2, 6]);
    }

    #[test]
    fn cost_aware_key_differs_from_literal_key() {
        // quadratic cost: node 0 (k=1) at 3 -> 9; node 1 (k=4) at 6 -> 9; tie -> node 0
        // node 1 at 6 under the literal key is 6/4 = 1.5 < 3 -> node 1
        let spec = ClusterSpec::uniform(&[1.0, 4.0], CostFunction::power(2.0).unwrap()).unwrap();
        let p = greedy_round(&[2.0, 5.0], &spec, 8).unwrap();
        assert_eq!(p.sizes(), &[3, 5]);
        assert_eq!(greedy_round_by_speed(&[2.0, 5.0], &[1.0, 4.0], 8).unwrap(), vec![2, 6]);
    }

    #[test]
    fn contract_violations() {
        let spec = ClusterSpec::uniform(&[1.0, 1.0], CostFunction::linear()).unwrap();
        assert!(matches!(
            greedy_round(&[1.0, 1.0], &spec, 5),
            Err(PartitionError::RoundingContract {
                floor_sum: 2,
                n: 5,
                p: 2
            })
        ));
        assert!(matches!(
            greedy_round(&[3.0, 3.0], &spec, 5),
            Err(PartitionError::RoundingContract { .. })
        ));
        assert!(matches!(
            greedy_round(&[-1.0, 3.0], &spec, 2),
            Err(PartitionError::InvalidRealSize { node: 0 })
        ));
        assert!(greedy_round(&[1.0], &spec, 1).is_err());
    }

    #[test]
    fn round_to_total_trims_overshoot() {
        let spec = ClusterSpec::uniform(&[1.0, 2.0], CostFunction::linear()).unwrap();
        let p = round_to_total(&[1.0, 1.0], &spec, 1).unwrap();
        assert_eq!(p.sizes(), &[0, 1]);
        let p = round_to_total(&[0.0, 0.0], &spec, 9).unwrap();
        assert_eq!(p.sizes(), &[3, 6]);
    }
}

//! Bracketing root finders for monotone functions.
//!
//! Every solver in the crate inverts a nondecreasing map, so these routines
//! never need sign checks: they search for the point where `g(x)` crosses a
//! target from below.

use crate::scalar::Scalar;

/// Stopping rule for [`bisect_increasing`].
#[derive(Debug, Clone, Copy)]
pub struct Bisection<S> {
    /// Stop once `hi - lo` is at most this wide.
    pub abs_width: S,
    pub max_iter: usize,
}

impl<S: Scalar> Default for Bisection<S> {
    fn default() -> Self {
        Self {
            abs_width: S::lit(1e-12),
            max_iter: 200,
        }
    }
}

/// Doubles `hi` (starting from `hi`, which must be positive) until
/// `g(hi) >= target`. Returns `None` if the bracket cannot be closed within
/// `max_doublings` steps or `hi` overflows.
pub fn grow_upper<S, G>(g: G, target: S, mut hi: S, max_doublings: usize) -> Option<S>
where
    S: Scalar,
    G: Fn(S) -> S,
{
    let two = S::lit(2.0);
    for _ in 0..=max_doublings {
        if g(hi) >= target {
            return Some(hi);
        }
        hi = hi * two;
        if !hi.is_finite() {
            return None;
        }
    }
    None
}

/// Bisects `[lo, hi]` for the crossing `g(x) = target` of a nondecreasing `g`,
/// assuming `g(lo) <= target <= g(hi)`. Returns the midpoint of the final
/// bracket. Terminates early once the bracket collapses to adjacent floats.
pub fn bisect_increasing<S, G>(g: G, target: S, mut lo: S, mut hi: S, rule: Bisection<S>) -> S
where
    S: Scalar,
    G: Fn(S) -> S,
{
    let half = S::lit(0.5);
    for _ in 0..rule.max_iter {
        if hi - lo <= rule.abs_width {
            break;
        }
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        let v = g(mid);
        if v < target {
            lo = mid;
        } else if v > target {
            hi = mid;
        } else {
            return mid;
        }
    }
    lo + (hi - lo) * half
}

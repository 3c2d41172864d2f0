//! Closed-form and root-finding partitioners for uniformly related
//! processors (one shared cost function, per-node speeds).

use super::rounding::round_to_total;
use super::{ClusterSpec, Partition, PartitionError, RealSplit, Scheme};
use crate::roots::{bisect_increasing, grow_upper, Bisection};
use crate::scalar::Scalar;

/// Runs bisection down to adjacent floats.
fn fine_bisection<S: Scalar>() -> Bisection<S> {
    Bisection {
        abs_width: S::zero(),
        max_iter: 2000,
    }
}

/// `n_i = N k_i / K`: sizes proportional to speed.
pub fn proportional_real<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> RealSplit<S> {
    let total = spec.total_speed();
    let nn = S::from_count(n);
    RealSplit {
        sizes: spec.speeds().map(|k| nn * k / total).collect(),
        deadline: None,
    }
}

pub fn proportional<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<Partition<S>, PartitionError> {
    round_to_total(&proportional_real(spec, n).sizes, spec, n)
}

/// First-order correction of the proportional split for `n ln n` costs:
///
/// `n_i = (k_i/K) N + ε_i`, `ε_i = N / ln N · (k_i / K²) Σ_j k_j ln(k_j / k_i)`.
///
/// The corrections sum to zero. For extreme speed ratios at small `N` a size
/// can come out negative; such sizes are clamped to 0 and the rest rescaled
/// to sum to `N` (with a logged warning).
pub fn taylor_nlogn_real<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<RealSplit<S>, PartitionError> {
    Scheme::Taylor.validate(spec)?;
    if n < 2 {
        return Err(PartitionError::TooSmall {
            scheme: "taylor",
            min: 2,
            got: n,
        });
    }
    let nn = S::from_count(n);
    let total = spec.total_speed();
    let lead = nn / nn.ln();
    let speeds: Vec<S> = spec.speeds().collect();
    let mut sizes: Vec<S> = speeds
        .iter()
        .map(|&ki| {
            let spread: S = speeds.iter().map(|&kj| kj * (kj / ki).ln()).sum();
            let eps = lead * ki / (total * total) * spread;
            ki / total * nn + eps
        })
        .collect();

    if sizes.iter().any(|&x| x < S::zero()) {
        log::warn!("taylor split produced negative sizes at N = {n}; clamping to 0 and renormalising");
        for x in sizes.iter_mut() {
            *x = x.max(S::zero());
        }
        let kept: S = sizes.iter().copied().sum();
        for x in sizes.iter_mut() {
            *x = *x * nn / kept;
        }
    }
    Ok(RealSplit { sizes, deadline: None })
}

pub fn taylor_nlogn<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<Partition<S>, PartitionError> {
    let real = taylor_nlogn_real(spec, n)?;
    round_to_total(&real.sizes, spec, n)
}

/// Solves `Σ f⁻¹(T k_i) = N` for the common completion time `T` and returns
/// `n_i = f⁻¹(T k_i)`.
///
/// The left side is nondecreasing in `T`; bisection runs on
/// `[0, f(N) / min k]`, where the upper end is the time the slowest node
/// would need for the whole batch.
pub fn exact_analytic_real<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<RealSplit<S>, PartitionError> {
    let f = spec.require_shared("exact")?;
    let p = spec.len();
    if n == 0 {
        return Ok(RealSplit {
            sizes: vec![S::zero(); p],
            deadline: Some(S::zero()),
        });
    }
    let nn = S::from_count(n);
    let speeds: Vec<S> = spec.speeds().collect();
    let assigned = |t: S| -> S { speeds.iter().map(|&k| f.inverse(t * k)).sum() };

    let mut hi = f.evaluate(nn) / spec.min_speed();
    if !(hi > S::zero()) || assigned(hi) < nn {
        // f(N) can be 0 for tiny N (n ln n at N = 1)
        let start = if hi > S::zero() { hi } else { S::one() };
        hi = grow_upper(assigned, nn, start, 4096).unwrap_or(S::max_value());
    }
    let t = bisect_increasing(assigned, nn, S::zero(), hi, fine_bisection());
    Ok(RealSplit {
        sizes: speeds.iter().map(|&k| f.inverse(t * k)).collect(),
        deadline: Some(t),
    })
}

pub fn exact_analytic<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<Partition<S>, PartitionError> {
    let real = exact_analytic_real(spec, n)?;
    round_to_total(&real.sizes, spec, n)
}

/// Closed form for multiplicative costs (`f(ab) = f(a) f(b)`):
/// `n_i = f⁻¹(k_i) / Σ_j f⁻¹(k_j) · N`.
///
/// A scale factor on the cost cancels out of the shares, so scaled power
/// costs are accepted as well.
pub fn multiplicative_closed_form_real<S: Scalar>(
    spec: &ClusterSpec<S>,
    n: u64,
) -> Result<RealSplit<S>, PartitionError> {
    Scheme::Multiplicative.validate(spec)?;
    let f = spec.require_shared("multiplicative")?;
    let shares: Vec<S> = spec.speeds().map(|k| f.inverse(k)).collect();
    let total: S = shares.iter().copied().sum();
    let nn = S::from_count(n);
    let sizes: Vec<S> = shares.iter().map(|&s| s / total * nn).collect();
    let deadline = spec.node_time(0, sizes[0]);
    Ok(RealSplit {
        sizes,
        deadline: Some(deadline),
    })
}

pub fn multiplicative_closed_form<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<Partition<S>, PartitionError> {
    let real = multiplicative_closed_form_real(spec, n)?;
    round_to_total(&real.sizes, spec, n)
}

/// Two-term development of the inverse of `n ln n`:
/// `y / W(y) ≈ (y ln y + y ln ln y) / (ln y)²`, valid for `y > e`.
pub(crate) fn nlogn_inverse_expansion<S: Scalar>(y: S) -> S {
    let l = y.ln();
    (y * l + y * l.ln()) / (l * l)
}

/// O(p)-per-step approximation of [`exact_analytic_real`] for `n ln n`
/// costs: solves `Σ g(T k_i) = N` with `g` the two-term development of the
/// Lambert-W inverse ([`nlogn_inverse_expansion`]), then `n_i = g(T k_i)`.
///
/// The development needs `T min k > e`. If even the smallest admissible `T`
/// assigns `N` or more items, the batch is too small and
/// [`PartitionError::AsymptoticRegimeNotReached`] is returned.
pub fn asymptotic_nlogn_real<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<RealSplit<S>, PartitionError> {
    Scheme::Asymptotic.validate(spec)?;
    if n < 2 {
        return Err(PartitionError::TooSmall {
            scheme: "asymptotic",
            min: 2,
            got: n,
        });
    }
    let scale = spec.require_shared("asymptotic")?.scale();
    let speeds: Vec<S> = spec.speeds().collect();
    let nn = S::from_count(n);
    let assigned = |t: S| -> S { speeds.iter().map(|&k| nlogn_inverse_expansion(t * k / scale)).sum() };

    let lo = S::e() * scale / spec.min_speed();
    if assigned(lo) >= nn {
        return Err(PartitionError::AsymptoticRegimeNotReached { n });
    }
    let hi =
        grow_upper(assigned, nn, lo * S::lit(2.0), 4096).ok_or(PartitionError::AsymptoticRegimeNotReached { n })?;
    let t = bisect_increasing(assigned, nn, lo, hi, fine_bisection());
    Ok(RealSplit {
        sizes: speeds.iter().map(|&k| nlogn_inverse_expansion(t * k / scale)).collect(),
        deadline: Some(t),
    })
}

pub fn asymptotic_nlogn<S: Scalar>(spec: &ClusterSpec<S>, n: u64) -> Result<Partition<S>, PartitionError> {
    let real = asymptotic_nlogn_real(spec, n)?;
    round_to_total(&real.sizes, spec, n)
}

//! Principal branch of the Lambert W function on nonnegative reals.

use super::CostError;
use crate::scalar::Scalar;

const MAX_ITER: usize = 64;

/// Solves `w * exp(w) = x` for `x >= 0` (principal branch).
///
/// Below `e` the iteration runs Halley's method on `w e^w - x` starting from
/// `ln(1 + x)`. Above `e` it runs Halley's method on the log form
/// `w + ln w - ln x`, seeded with [`asymptotic_w`], which avoids overflowing
/// `e^w` for huge inputs.
pub fn lambert_w<S: Scalar>(x: S) -> Result<S, CostError> {
    if x.is_nan() || x < S::zero() {
        return Err(CostError::Domain {
            what: "lambert_w",
            value: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    if x == S::zero() {
        return Ok(S::zero());
    }
    if x.is_infinite() {
        return Ok(x);
    }
    let one = S::one();
    let two = S::lit(2.0);
    let tol = S::epsilon() * S::lit(4.0);

    if x <= S::e() {
        let mut w = (one + x).ln();
        for _ in 0..MAX_ITER {
            let ew = w.exp();
            let f = w * ew - x;
            let wp1 = w + one;
            let denom = ew * wp1 - (w + two) * f / (two * wp1);
            let step = f / denom;
            w = w - step;
            if step.abs() <= tol * (one + w.abs()) {
                break;
            }
        }
        return Ok(w);
    }

    let ln_x = x.ln();
    let mut w = asymptotic_w(x)?;
    for _ in 0..MAX_ITER {
        // g(w) = w + ln w - ln x, g' = 1 + 1/w, g'' = -1/w^2
        let g = w + w.ln() - ln_x;
        let g1 = one + one / w;
        let g2 = -one / (w * w);
        let step = two * g * g1 / (two * g1 * g1 - g * g2);
        w = w - step;
        if step.abs() <= tol * (one + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// The two-term development `ln x - ln ln x` of W for `x > e`.
///
/// This is only an approximation (the neglected terms decay like
/// `ln ln x / ln x`); it seeds [`lambert_w`].
pub fn asymptotic_w<S: Scalar>(x: S) -> Result<S, CostError> {
    if x.is_nan() || x <= S::e() {
        return Err(CostError::Domain {
            what: "asymptotic_w (requires x > e)",
            value: x.to_f64().unwrap_or(f64::NAN),
        });
    }
    let ln_x = x.ln();
    Ok(ln_x - ln_x.ln())
}

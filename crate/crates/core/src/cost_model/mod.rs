//! Strictly increasing cost functions `f(n)`, their inverses, and the
//! Lambert W machinery used to invert `n ln n` in closed form.
//!
//! A [`CostFunction`] is a family times a positive `scale`. The time taken by a
//! processor of relative speed `k` on `n` items is `f(n) / k`.

mod lambert;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::roots::{bisect_increasing, grow_upper, Bisection};
use crate::scalar::Scalar;

pub use lambert::{asymptotic_w, lambert_w};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("cost model undefined: a table needs at least one point")]
    ModelUndefined,
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("{what}: argument {value} outside the domain")]
    Domain { what: &'static str, value: f64 },
}

/// Relative speed `k_i` of a processor. Always finite and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Speed<S>(S);

impl<S: Scalar> Speed<S> {
    pub fn new(value: S) -> Result<Self, CostError> {
        if value.is_finite() && value > S::zero() {
            Ok(Self(value))
        } else {
            Err(CostError::InvalidParameter {
                name: "speed",
                value: value.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    #[inline]
    pub fn get(self) -> S {
        self.0
    }
}

impl<S: Scalar> Serialize for Speed<S> {
    fn serialize<Ser: serde::Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for Speed<S> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = S::deserialize(deserializer)?;
        Speed::new(v).map_err(serde::de::Error::custom)
    }
}

/// Known `(size, cost)` points, strictly increasing in both coordinates and
/// anchored at the origin.
///
/// Interpolation is piecewise-linear. Past the last point the function
/// continues linearly with slope `max(last segment slope, cost_last / size_last)`,
/// so extrapolation never grows slower than the secant through the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<S> {
    points: Vec<(u64, S)>,
}

impl<S: Scalar> Table<S> {
    pub fn new(points: Vec<(u64, S)>) -> Result<Self, CostError> {
        if points.is_empty() {
            return Err(CostError::ModelUndefined);
        }
        let mut prev = (0u64, S::zero());
        for (i, &(size, cost)) in points.iter().enumerate() {
            if !cost.is_finite() {
                return Err(CostError::InvalidTable(format!("point {i} has non-finite cost")));
            }
            if size <= prev.0 || cost <= prev.1 {
                return Err(CostError::InvalidTable(format!(
                    "point {i} ({size}, {cost}) is not strictly above ({}, {}); sizes and costs must be positive and strictly increasing",
                    prev.0, prev.1
                )));
            }
            prev = (size, cost);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(u64, S)] {
        &self.points
    }

    fn tail_slope(&self) -> S {
        tail_slope(&self.points)
    }

    fn evaluate(&self, n: S) -> S {
        interpolate_points(&self.points, n)
    }

    fn inverse(&self, c: S) -> S {
        let idx = self.points.partition_point(|&(_, v)| v < c);
        let (s1, c1) = match self.points.get(idx) {
            Some(&p) => p,
            None => {
                let (s_last, c_last) = *self.points.last().unwrap();
                return S::from_count(s_last) + (c - c_last) / self.tail_slope();
            }
        };
        let (s0, c0) = if idx == 0 { (0, S::zero()) } else { self.points[idx - 1] };
        let (x0, x1) = (S::from_count(s0), S::from_count(s1));
        x0 + (x1 - x0) * (c - c0) / (c1 - c0)
    }
}

fn tail_slope<S: Scalar>(points: &[(u64, S)]) -> S {
    let n = points.len();
    let (s_last, c_last) = points[n - 1];
    let secant = c_last / S::from_count(s_last);
    if n == 1 {
        return secant;
    }
    let (s_prev, c_prev) = points[n - 2];
    let seg = (c_last - c_prev) / S::from_count(s_last - s_prev);
    seg.max(secant)
}

/// Piecewise-linear interpolation through the origin and `points` (sizes
/// strictly increasing, costs non-decreasing), extrapolated like [`Table`].
/// Returns the stored cost exactly at a known size.
pub(crate) fn interpolate_points<S: Scalar>(points: &[(u64, S)], n: S) -> S {
    let idx = points.partition_point(|&(s, _)| S::from_count(s) < n);
    let (s1, c1) = match points.get(idx) {
        Some(&p) => p,
        None => {
            let (s_last, c_last) = points[points.len() - 1];
            return c_last + (n - S::from_count(s_last)) * tail_slope(points);
        }
    };
    let x1 = S::from_count(s1);
    if n == x1 {
        return c1;
    }
    let (s0, c0) = if idx == 0 { (0, S::zero()) } else { points[idx - 1] };
    let x0 = S::from_count(s0);
    c0 + (c1 - c0) * (n - x0) / (x1 - x0)
}

/// Shape of a cost function, before scaling.
#[derive(Debug, Clone, PartialEq)]
pub enum CostFamily<S> {
    /// `n`
    Linear,
    /// `n^exponent`
    Power {
        exponent: S,
    },
    /// `n ln n`, taken as 0 on `[0, 1]`.
    NLogN,
    /// `n^a (ln n)^b`, taken as 0 on `[0, 1]` when `b > 0`.
    PolyLog {
        a: S,
        b: S,
    },
    Table(Table<S>),
}

/// A strictly increasing cost model `f(n) = scale * family(n)`.
///
/// Values are immutable once built and validated on construction (including
/// deserialization), so evaluation never fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CostSpec<S>", into = "CostSpec<S>", bound = "S: Scalar")]
pub struct CostFunction<S> {
    family: CostFamily<S>,
    scale: S,
}

impl<S: Scalar> CostFunction<S> {
    pub fn new(family: CostFamily<S>, scale: S) -> Result<Self, CostError> {
        let bad = |name, v: S| CostError::InvalidParameter {
            name,
            value: v.to_f64().unwrap_or(f64::NAN),
        };
        if !(scale.is_finite() && scale > S::zero()) {
            return Err(bad("scale", scale));
        }
        match &family {
            CostFamily::Power { exponent } if !(exponent.is_finite() && *exponent > S::zero()) => {
                return Err(bad("exponent", *exponent));
            }
            CostFamily::PolyLog { a, .. } if !(a.is_finite() && *a > S::zero()) => {
                return Err(bad("a", *a));
            }
            CostFamily::PolyLog { b, .. } if !(b.is_finite() && *b >= S::zero()) => {
                return Err(bad("b", *b));
            }
            _ => {}
        }
        Ok(Self { family, scale })
    }

    pub fn linear() -> Self {
        Self {
            family: CostFamily::Linear,
            scale: S::one(),
        }
    }

    pub fn nlogn() -> Self {
        Self {
            family: CostFamily::NLogN,
            scale: S::one(),
        }
    }

    pub fn power(exponent: S) -> Result<Self, CostError> {
        Self::new(CostFamily::Power { exponent }, S::one())
    }

    pub fn polylog(a: S, b: S) -> Result<Self, CostError> {
        Self::new(CostFamily::PolyLog { a, b }, S::one())
    }

    pub fn table(points: Vec<(u64, S)>) -> Result<Self, CostError> {
        Self::new(CostFamily::Table(Table::new(points)?), S::one())
    }

    /// Returns a copy with `scale` replaced.
    pub fn with_scale(self, scale: S) -> Result<Self, CostError> {
        Self::new(self.family, scale)
    }

    pub fn family(&self) -> &CostFamily<S> {
        &self.family
    }

    pub fn scale(&self) -> S {
        self.scale
    }

    /// `f(xy) = f(x) f(y)` holds for the unscaled family.
    pub fn is_multiplicative(&self) -> bool {
        matches!(self.family, CostFamily::Linear | CostFamily::Power { .. })
    }

    /// Real-interpolated cost `f(n)`. Negative inputs are treated as 0.
    pub fn evaluate(&self, n: S) -> S {
        let zero = S::zero();
        if !(n > zero) {
            return zero;
        }
        let one = S::one();
        let raw = match &self.family {
            CostFamily::Linear => n,
            CostFamily::Power { exponent } => n.powf(*exponent),
            CostFamily::NLogN => {
                if n <= one {
                    zero
                } else {
                    n * n.ln()
                }
            }
            CostFamily::PolyLog { a, b } => {
                if *b == zero {
                    n.powf(*a)
                } else if n <= one {
                    zero
                } else {
                    n.powf(*a) * n.ln().powf(*b)
                }
            }
            CostFamily::Table(t) => t.evaluate(n),
        };
        self.scale * raw
    }

    /// Integer-size convenience for [`evaluate`](Self::evaluate).
    #[inline]
    pub fn evaluate_count(&self, n: u64) -> S {
        self.evaluate(S::from_count(n))
    }

    /// `f⁻¹(c)`: the size whose cost is `c`, with `f⁻¹(0) = 0`.
    ///
    /// Closed forms are used for linear, power, table and `n ln n` (through
    /// Lambert W); poly-log costs fall back to bisection.
    pub fn inverse(&self, c: S) -> S {
        let zero = S::zero();
        if !(c > zero) {
            return zero;
        }
        let y = c / self.scale;
        match &self.family {
            CostFamily::Linear => y,
            CostFamily::Power { exponent } => y.powf(exponent.recip()),
            CostFamily::NLogN => {
                if y.is_infinite() {
                    return y;
                }
                // n ln n = y  <=>  ln n = W(y)  <=>  n = y / W(y)
                let w = lambert_w(y).expect("positive argument");
                y / w
            }
            CostFamily::PolyLog { a, b } if *b == zero => y.powf(a.recip()),
            CostFamily::PolyLog { .. } => self.inverse_by_bisection(c),
            CostFamily::Table(t) => t.inverse(y),
        }
    }

    /// Generic inverse for any increasing family: grow `[0, 2]` by doubling
    /// until it brackets `c`, then bisect.
    pub fn inverse_by_bisection(&self, c: S) -> S {
        if !(c > S::zero()) {
            return S::zero();
        }
        let f = |x: S| self.evaluate(x);
        match grow_upper(f, c, S::lit(2.0), 2048) {
            Some(hi) => bisect_increasing(f, c, S::zero(), hi, Bisection::default()),
            None => S::infinity(),
        }
    }
}

/// Serialized form: `{"family":"nlogn","scale":1.0}`,
/// `{"family":"power","exponent":2}`, `{"family":"table","points":[[1000,10000]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", bound = "S: Scalar")]
pub enum CostSpec<S> {
    Linear {
        #[serde(default = "unit_scale")]
        scale: S,
    },
    Power {
        exponent: S,
        #[serde(default = "unit_scale")]
        scale: S,
    },
    Nlogn {
        #[serde(default = "unit_scale")]
        scale: S,
    },
    Polylog {
        a: S,
        b: S,
        #[serde(default = "unit_scale")]
        scale: S,
    },
    Table {
        points: Vec<(u64, S)>,
        #[serde(default = "unit_scale")]
        scale: S,
    },
}

fn unit_scale<S: Scalar>() -> S {
    S::one()
}

impl<S: Scalar> TryFrom<CostSpec<S>> for CostFunction<S> {
    type Error = CostError;
    fn try_from(spec: CostSpec<S>) -> Result<Self, Self::Error> {
        let (family, scale) = match spec {
            CostSpec::Linear { scale } => (CostFamily::Linear, scale),
            CostSpec::Power { exponent, scale } => (CostFamily::Power { exponent }, scale),
            CostSpec::Nlogn { scale } => (CostFamily::NLogN, scale),
            CostSpec::Polylog { a, b, scale } => (CostFamily::PolyLog { a, b }, scale),
            CostSpec::Table { points, scale } => (CostFamily::Table(Table::new(points)?), scale),
        };
        CostFunction::new(family, scale)
    }
}

impl<S: Scalar> From<CostFunction<S>> for CostSpec<S> {
    fn from(f: CostFunction<S>) -> Self {
        let scale = f.scale;
        match f.family {
            CostFamily::Linear => CostSpec::Linear { scale },
            CostFamily::Power { exponent } => CostSpec::Power { exponent, scale },
            CostFamily::NLogN => CostSpec::Nlogn { scale },
            CostFamily::PolyLog { a, b } => CostSpec::Polylog { a, b, scale },
            CostFamily::Table(t) => CostSpec::Table {
                points: t.points,
                scale,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn linear_identity() {
        assert_eq!(CostFunction::<f64>::linear().evaluate(7.0), 7.0);
    }

    #[test]
    fn nlogn_at_e() {
        assert!((CostFunction::<f64>::nlogn().evaluate(E) - E).abs() < 1e-15);
    }

    #[test]
    fn scaled_power() {
        let f = CostFunction::power(2.0).unwrap().with_scale(3.0).unwrap();
        assert_eq!(f.evaluate(4.0), 48.0);
    }

    #[test]
    fn nlogn_is_zero_on_unit_interval() {
        let f = CostFunction::<f64>::nlogn();
        for n in [0.0, 0.3, 0.999, 1.0] {
            assert_eq!(f.evaluate(n), 0.0);
        }
        assert!(f.evaluate(1.0001) > 0.0);
    }

    #[test]
    fn power_inverse_is_root() {
        assert_eq!(CostFunction::power(2.0).unwrap().inverse(49.0), 7.0);
    }

    #[test]
    fn inverse_of_zero_is_zero() {
        assert_eq!(CostFunction::<f64>::nlogn().inverse(0.0), 0.0);
        let t = CostFunction::table(vec![(10, 5.0)]).unwrap();
        assert_eq!(t.inverse(0.0), 0.0);
    }

    #[test]
    fn nlogn_inverse_matches_bisection_oracle() {
        // oracle: plain bisection on x ln x over [1, 1000]
        let (mut lo, mut hi) = (1.0_f64, 1000.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid.ln() < 1000.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let f = CostFunction::<f64>::nlogn();
        let x = f.inverse(1000.0);
        assert!((x - oracle).abs() < 1e-9 * oracle);
        assert!((f.evaluate(x) - 1000.0).abs() <= 1e-9 * 1000.0);
    }

    #[test]
    fn polylog_inverse_hits_target() {
        let f = CostFunction::polylog(1.0, 2.0).unwrap();
        for c in [1e-3_f64, 1.0, 37.5, 1e6, 1e12] {
            let x = f.inverse(c);
            assert!((f.evaluate(x) - c).abs() <= (1e-9 * c).max(1e-9), "c={c}");
        }
    }

    #[test]
    fn polylog_with_zero_log_exponent_is_power() {
        let f = CostFunction::polylog(1.5, 0.0).unwrap();
        let g = CostFunction::power(1.5).unwrap();
        assert_eq!(f.evaluate(0.5), g.evaluate(0.5));
        assert_eq!(f.inverse(20.0), g.inverse(20.0));
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let f = CostFunction::table(vec![(10, 100.0), (20, 400.0)]).unwrap();
        assert_eq!(f.evaluate(5.0), 50.0);
        assert_eq!(f.evaluate(15.0), 250.0);
        // tail slope = max(30, 20) = 30
        assert_eq!(f.evaluate(30.0), 700.0);
        for c in [10.0_f64, 100.0, 250.0, 700.0] {
            assert!((f.evaluate(f.inverse(c)) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_table_is_secant_line() {
        let f = CostFunction::table(vec![(1000, 10000.0)]).unwrap();
        assert_eq!(f.evaluate(500.0), 5000.0);
        assert_eq!(f.evaluate(2000.0), 20000.0);
    }

    #[test]
    fn empty_table_is_undefined() {
        assert_eq!(
            CostFunction::<f64>::table(vec![]).unwrap_err(),
            CostError::ModelUndefined
        );
    }

    #[test]
    fn non_monotone_table_rejected() {
        assert!(matches!(
            CostFunction::table(vec![(10, 5.0), (20, 5.0)]),
            Err(CostError::InvalidTable(_))
        ));
        assert!(CostFunction::table(vec![(10, 5.0), (10, 6.0)]).is_err());
        assert!(CostFunction::table(vec![(0, 0.0)]).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(CostFunction::power(0.0).is_err());
        assert!(CostFunction::polylog(1.0, -1.0).is_err());
        assert!(CostFunction::<f64>::linear().with_scale(0.0).is_err());
        assert!(Speed::new(0.0).is_err());
        assert!(Speed::new(f64::INFINITY).is_err());
    }

    #[test]
    fn config_round_trip() {
        let f: CostFunction<f64> = serde_json::from_str(r#"{"family":"nlogn","scale":1.0}"#).unwrap();
        assert_eq!(f, CostFunction::nlogn());
        let t: CostFunction<f64> =
            serde_json::from_str(r#"{"family":"table","points":[[1000,10000],[2000,25000]]}"#).unwrap();
        assert_eq!(t.evaluate(1500.0), 17500.0);
        let back: CostFunction<f64> = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        let bad = serde_json::from_str::<CostFunction<f64>>(r#"{"family":"table","points":[]}"#);
        assert!(bad.is_err());
        let p: CostFunction<f32> = serde_json::from_str(r#"{"family":"power","exponent":2}"#).unwrap();
        assert_eq!(p.evaluate(3.0), 9.0);
    }

    #[test]
    fn power_multiplicative_up_to_scale() {
        let f = CostFunction::power(2.5).unwrap().with_scale(4.0).unwrap();
        let (a, b) = (3.0_f64, 7.0_f64);
        let lhs = f.evaluate(a * b);
        let rhs = f.evaluate(a) * f.evaluate(b) / f.scale();
        assert!((lhs - rhs).abs() < 1e-12 * lhs);
    }
}

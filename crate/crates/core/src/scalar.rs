use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used by the cost models and partitioners: `f32` or `f64`.
///
/// Tolerances quoted in the docs assume `f64`; `f32` works through the same
/// code paths with correspondingly looser accuracy.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every finite `f64` is representable (possibly
    /// rounded) in the supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Floors a nonnegative value into a count. NaN and negatives map to 0.
    #[inline]
    fn floor_count(self) -> u64 {
        if !(self > Self::zero()) {
            return 0;
        }
        self.floor().to_u64().unwrap_or(u64::MAX)
    }

    #[inline]
    fn e() -> Self {
        Self::lit(std::f64::consts::E)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

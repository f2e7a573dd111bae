//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Geometry, softmax, co-occurrence tables and AP are written once against
//! [`Scalar`] and instantiated for `f32` and `f64`. Exact joint/marginal
//! ratios are exposed separately as [`num_rational::Ratio<u64>`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable throughout the pipeline: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal or configuration value.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Scalar")
    }

    /// Converts a count.
    fn from_count(count: usize) -> Self {
        Self::from_usize(count).expect("count is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the largest entry; ties go to the lowest index.
///
/// Returns `None` for an empty slice.
pub fn argmax<S: Scalar>(values: &[S]) -> Option<(usize, S)> {
    let mut best: Option<(usize, S)> = None;
    for (idx, &value) in values.iter().enumerate() {
        match best {
            Some((_, current)) if value <= current => {}
            _ => best = Some((idx, value)),
        }
    }
    best
}

//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point: f32 or f64.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless for f64, rounding for f32.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 always converts")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize always converts to a float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float always converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

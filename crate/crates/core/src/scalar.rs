//! Scalar abstraction shared by the numerical core.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point type the spectral machinery runs on: `f32` or `f64`.
///
/// The rational symbol evaluations in [`crate::params`] only need
/// [`num_traits::Num`], so they also accept exact types such as
/// `num_rational::Ratio<i64>`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Index or count as a scalar.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

//! Scalar abstraction: the whole library is generic over the floating-point
//! type through this trait, with `f32` and `f64` as the provided instances.
//! Stated tolerances elsewhere in the crate (1e-10 round trips and the like)
//! assume `f64`; `f32` works but with correspondingly looser accuracy.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};
use std::fmt::{Debug, Display, LowerExp};

/// Floating-point scalar usable everywhere in the crate.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + rustfft::FftNum
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, panicking only for values outside the
    /// type's range (never happens for the constants used here).
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 constant representable in Scalar")
    }

    /// Widening (or identity) conversion to `f64`.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("Scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

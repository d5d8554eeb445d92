//! Floating-point abstraction for the probability and amplitude arithmetic.
//!
//! All numeric code in this crate is generic over [`Scalar`] so the same
//! formulas run in `f32` or `f64`. The crate root exports `f64` aliases,
//! which is what the CLI and the test suite use.

use std::fmt;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type for probabilities, amplitudes and entropies: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance used when validating states, observables and
    /// probability tables at this precision.
    fn validation_tolerance() -> Self;

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    /// Lossless-enough conversion from `f64` for constants and literals.
    fn from_real(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to any scalar")
    }

    /// Widening conversion used when comparing against uniform `f64` draws.
    fn to_real(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f64 {
    fn validation_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn validation_tolerance() -> Self {
        1e-5
    }
}

//! Floating-point scalar abstraction for the analytic layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used by CF analysis and the error bounds: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Conversion of an f64 constant.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Nearest scalar to an exact rational (correctly rounded through f64).
    fn from_ratio(q: &BigRational) -> Self {
        Self::lit(ratio_to_f64(q))
    }

    /// Upward slack added at each bound-producing stage.
    ///
    /// 1e-12 for f64; scaled with machine epsilon for narrower types.
    fn slack() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Correctly rounded rational to f64.
pub fn ratio_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

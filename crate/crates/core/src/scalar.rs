use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the numeric kernels are generic over: `f32` or `f64`.
///
/// Configuration values and reported statistics stay `f64`; they cross into the
/// working precision through [`Scalar::cast`].
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from `f64` for constants and configuration values.
    fn cast(v: f64) -> Self {
        Self::from_f64(v).expect("f64 value must be representable in the scalar type")
    }

    /// Widening (or identity) conversion used when reporting results.
    fn lossy_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

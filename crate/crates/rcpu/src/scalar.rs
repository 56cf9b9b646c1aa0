use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type for all matrix math (f32 or f64).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from f64, for tolerances and literals.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from(x).expect("f64 -> scalar conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst};
use rustfft::FftNum;
use serde::Serialize;

/// Floating-point scalar the lattice calculus is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FftNum + Sum + Display + Debug + Default + Serialize
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite f64 literal")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        <Self as num_traits::FromPrimitive>::from_usize(x).expect("usize fits")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FloatConst + FftNum + Sum + Display + Debug + Default + Serialize
{
}

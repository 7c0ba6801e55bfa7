//! Floating point abstraction shared by the solvers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used by the simulator, the program builder and the conic solver.
///
/// Implemented for `f32` and `f64`. Data files are always parsed as `f64`
/// and converted with [`Scalar::of`].
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + serde::Serialize
    + 'static
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Default solver tolerance: `1e-8` clamped from below by a multiple of
    /// machine epsilon so that single precision stays attainable.
    #[inline]
    fn default_tolerance() -> Self {
        Self::of(1e-8).max(Self::epsilon() * Self::of(100.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Infinity norm of a slice.
pub(crate) fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

//! Scalar abstraction shared by the floating-point modules.
//!
//! Geometry, optimization, moments and phase retrieval are written against
//! [`Scalar`], which is implemented for `f32` and `f64`. The exact
//! combinatorics in [`crate::zonal`] only need `num_traits::Num` and also run
//! over [`crate::Rational`].

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + std::fmt::Debug + 'static
{
    /// Tolerance for projector and frame validation.
    fn proj_tol() -> Self;

    /// Tolerance for `sum of weights = 1`.
    fn weight_tol() -> Self;

    /// Machine epsilon.
    fn eps() -> Self;
}

impl Scalar for f64 {
    fn proj_tol() -> Self {
        1e-9
    }

    fn weight_tol() -> Self {
        1e-12
    }

    fn eps() -> Self {
        f64::EPSILON
    }
}

impl Scalar for f32 {
    fn proj_tol() -> Self {
        1e-4
    }

    fn weight_tol() -> Self {
        1e-5
    }

    fn eps() -> Self {
        f32::EPSILON
    }
}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn cst<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("integer representable in scalar type")
}

#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

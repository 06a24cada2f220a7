use std::fmt::{Debug, Display};
use std::iter::{Product, Sum};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. The per-type tolerances scale the
/// singularity and rank thresholds so that the same code path works at
/// both precisions; all default tolerances quoted in the documentation
/// refer to the `f64` instantiation.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Product
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Tolerance for structural checks (row sums, symmetry).
    fn strict_tol() -> Self;
    /// Smallest-pivot threshold for direct linear solves.
    fn pivot_tol() -> Self;
    /// Rank threshold for orthonormal basis extraction.
    fn basis_tol() -> Self;
}

impl Scalar for f64 {
    fn strict_tol() -> f64 {
        1e-12
    }
    fn pivot_tol() -> f64 {
        1e-12
    }
    fn basis_tol() -> f64 {
        1e-10
    }
}

impl Scalar for f32 {
    fn strict_tol() -> f32 {
        1e-5
    }
    fn pivot_tol() -> f32 {
        1e-6
    }
    fn basis_tol() -> f32 {
        1e-4
    }
}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 value not representable in scalar type")
}

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// Numbers the linear parts of the crate (cost model, counting ratios) can
/// work over. Implemented for every primitive float and for
/// `num_rational::Ratio<i64>`.
pub trait Scalar: Num + FromPrimitive + Copy + PartialOrd + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Num + FromPrimitive + Copy + PartialOrd + Debug + Send + Sync + 'static {}

/// Scalars that also support square roots and the rest of [`Float`]; needed
/// by geometry and standard deviations.
pub trait Real: Scalar + Float {}

impl<T> Real for T where T: Scalar + Float {}

/// Converts a count to a scalar. Panics only if `T` cannot represent small
/// integers, which no supported scalar does.
pub(crate) fn from_count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("scalar type cannot represent a count")
}

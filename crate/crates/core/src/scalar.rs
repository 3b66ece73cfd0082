//! Scalar abstraction for simulated time and work.
//!
//! Everything downstream of workload generation (engine, policies, metrics)
//! is written against [`Scalar`]. `f64` is the reference instantiation;
//! `f32` works for small instances but its tolerances are necessarily looser.

use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// floating point time/work value: f32 or f64
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Absolute tolerance when comparing event times.
    const TIME_TOLERANCE: f64;
    /// Tolerance on the sum of an allocation's fractions.
    const ALLOCATION_TOLERANCE: f64;
    /// Largest virtual remaining work accepted at a virtual completion.
    const VIRTUAL_TOLERANCE: f64;

    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    fn time_tolerance() -> Self {
        Self::of(Self::TIME_TOLERANCE)
    }

    fn allocation_tolerance() -> Self {
        Self::of(Self::ALLOCATION_TOLERANCE)
    }

    fn virtual_tolerance() -> Self {
        Self::of(Self::VIRTUAL_TOLERANCE)
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in Scalar")
    }
}

impl Scalar for f64 {
    const TIME_TOLERANCE: f64 = 1e-9;
    const ALLOCATION_TOLERANCE: f64 = 1e-9;
    const VIRTUAL_TOLERANCE: f64 = 1e-6;
}

impl Scalar for f32 {
    const TIME_TOLERANCE: f64 = 1e-4;
    const ALLOCATION_TOLERANCE: f64 = 1e-5;
    const VIRTUAL_TOLERANCE: f64 = 1e-2;
}

/// Totally ordered wrapper so scalars can key ordered collections.
///
/// Panics on comparison if either side is NaN; simulated quantities are
/// never NaN when the inputs are valid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrdScalar<T>(pub T);

impl<T: Scalar> Eq for OrdScalar<T> {}

impl<T: Scalar> PartialOrd for OrdScalar<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for OrdScalar<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .partial_cmp(&other.0)
            .expect("NaN in simulation quantity")
    }
}

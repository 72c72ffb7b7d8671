//! Scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the solvers and kernels are generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Values out of range saturate to infinity.
    fn lit(x: f64) -> Self;

    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;

    /// Primal feasibility tolerance used when the caller does not supply one.
    fn default_feas_tol() -> Self;

    /// Smallest pivot magnitude the simplex accepts.
    fn pivot_tol() -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }

    fn next_up(self) -> Self {
        f64::next_up(self)
    }

    fn default_feas_tol() -> Self {
        1e-9
    }

    fn pivot_tol() -> Self {
        1e-11
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }

    fn next_up(self) -> Self {
        f32::next_up(self)
    }

    fn default_feas_tol() -> Self {
        1e-4
    }

    fn pivot_tol() -> Self {
        1e-6
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_up_is_adjacent() {
        assert!(1.0f64.next_up() > 1.0);
        assert_eq!(1.0f64.next_up() - 1.0, f64::EPSILON);
        assert_eq!(Real::next_up(0.0f32), f32::from_bits(1));
    }
}

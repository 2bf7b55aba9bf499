//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Embeddings arrive as `f32` (binary files, most embedding models) or `f64`
//! (JSON, simulation). Everything downstream of the reader is written once
//! against [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable for embeddings, deltas and scores.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; exact for every value representable in `Self`.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to every Scalar")
    }

    #[inline]
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize converts to every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let diff = x - y;
        acc + diff * diff
    })
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_trip() {
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(f64::of_usize(7), 7.0);
        assert_eq!(2.5f32.as_f64(), 2.5);
    }

    #[test]
    fn distance_and_dot() {
        let a = [1.0f64, 2.0, 3.0];
        let b = [1.0f64, 0.0, -1.0];
        assert_eq!(squared_distance(&a, &b), 20.0);
        assert_eq!(dot(&a, &b), -2.0);
    }
}
